#include "mobsynth/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mobsynth/checkpoint.hpp"
#include "mobsynth/errors.hpp"
#include "mobsynth/io.hpp"
#include "mobsynth/privacy.hpp"
#include "mobsynth/rng.hpp"
#include "mobsynth/utility.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mobsynth::pipeline {

namespace {

constexpr std::array<std::pair<Stage, const char*>, 8> kStageNames{{
    {Stage::kSimulate, "simulate"},
    {Stage::kIngest, "ingest"},
    {Stage::kBuild, "build"},
    {Stage::kTrain, "train"},
    {Stage::kGenerate, "generate"},
    {Stage::kEvalUtility, "eval-utility"},
    {Stage::kEvalPrivacy, "eval-privacy"},
    {Stage::kExportPlots, "export-plots"},
}};

Timestamp timestamp_field(const json& j, const char* key, Timestamp fallback) {
  if (!j.contains(key)) return fallback;
  const auto text = j.at(key).get<std::string>();
  const auto ts = parse_timestamp(text);
  if (!ts) throw ConfigError(std::string("unparseable timestamp for ") + key + ": " + text);
  return *ts;
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config section ") + key + " must be an object");
  return j.at(key);
}

}  // namespace

std::string to_string(Stage stage) {
  for (const auto& [s, name] : kStageNames)
    if (s == stage) return name;
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (const auto& [s, n] : kStageNames)
    if (name == n) return s;
  return std::nullopt;
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.world.n_days = 12;
  c.window.start = c.world.window_start;
  c.model.embedding_size = 32;
  c.model.layer_size = 64;
  c.model.n_layers = 2;
  c.model.seed = 3;
  c.train.epochs = 10;
  c.train.batch_size = 128;
  c.train.seed = 5;
  return c;
}

PipelineConfig PipelineConfig::from_json(const json& j) try {
  PipelineConfig c = defaults();
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  c.output_dir = j.value("output_dir", c.output_dir.string());
  c.records = j.value("records", c.records.string());
  c.area_map = j.value("area_map", c.area_map.string());

  const auto& w = section(j, "world");
  c.world.seed = w.value("seed", c.world.seed);
  if (w.contains("bbox")) {
    const auto b = w.at("bbox").get<std::vector<double>>();
    if (b.size() != 4) throw ConfigError("world.bbox must be [lat_min, lat_max, lon_min, lon_max]");
    c.world.bbox = {b[0], b[1], b[2], b[3]};
  }
  c.world.grid_rows = w.value("grid_rows", c.world.grid_rows);
  c.world.grid_cols = w.value("grid_cols", c.world.grid_cols);
  c.world.n_agents = w.value("n_agents", c.world.n_agents);
  c.world.window_start = timestamp_field(w, "window_start", c.world.window_start);
  c.world.n_days = w.value("n_days", c.world.n_days);
  c.world.report_prob = w.value("report_prob", c.world.report_prob);
  c.world.explore_prob = w.value("explore_prob", c.world.explore_prob);
  c.world.commute_scale_km = w.value("commute_scale_km", c.world.commute_scale_km);

  const auto& win = section(j, "window");
  c.window.start = timestamp_field(win, "start", c.world.window_start);
  c.window.n_hours = win.value("n_hours", c.window.n_hours);

  const auto& f = section(j, "filter");
  c.filter.max_dwell_hours = f.value("max_dwell_hours", c.filter.max_dwell_hours);
  c.filter.min_unique_days = f.value("min_unique_days", c.filter.min_unique_days);
  c.filter.min_unique_nights = f.value("min_unique_nights", c.filter.min_unique_nights);

  const auto& sw = section(j, "second_week");
  c.second_week = sw.value("enabled", c.second_week);
  c.second_week_offset_days = sw.value("offset_days", c.second_week_offset_days);

  const auto& s = section(j, "sample");
  c.sample_size = s.value("size", c.sample_size);
  c.sample_seed = s.value("seed", c.sample_seed);

  if (j.contains("model")) {
    json merged = c.model.to_json();
    merged.update(section(j, "model"));
    c.model = nn::ModelConfig::from_json(merged);
  }

  const auto& t = section(j, "train");
  c.train.epochs = t.value("epochs", c.train.epochs);
  c.train.batch_size = t.value("batch_size", c.train.batch_size);
  c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
  c.train.seed = t.value("seed", c.train.seed);
  c.train.checkpoint_every = t.value("checkpoint_every", c.train.checkpoint_every);

  const auto& g = section(j, "generation");
  c.generation_source = g.value("source", c.generation_source);
  c.pairs_file = g.value("pairs_file", c.pairs_file.string());
  c.temperature = g.value("temperature", c.temperature);
  c.generation_seed = g.value("seed", c.generation_seed);
  c.resample_seed = g.value("resample_seed", c.resample_seed);
  c.generation_batch = g.value("batch_size", c.generation_batch);

  const auto& e = section(j, "evaluation");
  c.deltas = e.value("deltas", c.deltas);
  c.trip_bins = e.value("trip_bins", c.trip_bins);
  c.chi_squared_quantiles = e.value("chi_squared_quantiles", c.chi_squared_quantiles);
  c.alpha = e.value("alpha", c.alpha);
  c.smoothing = e.value("smoothing", c.smoothing);
  c.baseline_seed = e.value("baseline_seed", c.baseline_seed);
  c.threads = e.value("threads", c.threads);

  const auto& p = section(j, "plots");
  c.plot_source = p.value("source", c.plot_source);
  c.plot_selection = p.value("selection", c.plot_selection);
  return c;
} catch (const json::exception& e) {
  throw ConfigError(std::string("malformed config: ") + e.what());
}

json PipelineConfig::to_json() const {
  return {{"output_dir", output_dir.string()},
          {"records", records.string()},
          {"area_map", area_map.string()},
          {"world",
           {{"seed", world.seed},
            {"bbox", {world.bbox.lat_min, world.bbox.lat_max, world.bbox.lon_min, world.bbox.lon_max}},
            {"grid_rows", world.grid_rows},
            {"grid_cols", world.grid_cols},
            {"n_agents", world.n_agents},
            {"window_start", format_timestamp(world.window_start)},
            {"n_days", world.n_days},
            {"report_prob", world.report_prob},
            {"explore_prob", world.explore_prob},
            {"commute_scale_km", world.commute_scale_km}}},
          {"window", {{"start", format_timestamp(window.start)}, {"n_hours", window.n_hours}}},
          {"filter",
           {{"max_dwell_hours", filter.max_dwell_hours},
            {"min_unique_days", filter.min_unique_days},
            {"min_unique_nights", filter.min_unique_nights}}},
          {"second_week", {{"enabled", second_week}, {"offset_days", second_week_offset_days}}},
          {"sample", {{"size", sample_size}, {"seed", sample_seed}}},
          {"model", model.to_json()},
          {"train",
           {{"epochs", train.epochs},
            {"batch_size", train.batch_size},
            {"learning_rate", train.learning_rate},
            {"seed", train.seed},
            {"checkpoint_every", train.checkpoint_every}}},
          {"generation",
           {{"source", generation_source},
            {"pairs_file", pairs_file.string()},
            {"temperature", temperature},
            {"seed", generation_seed},
            {"resample_seed", resample_seed},
            {"batch_size", generation_batch}}},
          {"evaluation",
           {{"deltas", deltas},
            {"trip_bins", trip_bins},
            {"chi_squared_quantiles", chi_squared_quantiles},
            {"alpha", alpha},
            {"smoothing", smoothing},
            {"baseline_seed", baseline_seed},
            {"threads", threads}}},
          {"plots", {{"source", plot_source}, {"selection", plot_selection}}}};
}

void PipelineConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  world.validate();
  if (window.n_hours < 1) throw ConfigError("window.n_hours must be positive");
  if (window.start != std::chrono::floor<std::chrono::hours>(window.start))
    throw ConfigError("window.start must be hour-aligned");
  if (second_week && second_week_offset_days < 1) throw ConfigError("second_week.offset_days must be positive");
  if (sample_size < 1) throw ConfigError("sample.size must be positive");
  nn::ModelConfig m = model;
  m.vocab_size = std::max(m.vocab_size, 2);
  m.validate();
  train.validate();
  if (generation_source != "match-sample" && generation_source != "pairs")
    throw ConfigError("generation.source must be \"match-sample\" or \"pairs\"");
  if (generation_source == "pairs" && pairs_file.empty()) throw ConfigError("generation.pairs_file must be set");
  if (!(temperature >= 0)) throw ConfigError("generation.temperature must be non-negative");
  if (generation_batch < 1) throw ConfigError("generation.batch_size must be positive");
  for (double d : deltas)
    if (!(d > 0 && d < 1)) throw ConfigError("evaluation.deltas must lie in (0, 1)");
  if (trip_bins < 1) throw ConfigError("evaluation.trip_bins must be positive");
  if (chi_squared_quantiles < 2) throw ConfigError("evaluation.chi_squared_quantiles must be at least 2");
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("evaluation.alpha must lie in (0, 1)");
  if (!(smoothing >= 0)) throw ConfigError("evaluation.smoothing must be non-negative");
}

fs::path PipelineConfig::records_path() const { return records.empty() ? out("records.csv") : records; }
fs::path PipelineConfig::area_map_path() const { return area_map.empty() ? out("area_map.json") : area_map; }

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("override must look like key.path=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("empty component in override key " + key);
    if (!node->is_object()) throw ConfigError("override key " + key + " descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

Sample draw_sample(const Sample& data, std::size_t size, std::uint64_t seed) {
  if (size >= data.size()) return data;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, 0);
  // Partial Fisher-Yates over the first `size` slots.
  for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + uniform_index(rng, data.size() - i)]);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  Sample out;
  out.reserve(size);
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

std::vector<PlotRow> plot_rows(std::span<const Token> tokens) {
  std::map<Token, int> hours;
  int total = 0;
  for (Token t : tokens)
    if (t != kNullToken) ++hours[t], ++total;
  std::vector<PlotRow> rows;
  for (std::size_t h = 0; h < tokens.size(); ++h)
    if (tokens[h] != kNullToken)
      rows.push_back({static_cast<int>(h), tokens[h], static_cast<double>(hours[tokens[h]]) / total});
  return rows;
}

std::vector<fs::path> export_plot_data(const Sample& trajectories, std::span<const std::size_t> selection,
                                       const fs::path& dir) {
  for (auto i : selection)
    if (i >= trajectories.size())
      throw DomainError("plot selection " + std::to_string(i) + " out of range (" +
                        std::to_string(trajectories.size()) + " trajectories)");
  std::vector<fs::path> written;
  for (auto i : selection) {
    const auto& t = trajectories[i].trajectory;
    std::string csv = "hour,token,share\n";
    char buf[64];
    for (const auto& r : plot_rows(t.tokens)) {
      std::snprintf(buf, sizeof buf, "%d,%u,%.6f\n", r.hour, static_cast<unsigned>(r.token), r.share);
      csv += buf;
    }
    std::snprintf(buf, sizeof buf, "plot_%04zu_", i);
    const auto path = dir / (buf + t.device_id + ".csv");
    io::write_atomic(path, csv);
    written.push_back(path);
  }
  return written;
}

namespace {

// Collects file hashes and writes the stage manifest.
class Manifest {
 public:
  Manifest(Stage stage, const PipelineConfig& config) : config_(config) {
    j_["stage"] = to_string(stage);
    j_["version"] = kVersion;
    j_["checkpoint_version"] = nn::kCheckpointVersion;
    j_["config_sha256"] = io::sha256_hex(config.to_json().dump());
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
    j_["seeds"] = json::object();
  }

  std::string read_input(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("missing input " + path.string());
    auto bytes = io::read_file(path);
    j_["inputs"][path.string()] = io::sha256_hex(bytes);
    return bytes;
  }

  void write(const std::string& name, std::string_view contents) { write_path(config_.out(name), contents); }

  void write_path(const fs::path& path, std::string_view contents) {
    io::write_atomic(path, contents);
    record_output(path);
  }

  void record_output(const fs::path& path) { j_["outputs"][path.string()] = io::sha256_file(path); }

  json& seeds() { return j_["seeds"]; }
  json& info() { return j_["info"]; }

  json finish() {
    const auto path = config_.out("manifest_" + j_["stage"].get<std::string>() + ".json");
    io::write_atomic(path, j_.dump(2) + "\n");
    return j_;
  }

 private:
  const PipelineConfig& config_;
  json j_;
};

int first_hour(const PipelineConfig& c) { return hour_of_day(c.window.start); }

struct Geography {
  AreaMap map;
  TokenVocab vocab;
};

Geography load_geography(Manifest& m, const PipelineConfig& c) {
  Geography g;
  g.map = AreaMap::from_json(json::parse(m.read_input(c.area_map_path())));
  g.vocab = TokenVocab::from_map(g.map);
  return g;
}

Sample read_sample(Manifest& m, const PipelineConfig& c, const std::string& name) {
  return parse_trajectory_csv(m.read_input(c.out(name)));
}

std::vector<StayTrajectory> bodies(const Sample& s) {
  std::vector<StayTrajectory> out;
  for (const auto& t : s) out.push_back(t.trajectory);
  return out;
}

std::vector<HomeWorkLabel> labels_of(const Sample& s) {
  std::vector<HomeWorkLabel> out;
  for (const auto& t : s) out.push_back(t.label);
  return out;
}

std::vector<HomeWorkLabel> read_pairs(Manifest& m, const fs::path& path, const TokenVocab& vocab) {
  std::istringstream in(m.read_input(path));
  std::string line;
  std::vector<HomeWorkLabel> labels;
  bool header = true;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) continue;
    const auto f = io::split_csv_line(line);
    if (header) {
      header = false;
      if (f.size() >= 2 && f[0] == "home" && f[1] == "work") continue;
    }
    if (f.size() != 2) throw FormatError("pairs file rows must be home,work");
    labels.push_back({vocab.token(AreaId{f[0]}), vocab.token(AreaId{f[1]})});
  }
  if (labels.empty()) throw FormatError("pairs file has no rows");
  for (const auto& l : labels)
    if (l.home == kNullToken || l.work == kNullToken) throw DomainError("pairs file contains a null area");
  return labels;
}

json stage_simulate(const PipelineConfig& c) {
  Manifest m(Stage::kSimulate, c);
  m.seeds()["world"] = c.world.seed;
  const auto world = simulate_world(c.world);
  m.write("area_map.json", world.map.to_json().dump(2) + "\n");
  m.write("records.csv", lbs_csv(world.records));
  m.write("ground_truth.csv", ground_truth_csv(world.agents));
  m.info() = {{"records", world.records.size()}, {"agents", world.agents.size()}};
  spdlog::info("simulate: {} agents, {} records", world.agents.size(), world.records.size());
  return m.finish();
}

json stage_ingest(const PipelineConfig& c) {
  Manifest m(Stage::kIngest, c);
  const auto g = load_geography(m, c);
  std::istringstream in(m.read_input(c.records_path()));
  const auto parsed = parse_lbs_csv(in);

  auto emit = [&](const StudyWindow& window, const std::string& stem) {
    const auto panel = build_panel(parsed.records, window, g.map, c.filter);
    m.write(stem + "_records.csv", panel_records_csv(panel));
    m.write(stem + ".json", panel_sidecar(panel, parsed.skipped_rows).dump(2) + "\n");
    spdlog::info("ingest: {} devices in {}", panel.device_count(), stem);
    return panel.device_count();
  };
  json info{{"parsed_records", parsed.records.size()}, {"skipped_rows", parsed.skipped_rows}};
  info["panel_devices"] = emit(c.window, "panel");
  if (c.second_week) {
    StudyWindow w2 = c.window;
    w2.start += std::chrono::days(c.second_week_offset_days);
    info["panel_week2_devices"] = emit(w2, "panel_week2");
  }
  m.info() = info;
  return m.finish();
}

json stage_build(const PipelineConfig& c) {
  Manifest m(Stage::kBuild, c);
  m.seeds()["sample"] = c.sample_seed;
  const auto g = load_geography(m, c);
  m.write("vocab.json", g.vocab.to_json().dump(2) + "\n");

  auto labeled = [&](const std::string& stem, StudyWindow window) {
    std::istringstream in(m.read_input(c.out(stem + "_records.csv")));
    const auto panel = build_panel(parse_lbs_csv(in).records, window, g.map, c.filter);
    return label_trajectories(build_stay_trajectories(panel, g.map, g.vocab), first_hour(c));
  };
  const auto data = labeled("panel", c.window);
  if (data.sample.empty()) throw MetricError("no labeled trajectories survive the panel filters");
  m.write("data.csv", trajectory_csv(data.sample));
  const auto sample = draw_sample(data.sample, c.sample_size, c.sample_seed);
  m.write("sample.csv", trajectory_csv(sample));
  json info{{"trajectories", data.sample.size()},
            {"dropped_no_home", data.dropped_no_home},
            {"dropped_no_work", data.dropped_no_work},
            {"sample", sample.size()}};
  if (c.second_week) {
    StudyWindow w2 = c.window;
    w2.start += std::chrono::days(c.second_week_offset_days);
    const auto week2 = labeled("panel_week2", w2);
    m.write("data_week2.csv", trajectory_csv(week2.sample));
    info["week2_trajectories"] = week2.sample.size();
  }
  m.info() = info;
  return m.finish();
}

json stage_train(const PipelineConfig& c) {
  Manifest m(Stage::kTrain, c);
  const auto vocab = TokenVocab::from_json(json::parse(m.read_input(c.out("vocab.json"))));
  const auto data = read_sample(m, c, "data.csv");
  nn::ModelConfig model = c.model;
  model.vocab_size = static_cast<int>(vocab.size());
  m.seeds()["model"] = model.seed;
  m.seeds()["train"] = c.train.seed;

  TrainConfig tc = c.train;
  tc.on_epoch = [](int epoch, double loss) { spdlog::info("train: epoch {} loss {:.5f}", epoch, loss); };
  tc.on_checkpoint = [&](int epoch, const nn::ModelCheckpoint& ck) {
    char name[64];
    std::snprintf(name, sizeof name, "model_epoch%03d.ckpt", epoch);
    m.write(name, nn::serialize_checkpoint(ck));
  };
  auto ck = train(make_training_sequences(data, vocab), model, tc);
  ck.meta.trajectory_length = c.window.n_hours;
  m.write("model.ckpt", nn::serialize_checkpoint(ck));
  m.write("training.json", json{{"epoch_losses", ck.meta.epoch_losses},
                                {"final_loss", ck.meta.final_loss},
                                {"parameters", ck.params.parameter_count()},
                                {"sequences", data.size()}}
                                   .dump(2) +
                               "\n");
  return m.finish();
}

json stage_generate(const PipelineConfig& c) {
  Manifest m(Stage::kGenerate, c);
  const auto ck = nn::deserialize_checkpoint(m.read_input(c.out("model.ckpt")));
  std::vector<HomeWorkLabel> labels;
  if (c.generation_source == "pairs") {
    const auto vocab = TokenVocab::from_json(json::parse(m.read_input(c.out("vocab.json"))));
    labels = read_pairs(m, c.pairs_file, vocab);
  } else {
    labels = labels_of(read_sample(m, c, "sample.csv"));
  }
  m.seeds()["generation"] = c.generation_seed;
  m.seeds()["resample"] = c.resample_seed;
  GenerationRequest req{labels, c.temperature, c.generation_seed, c.generation_batch};
  m.write("synthetic.csv", trajectory_csv(generate_sample(ck, req, c.window.n_hours)));
  req.seed = c.resample_seed;
  m.write("resample.csv", trajectory_csv(generate_sample(ck, req, c.window.n_hours)));
  m.info() = {{"trajectories", labels.size()}};
  spdlog::info("generate: {} trajectories per sample", labels.size());
  return m.finish();
}

json stage_eval_utility(const PipelineConfig& c) {
  Manifest m(Stage::kEvalUtility, c);
  m.seeds()["baseline"] = c.baseline_seed;
  const auto g = load_geography(m, c);
  const auto data = read_sample(m, c, "data.csv");
  const auto sample = read_sample(m, c, "sample.csv");
  const auto synthetic = read_sample(m, c, "synthetic.csv");
  const auto baselines =
      utility::make_baselines(data, labels_of(sample), g.vocab.size(), c.window.n_hours, c.baseline_seed);

  std::optional<utility::LabelErrorRates> secondary_error;
  json info = json::object();
  if (c.second_week) {
    const auto week2 = read_sample(m, c, "data_week2.csv");
    const auto wc = utility::week_change_baseline(bodies(data), bodies(week2), first_hour(c));
    secondary_error = utility::LabelErrorRates{wc.home_change_rate, wc.work_change_rate};
    info["week_change"] = {{"home", wc.home_change_rate},
                           {"work", wc.work_change_rate},
                           {"overlap", wc.overlap},
                           {"overlap_fraction", wc.overlap_fraction}};
  }
  const std::vector<utility::EvaluatedSample> evaluated{
      {"synthetic", &synthetic, std::nullopt},
      {"secondary_real", &baselines.secondary_real, secondary_error},
      {"random", &baselines.random, std::nullopt},
  };
  utility::UtilityOptions opts;
  opts.trip_bins = c.trip_bins;
  opts.chi_squared_quantiles = c.chi_squared_quantiles;
  opts.alpha = c.alpha;
  opts.smoothing = c.smoothing;
  opts.first_hour_of_day = first_hour(c);
  const auto report = utility::evaluate_utility(data, sample, evaluated, utility::DistanceTable(g.map, g.vocab), opts);

  auto j = utility::to_json(report);
  j["info"] = info;
  m.write("utility.json", j.dump(2) + "\n");
  m.write("utility.csv", utility::to_csv(report));
  m.write("utility_trip_pmf.csv", utility::trip_pmf_csv(report));
  m.write("utility_locations_pmf.csv", utility::locations_pmf_csv(report));
  m.write("utility_time_share.csv", utility::time_share_csv(report));
  return m.finish();
}

json stage_eval_privacy(const PipelineConfig& c) {
  Manifest m(Stage::kEvalPrivacy, c);
  const auto data = read_sample(m, c, "data.csv");
  const auto sample = read_sample(m, c, "sample.csv");
  const auto synthetic = read_sample(m, c, "synthetic.csv");
  const auto resample = read_sample(m, c, "resample.csv");
  privacy::MinDistOptions opts;
  opts.threads = c.threads;
  using privacy::MinDistMode;
  auto report = privacy::privacy_criterion_check(
      privacy::min_dist_distribution(sample, data, MinDistMode::kSampleVsData, opts),
      privacy::min_dist_distribution(synthetic, data, MinDistMode::kSyntheticVsData, opts),
      privacy::min_dist_distribution(resample, synthetic, MinDistMode::kResampleVsSynthetic, opts), c.deltas);
  m.write("privacy.json", privacy::to_json(report).dump(2) + "\n");
  m.write("privacy_cutoffs.csv", privacy::cutoff_table_csv(report));
  m.write("qq_synthetic.csv", privacy::qq_csv(report.qq_synthetic));
  m.write("qq_resample.csv", privacy::qq_csv(report.qq_resample));
  for (const auto& a : report.alarms) spdlog::warn("privacy alarm: {}", a);
  m.info() = {{"criterion_satisfied", report.criterion_satisfied()},
              {"zero_distance_alarm", report.zero_distance_alarm}};
  return m.finish();
}

json stage_export_plots(const PipelineConfig& c) {
  Manifest m(Stage::kExportPlots, c);
  const auto trajectories = read_sample(m, c, c.plot_source);
  for (const auto& p : export_plot_data(trajectories, c.plot_selection, c.out("plots"))) m.record_output(p);
  return m.finish();
}

}  // namespace

json run_stage(Stage stage, const PipelineConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);
  switch (stage) {
    case Stage::kSimulate: return stage_simulate(config);
    case Stage::kIngest: return stage_ingest(config);
    case Stage::kBuild: return stage_build(config);
    case Stage::kTrain: return stage_train(config);
    case Stage::kGenerate: return stage_generate(config);
    case Stage::kEvalUtility: return stage_eval_utility(config);
    case Stage::kEvalPrivacy: return stage_eval_privacy(config);
    case Stage::kExportPlots: return stage_export_plots(config);
  }
  throw ConfigError("unknown stage");
}

json run_pipeline(const PipelineConfig& config) {
  json stages = json::array();
  for (const auto& [stage, name] : kStageNames) {
    // Externally supplied records replace the simulated world.
    if (stage == Stage::kSimulate && !config.records.empty()) continue;
    spdlog::info("stage {}", name);
    stages.push_back(run_stage(stage, config));
  }
  json manifest{{"stage", "pipeline"},
                {"version", kVersion},
                {"config_sha256", io::sha256_hex(config.to_json().dump())},
                {"stages", stages}};
  io::write_atomic(config.out("manifest_pipeline.json"), manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace mobsynth::pipeline
