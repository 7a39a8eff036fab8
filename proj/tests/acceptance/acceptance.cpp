// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; the exit status is nonzero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mobsynth/gradcheck.hpp"
#include "mobsynth/ingest.hpp"
#include "mobsynth/io.hpp"
#include "mobsynth/pipeline.hpp"
#include "mobsynth/privacy.hpp"
#include "mobsynth/rng.hpp"
#include "mobsynth/runtime.hpp"
#include "mobsynth/stats.hpp"
#include "mobsynth/trajectory.hpp"
#include "mobsynth/utility.hpp"
#include "mobsynth/worldsim.hpp"

using namespace mobsynth;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mobsynth_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  Outcome o;
  nn::ModelConfig c;
  c.vocab_size = 10;
  c.embedding_size = 4;
  c.layer_size = 8;
  c.n_layers = 2;
  c.dropout_rate = 0.1;
  c.seed = 1;
  double worst = 0.0;
  std::size_t blocks = 0;
  for (auto mode : {nn::Mode::kEval, nn::Mode::kTrain}) {
    nn::GradCheckOptions opt;
    opt.mode = mode;
    const auto report = nn::gradient_check(c, opt);
    for (const auto& b : report.blocks) {
      worst = std::max(worst, b.max_relative_error);
      ++blocks;
    }
  }
  const double elapsed = seconds_since(t0);
  o.require(blocks == 16, std::to_string(blocks) + " blocks checked");
  o.require(worst < 1e-3, "max relative error " + fmt("%.2e", worst) + " < 1e-3");
  o.require(elapsed < 30.0, "runtime " + fmt("%.1f", elapsed) + " s < 30 s");
  return o;
}

Outcome memorization() {
  const auto t0 = Clock::now();
  Outcome o;
  Rng rng = make_rng(77);
  PrefixedSequence seq{1, 2};
  for (int i = 0; i < 30; ++i) seq.push_back(static_cast<Token>(uniform_index(rng, 10)));
  nn::ModelConfig mc;
  mc.vocab_size = 10;
  mc.embedding_size = 16;
  mc.layer_size = 64;
  mc.n_layers = 2;
  mc.dropout_rate = 0.0;
  mc.seed = 4;
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 32;
  tc.learning_rate = 0.01;
  tc.seed = 9;
  const auto ck = train(std::vector<PrefixedSequence>(16, seq), mc, tc);
  Rng gen = make_rng(1);
  const auto out = generate_trajectory(ck, seq[0], seq[1], kGreedy, gen, 30);
  const std::vector<Token> body(seq.begin() + 2, seq.end());
  const double elapsed = seconds_since(t0);
  o.require(ck.meta.final_loss < 0.05, "final loss " + fmt("%.4f", ck.meta.final_loss) + " < 0.05");
  o.require(out == body, "greedy output reproduces the sequence");
  o.require(elapsed < 120.0, "runtime " + fmt("%.1f", elapsed) + " s < 120 s");
  return o;
}

// Full Wagner-Fischer table, independent of the library kernel.
int reference_edit_distance(const std::vector<Token>& a, const std::vector<Token>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1] ? 1 : 0)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<Token> random_sequence(Rng& rng, std::size_t max_len, std::size_t vocab) {
  std::vector<Token> s(uniform_index(rng, max_len + 1));
  for (auto& t : s) t = static_cast<Token>(uniform_index(rng, vocab));
  return s;
}

Outcome edit_distance_oracle() {
  Outcome o;
  Rng rng = make_rng(3000);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_sequence(rng, 30, 20);
    const auto b = random_sequence(rng, 30, 20);
    const int truth = reference_edit_distance(a, b);
    const int cutoff = static_cast<int>(uniform_index(rng, 31));
    const int banded = privacy::edit_distance(a, b, cutoff);
    if (privacy::edit_distance(a, b) != truth) ++mismatches;
    if (truth <= cutoff ? banded != truth : banded <= cutoff) ++mismatches;
  }
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_sequence(rng, 30, 20);
    const auto b = random_sequence(rng, 30, 20);
    const auto c = random_sequence(rng, 30, 20);
    const int ab = privacy::edit_distance(a, b);
    if (ab != privacy::edit_distance(b, a)) ++violations;
    if (privacy::edit_distance(a, c) > ab + privacy::edit_distance(b, c)) ++violations;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatches vs full table on 1000 pairs");
  o.require(violations == 0, std::to_string(violations) + " symmetry/triangle violations on 1000 triples");
  return o;
}

double series_gamma_p(double a, double x) {
  double term = 1.0 / a, sum = term;
  for (int n = 1; n < 100000 && term > sum * 1e-17; ++n) {
    term *= x / (a + n);
    sum += term;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

Outcome statistical_kernels() {
  Outcome o;
  const double kl = utility::kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75});
  o.require(std::abs(kl - 0.1438) <= 1e-3, "KL example " + fmt("%.4f", kl));

  const double p = stats::chi_squared_sf(11.0705, 5);
  const double oracle = 1.0 - series_gamma_p(2.5, 11.0705 / 2.0);
  o.require(std::abs(p - 0.05) <= 5e-4 && std::abs(p - oracle) <= 5e-4,
            "chi-squared p " + fmt("%.5f", p) + " (series " + fmt("%.5f", oracle) + ")");

  Rng rng = make_rng(4000);
  int negative = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + uniform_index(rng, 20);
    std::vector<double> a(k), b(k);
    for (std::size_t j = 0; j < k; ++j) {
      a[j] = uniform01(rng) < 0.2 ? 0.0 : uniform01(rng);
      b[j] = uniform01(rng) < 0.2 ? 0.0 : uniform01(rng);
    }
    a[0] += 1e-3;
    b[0] += 1e-3;
    const double sa = std::accumulate(a.begin(), a.end(), 0.0), sb = std::accumulate(b.begin(), b.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) a[j] /= sa, b[j] /= sb;
    if (!(utility::kl_divergence(a, b) >= 0.0)) ++negative;
  }
  o.require(negative == 0, std::to_string(negative) + " negative KL on 1000 random pairs");

  // Right-skewed discrete reference; subsamples of it must be rejected at
  // about the nominal rate.
  std::vector<int> ref(20000);
  for (auto& v : ref) {
    v = 1;
    while (v < 12 && uniform01(rng) < 0.62) ++v;
  }
  int rejects = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> sample(500);
    for (auto& v : sample) v = ref[uniform_index(rng, ref.size())];
    rejects += utility::chi_squared_homogeneity(sample, ref, 6, 0.05).reject;
  }
  const double rate = rejects / 1000.0;
  o.require(std::abs(rate - 0.05) <= 0.02, "false-reject rate " + fmt("%.3f", rate));
  return o;
}

// Fraction of surviving agents whose inferred home (and work) equals the
// assigned area.
std::pair<double, double> label_recovery(const WorldConfig& c) {
  const auto world = simulate_world(c);
  const auto panel = build_panel(world.records, {c.window_start, 120}, world.map);
  const auto vocab = TokenVocab::from_map(world.map);
  std::map<std::string, const Agent*> agents;
  for (const auto& a : world.agents) agents[a.agent_id] = &a;
  std::size_t home_ok = 0, work_ok = 0, n = 0;
  for (const auto& t : build_stay_trajectories(panel, world.map, vocab)) {
    const Agent& agent = *agents.at(t.device_id);
    const auto home = infer_home(t.tokens);
    const auto work = infer_work(t.tokens);
    home_ok += home && vocab.area(*home) == agent.home_area;
    work_ok += work && vocab.area(*work) == agent.work_area;
    ++n;
  }
  return {static_cast<double>(home_ok) / n, static_cast<double>(work_ok) / n};
}

Outcome home_work_inference() {
  Outcome o;
  WorldConfig c;
  c.n_agents = 500;
  c.seed = 21;
  c.report_prob = 1.0;
  c.explore_prob = 0.0;
  const auto [home_full, work_full] = label_recovery(c);
  o.require(home_full == 1.0 && work_full == 1.0,
            "full reporting: home " + fmt("%.3f", home_full) + ", work " + fmt("%.3f", work_full));
  c.report_prob = 0.6;
  c.explore_prob = WorldConfig{}.explore_prob;
  const auto [home_part, work_part] = label_recovery(c);
  o.require(home_part >= 0.95, "report_prob 0.6: home " + fmt("%.3f", home_part) + " (work " +
                                   fmt("%.3f", work_part) + ")");
  return o;
}

// ---------------------------------------------------------------------------
// Desk-scale experiment shared by criteria 6 and 7.

constexpr int kSeeds = 10;

struct Experiment {
  bool ran = false;
  std::string error;
  pipeline::PipelineConfig config;
  double base_seconds = 0.0;
  double utility_seconds = 0.0;
  double privacy_seconds = 0.0;
  std::vector<json> utility;  // per seed
  std::vector<json> privacy;  // per seed
  std::vector<std::string> qq_csv;
};

pipeline::PipelineConfig experiment_config() {
  auto c = pipeline::PipelineConfig::defaults();
  c.output_dir = scratch("experiment");
  c.world.n_agents = 2000;
  c.world.grid_rows = 5;
  c.world.grid_cols = 10;
  c.sample_size = 500;
  c.model.embedding_size = 32;
  c.model.layer_size = 64;
  c.model.n_layers = 2;
  c.train.epochs = 20;
  c.train.batch_size = 128;
  c.train.learning_rate = 3e-3;
  return c;
}

Experiment& experiment() {
  static Experiment e;
  if (e.ran) return e;
  e.ran = true;
  e.config = experiment_config();
  try {
    auto t0 = Clock::now();
    for (auto s : {pipeline::Stage::kSimulate, pipeline::Stage::kIngest, pipeline::Stage::kBuild,
                   pipeline::Stage::kTrain})
      pipeline::run_stage(s, e.config);
    e.base_seconds = seconds_since(t0);
    for (int i = 0; i < kSeeds; ++i) {
      auto c = e.config;
      c.generation_seed = 100 + i;
      c.resample_seed = 200 + i;
      t0 = Clock::now();
      pipeline::run_stage(pipeline::Stage::kGenerate, c);
      pipeline::run_stage(pipeline::Stage::kEvalUtility, c);
      e.utility_seconds += seconds_since(t0);
      e.utility.push_back(json::parse(io::read_file(c.out("utility.json"))));
      t0 = Clock::now();
      pipeline::run_stage(pipeline::Stage::kEvalPrivacy, c);
      e.privacy_seconds += seconds_since(t0);
      e.privacy.push_back(json::parse(io::read_file(c.out("privacy.json"))));
      e.qq_csv.push_back(io::read_file(c.out("qq_resample.csv")));
    }
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  return e;
}

const json& column(const json& utility, const std::string& name) {
  for (const auto& c : utility["columns"])
    if (c["name"] == name) return c;
  throw std::runtime_error("utility report lacks column " + name);
}

double mean_of(const std::vector<json>& reports, const std::function<double(const json&)>& f) {
  double s = 0.0;
  for (const auto& r : reports) s += f(r);
  return s / static_cast<double>(reports.size());
}

Outcome desk_experiment() {
  Outcome o;
  auto& e = experiment();
  if (!e.error.empty()) {
    o.require(false, "experiment failed: " + e.error);
    return o;
  }
  const auto kl_syn = mean_of(e.utility, [](const json& u) { return column(u, "synthetic")["kl_trip_distance"].get<double>(); });
  const auto kl_rnd = mean_of(e.utility, [](const json& u) { return column(u, "random")["kl_trip_distance"].get<double>(); });
  o.require(kl_syn < 0.1 * kl_rnd, "trip KL S' " + fmt("%.4f", kl_syn) + " vs random " + fmt("%.4f", kl_rnd));

  int not_rejected = 0;
  for (const auto& u : e.utility) not_rejected += !column(u, "synthetic")["chi_squared"]["reject"].get<bool>();
  o.require(not_rejected >= 8, "locations chi-squared kept in " + std::to_string(not_rejected) + "/10 seeds");

  const auto rho_syn =
      mean_of(e.utility, [](const json& u) { return column(u, "synthetic")["pearson_aggregate_time"].get<double>(); });
  const auto rho_rnd =
      mean_of(e.utility, [](const json& u) { return column(u, "random")["pearson_aggregate_time"].get<double>(); });
  o.require(rho_syn > 0.9, "time Pearson S' " + fmt("%.4f", rho_syn));
  o.require(std::abs(rho_rnd) < 0.2, "random " + fmt("%.4f", rho_rnd));

  const auto home_err =
      mean_of(e.utility, [](const json& u) { return column(u, "synthetic")["home_error_rate"].get<double>(); });
  o.require(home_err < 0.25, "home label error " + fmt("%.4f", home_err));

  const double minutes = (e.base_seconds + e.utility_seconds) / 60.0;
  o.require(minutes < 30.0, "runtime " + fmt("%.1f", minutes) + " min (train stages " +
                                fmt("%.1f", e.base_seconds / 60.0) + ")");
  return o;
}

Outcome privacy_pipeline() {
  Outcome o;
  auto& e = experiment();
  if (!e.error.empty()) {
    o.require(false, "experiment failed: " + e.error);
    return o;
  }
  bool produced = true, monotone = true, qq_ok = true;
  int ordering = 0;
  for (int i = 0; i < static_cast<int>(e.privacy.size()); ++i) {
    const auto& p = e.privacy[i];
    produced = produced && p["distributions"].size() == 3;
    for (const auto& d : p["distributions"]) produced = produced && !d["values"].empty();
    bool all_rows = p["cutoffs"].size() == 4;
    for (const char* key : {"S_vs_D", "Sprime_vs_D", "Sdoubleprime_vs_Sprime"}) {
      int prev = -2;
      for (const auto& row : p["cutoffs"]) {
        monotone = monotone && row[key].get<int>() >= prev;
        prev = row[key].get<int>();
      }
    }
    for (const auto& row : p["cutoffs"])
      all_rows = all_rows && row["Sdoubleprime_vs_Sprime"].get<int>() >= row["S_vs_D"].get<int>();
    ordering += all_rows;

    // The exported Q-Q file pairs quantiles of both distributions: as many
    // rows as the shorter one, non-decreasing in both coordinates.
    const auto& csv = e.qq_csv[i];
    std::size_t rows = 0;
    int px = -1, py = -1;
    std::size_t pos = csv.find('\n') + 1;
    qq_ok = qq_ok && csv.rfind("real_quantile,evaluated_quantile\n", 0) == 0;
    while (pos < csv.size()) {
      const auto end = csv.find('\n', pos);
      const auto fields = io::split_csv_line(std::string_view(csv).substr(pos, end - pos));
      const int x = std::stoi(fields.at(0)), y = std::stoi(fields.at(1));
      qq_ok = qq_ok && x >= px && y >= py;
      px = x, py = y;
      ++rows;
      pos = end + 1;
    }
    const auto n_real = p["distributions"][0]["values"].size();
    const auto n_eval = p["distributions"][2]["values"].size();
    qq_ok = qq_ok && rows == std::min(n_real, n_eval);
  }
  o.require(produced && e.privacy.size() == kSeeds, "three min-dist distributions per seed");
  o.require(monotone, "cutoffs non-decreasing in delta");
  o.require(qq_ok, "Q-Q export consistent");
  o.require(ordering >= 8, "S'' vs S' >= S vs D at every delta in " + std::to_string(ordering) + "/10 seeds");

  // A distribution compared with itself lies on the diagonal.
  const auto& first = e.privacy.front()["distributions"][0]["values"];
  const auto v = first.get<std::vector<int>>();
  bool diagonal = true;
  for (const auto& [x, y] : privacy::qq_points(v, v)) diagonal = diagonal && x == y;
  o.require(diagonal, "self Q-Q on the 45-degree line");

  // Plant a copy of a synthetic trajectory (with a shared label pair) in D.
  const auto data = parse_trajectory_csv(io::read_file(e.config.out("data.csv")));
  const auto sample = parse_trajectory_csv(io::read_file(e.config.out("sample.csv")));
  const auto synthetic = parse_trajectory_csv(io::read_file(e.config.out("synthetic.csv")));
  const auto resample = parse_trajectory_csv(io::read_file(e.config.out("resample.csv")));
  std::map<HomeWorkLabel, int> pairs;
  for (const auto& s : synthetic) ++pairs[s.label];
  auto planted = data;
  for (const auto& s : synthetic)
    if (pairs[s.label] > 1) {
      planted.push_back(s);
      planted.back().trajectory.device_id = "planted";
      break;
    }
  const auto report = privacy::privacy_criterion_check(
      privacy::min_dist_distribution(sample, data, privacy::MinDistMode::kSampleVsData),
      privacy::min_dist_distribution(synthetic, planted, privacy::MinDistMode::kSyntheticVsData),
      privacy::min_dist_distribution(resample, synthetic, privacy::MinDistMode::kResampleVsSynthetic));
  o.require(planted.size() == data.size() + 1 && report.min_synthetic_vs_data == 0 && report.zero_distance_alarm,
            "planted duplicate flagged");
  o.require(true, "privacy evaluation " + fmt("%.1f", e.privacy_seconds) + " s for 10 seeds");
  return o;
}

Outcome min_dist_performance() {
  Outcome o;
  WorldConfig c;
  c.n_agents = 6000;
  c.seed = 8;
  const auto world = simulate_world(c);
  const auto panel = build_panel(world.records, {c.window_start, 120}, world.map);
  const auto vocab = TokenVocab::from_map(world.map);
  const auto labeled = label_trajectories(build_stay_trajectories(panel, world.map, vocab)).sample;
  if (labeled.size() < 5500) {
    o.require(false, "only " + std::to_string(labeled.size()) + " trajectories simulated");
    return o;
  }
  const Sample queries(labeled.begin(), labeled.begin() + 500);
  const Sample corpus(labeled.begin() + 500, labeled.begin() + 5500);

  const auto t0 = Clock::now();
  const auto fast = privacy::min_dist_distribution(queries, corpus, privacy::MinDistMode::kResampleVsSynthetic);
  const double elapsed = seconds_since(t0);
  o.require(fast.values.size() == 500 && elapsed < 60.0, "500 x 5000 in " + fmt("%.1f", elapsed) + " s");

  const Sample q50(queries.begin(), queries.begin() + 50);
  const Sample c200(corpus.begin(), corpus.begin() + 200);
  privacy::MinDistOptions naive;
  naive.naive = true;
  const auto a = privacy::min_dist_distribution(q50, c200, privacy::MinDistMode::kResampleVsSynthetic);
  const auto b = privacy::min_dist_distribution(q50, c200, privacy::MinDistMode::kResampleVsSynthetic, naive);
  o.require(a.unsorted_values == b.unsorted_values, "banded equals naive on 50 x 200");
  return o;
}

// Every manifest and every recorded output hash, keyed by file.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) out[fs::relative(entry.path(), dir).string()] = io::sha256_file(entry.path());
  return out;
}

Outcome determinism() {
  Outcome o;
  auto c = pipeline::PipelineConfig::defaults();
  c.output_dir = scratch("determinism");
  c.world.n_agents = 300;
  c.sample_size = 100;
  c.model.embedding_size = 16;
  c.model.layer_size = 16;
  c.train.epochs = 2;
  c.threads = 4;
  pipeline::run_pipeline(c);
  const auto first = snapshot(c.output_dir);
  pipeline::run_pipeline(c);
  const auto second = snapshot(c.output_dir);
  std::size_t differing = 0;
  for (const auto& [name, hash] : first) differing += !second.contains(name) || second.at(name) != hash;
  std::size_t manifests = 0;
  for (const auto& [name, hash] : first) manifests += name.rfind("manifest_", 0) == 0;
  o.require(first.size() == second.size() && differing == 0,
            std::to_string(first.size()) + " files, " + std::to_string(differing) + " differ");
  o.require(manifests == 9, std::to_string(manifests) + " manifests compared");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const Criterion criteria[] = {
      {1, "gradient correctness", gradient_correctness},
      {2, "memorization", memorization},
      {3, "edit-distance oracle", edit_distance_oracle},
      {4, "statistical kernels", statistical_kernels},
      {5, "home/work inference", home_work_inference},
      {6, "desk-scale experiment", desk_experiment},
      {7, "privacy pipeline", privacy_pipeline},
      {8, "min-dist performance", min_dist_performance},
      {9, "determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
