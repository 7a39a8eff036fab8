#include <doctest.h>

#include <filesystem>

#include "mobsynth/errors.hpp"
#include "mobsynth/io.hpp"
#include "mobsynth/pipeline.hpp"

using namespace mobsynth;
using namespace mobsynth::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mobsynth_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

LabeledTrajectory lt(std::string id, std::vector<Token> tokens) { return {{std::move(id), std::move(tokens)}, {1, 1}}; }

}  // namespace

TEST_CASE("stage names round trip") {
  for (auto s : {Stage::kSimulate, Stage::kIngest, Stage::kBuild, Stage::kTrain, Stage::kGenerate, Stage::kEvalUtility,
                 Stage::kEvalPrivacy, Stage::kExportPlots})
    CHECK(parse_stage(to_string(s)) == s);
  CHECK_FALSE(parse_stage("foo").has_value());
}

TEST_CASE("config JSON round trip and overrides") {
  auto c = PipelineConfig::defaults();
  c.sample_size = 42;
  c.model.layer_size = 17;
  c.deltas = {0.1, 0.2};
  const auto j = c.to_json();
  const auto back = PipelineConfig::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.model.layer_size == 17);

  auto raw = j;
  apply_override(raw, "train.epochs=3");
  apply_override(raw, "generation.source=pairs");
  apply_override(raw, "world.bbox=[0,1,0,1]");
  const auto o = PipelineConfig::from_json(raw);
  CHECK(o.train.epochs == 3);
  CHECK(o.generation_source == "pairs");
  CHECK(o.world.bbox.lat_max == 1.0);
  CHECK_THROWS_AS(apply_override(raw, "no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::array()), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"train", {{"epochs", "many"}}}}), ConfigError);
}

TEST_CASE("config validation") {
  auto c = PipelineConfig::defaults();
  CHECK_NOTHROW(c.validate());
  c.generation_source = "elsewhere";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PipelineConfig::defaults();
  c.sample_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("plot rows") {
  const auto all_a = plot_rows(std::vector<Token>(120, 3));
  REQUIRE(all_a.size() == 120);
  for (const auto& r : all_a) CHECK(r.share == 1.0);

  std::vector<Token> half(120, 3);
  for (int h = 60; h < 120; ++h) half[h] = 4;
  for (const auto& r : plot_rows(half)) CHECK(r.share == doctest::Approx(0.5));

  const auto gaps = plot_rows(std::vector<Token>{kNullToken, 2, kNullToken, 2, 5});
  REQUIRE(gaps.size() == 3);
  CHECK(gaps[0].hour == 1);
  CHECK(gaps[0].share == doctest::Approx(2.0 / 3.0));
  CHECK(gaps[2].token == 5);
  CHECK(plot_rows(std::vector<Token>(5, kNullToken)).empty());
}

TEST_CASE("plot export writes one file per selection") {
  const auto dir = scratch("plots");
  const Sample s{lt("a", {1, 1, 2}), lt("b", {0, 3, 3})};
  const std::vector<std::size_t> sel{1};
  const auto paths = export_plot_data(s, sel, dir);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].filename() == "plot_0001_b.csv");
  CHECK(io::read_file(paths[0]) == "hour,token,share\n1,3,1.000000\n2,3,1.000000\n");
  const std::vector<std::size_t> bad{2};
  CHECK_THROWS_AS(export_plot_data(s, bad, dir), DomainError);
}

TEST_CASE("sample draw") {
  Sample data;
  for (int i = 0; i < 50; ++i) data.push_back(lt(std::to_string(i), {1}));
  const auto a = draw_sample(data, 10, 4);
  CHECK(a.size() == 10);
  CHECK(std::is_sorted(a.begin(), a.end(),
                       [](const auto& x, const auto& y) { return std::stoi(x.trajectory.device_id) < std::stoi(y.trajectory.device_id); }));
  CHECK(draw_sample(data, 10, 4).front().trajectory.device_id == a.front().trajectory.device_id);
  CHECK(draw_sample(data, 80, 4).size() == 50);
}

TEST_CASE("a small pipeline is reproducible") {
  const auto dir = scratch("run");
  auto c = PipelineConfig::defaults();
  c.output_dir = dir;
  c.world.n_agents = 60;
  c.world.grid_rows = 3;
  c.world.grid_cols = 4;
  c.sample_size = 40;
  c.model.embedding_size = 8;
  c.model.layer_size = 8;
  c.model.n_layers = 1;
  c.train.epochs = 1;
  c.train.batch_size = 32;
  c.threads = 1;

  const auto first = run_pipeline(c);
  const auto manifest1 = io::read_file(dir / "manifest_pipeline.json");
  for (const char* f : {"records.csv", "data.csv", "sample.csv", "model.ckpt", "synthetic.csv", "resample.csv",
                        "utility.json", "privacy.json", "privacy_cutoffs.csv"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK(fs::exists(dir / "plots"));
  const auto second = run_pipeline(c);
  CHECK(io::read_file(dir / "manifest_pipeline.json") == manifest1);
  CHECK(first == second);

  // A stage whose input is missing fails cleanly.
  auto missing = c;
  missing.output_dir = scratch("missing");
  CHECK_THROWS_AS(run_stage(Stage::kBuild, missing), ConfigError);
}
