#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobsynth/ingest.hpp"
#include "mobsynth/nn.hpp"
#include "mobsynth/runtime.hpp"
#include "mobsynth/worldsim.hpp"

namespace mobsynth::pipeline {

inline constexpr const char* kVersion = "0.1.0";

enum class Stage { kSimulate, kIngest, kBuild, kTrain, kGenerate, kEvalUtility, kEvalPrivacy, kExportPlots };

std::string to_string(Stage stage);
/// nullopt for names that are not a stage.
std::optional<Stage> parse_stage(std::string_view name);

/// Every path and knob of a run. JSON keys mirror the field names; see
/// README for the schema. Missing keys keep their defaults.
struct PipelineConfig {
  std::filesystem::path output_dir = "out";
  /// External inputs; empty means the simulate stage's outputs in output_dir.
  std::filesystem::path records;
  std::filesystem::path area_map;

  WorldConfig world;
  StudyWindow window;  // start defaults to world.window_start
  PanelFilter filter;
  /// Second study window `offset_days` later, used for the week-to-week
  /// label change of the secondary real baseline.
  bool second_week = true;
  int second_week_offset_days = 7;

  std::size_t sample_size = 500;
  std::uint64_t sample_seed = 1;

  nn::ModelConfig model;
  TrainConfig train;

  /// "match-sample" reuses the real sample's labels; "pairs" reads a
  /// home,work CSV from pairs_file.
  std::string generation_source = "match-sample";
  std::filesystem::path pairs_file;
  double temperature = 1.0;
  std::uint64_t generation_seed = 11;
  std::uint64_t resample_seed = 12;
  int generation_batch = 256;

  std::vector<double> deltas{0.01, 0.05, 0.10, 0.25};
  int trip_bins = 20;
  int chi_squared_quantiles = 6;
  double alpha = 0.05;
  double smoothing = 1e-9;
  std::uint64_t baseline_seed = 13;
  unsigned threads = 0;

  /// Trajectory file (relative to output_dir) and row indices for plot export.
  std::string plot_source = "synthetic.csv";
  std::vector<std::size_t> plot_selection{0, 1, 2};

  static PipelineConfig defaults();
  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ConfigError.
  void validate() const;

  std::filesystem::path records_path() const;
  std::filesystem::path area_map_path() const;
  std::filesystem::path out(const std::string& name) const { return output_dir / name; }
};

/// Applies "a.b.c=value" overrides; value is parsed as JSON when possible and
/// taken as a string otherwise.
void apply_override(nlohmann::json& config, std::string_view assignment);

/// Runs one stage, writing its artifacts and manifest_<stage>.json. Returns
/// the manifest.
nlohmann::json run_stage(Stage stage, const PipelineConfig& config);

/// All stages in order; writes manifest_pipeline.json aggregating them.
nlohmann::json run_pipeline(const PipelineConfig& config);

/// Uniform draw of `size` trajectories without replacement, kept in input
/// order. The whole sample when size >= its length.
Sample draw_sample(const Sample& data, std::size_t size, std::uint64_t seed);

struct PlotRow {
  int hour = 0;
  Token token = kNullToken;
  /// Share of the trajectory's non-null hours spent in this token's area.
  double share = 0.0;
};

/// One row per non-null hour.
std::vector<PlotRow> plot_rows(std::span<const Token> tokens);

/// Writes plot_<index>_<device>.csv per selected trajectory. Throws
/// DomainError for an out-of-range selection. Returns the written paths.
std::vector<std::filesystem::path> export_plot_data(const Sample& trajectories, std::span<const std::size_t> selection,
                                                    const std::filesystem::path& dir);

}  // namespace mobsynth::pipeline
