#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobsynth/trajectory.hpp"

namespace mobsynth::privacy {

/// Levenshtein distance between token sequences (null is an ordinary token).
/// With a cutoff, only the diagonal band |i - j| <= cutoff is filled and the
/// result is exact when the true distance is <= cutoff; otherwise some value
/// greater than cutoff is returned.
int edit_distance(std::span<const Token> a, std::span<const Token> b, std::optional<int> cutoff = std::nullopt);

enum class MinDistMode { kSampleVsData, kSyntheticVsData, kResampleVsSynthetic };

std::string to_string(MinDistMode mode);

struct MinDistDistribution {
  MinDistMode mode = MinDistMode::kSampleVsData;
  /// Sorted ascending.
  std::vector<int> values;
  /// Device ids of the queries in evaluation order, parallel to
  /// `unsorted_values`.
  std::vector<std::string> query_ids;
  std::vector<int> unsorted_values;
  std::size_t dropped_unique_pairs = 0;
};

struct MinDistOptions {
  /// Worker threads for the per-query search; 0 uses the hardware count.
  unsigned threads = 0;
  /// Disable pruning and compute every full DP table.
  bool naive = false;
};

/// Minimum edit distance from each query to the corpus.
///   kSampleVsData: the corpus is D with each query removed once (matched by
///     token sequence); queries with a unique <home, work> pair in Q are
///     dropped.
///   kSyntheticVsData: unique-pair queries dropped, full corpus.
///   kResampleVsSynthetic: every query against the full corpus.
/// Throws MetricError when no queries remain or the corpus is empty.
MinDistDistribution min_dist_distribution(const Sample& queries, const Sample& corpus, MinDistMode mode,
                                          const MinDistOptions& options = {});

/// Minimum distance from `query` to any corpus sequence.
int min_dist(std::span<const Token> query, std::span<const std::vector<Token>> corpus, bool naive = false);

/// Largest m with count(values <= m) / N <= delta; -1 when no m >= 0 does.
/// `sorted_values` must be sorted ascending and non-empty.
int delta_cutoff(std::span<const int> sorted_values, double delta);

/// Quantile pairs (x from the real-sample distribution, y from the evaluated
/// one). Sorted inputs; the longer is sampled at the shorter's nearest ranks.
std::vector<std::pair<int, int>> qq_points(std::span<const int> real_sorted, std::span<const int> evaluated_sorted);

struct CutoffRow {
  double delta = 0.0;
  int sample_vs_data = 0;
  int synthetic_vs_data = 0;
  int resample_vs_synthetic = 0;
  bool synthetic_satisfied = false;
  bool resample_satisfied = false;
};

struct PrivacyReport {
  MinDistDistribution sample_vs_data;
  MinDistDistribution synthetic_vs_data;
  MinDistDistribution resample_vs_synthetic;
  std::vector<CutoffRow> cutoffs;
  int min_sample_vs_data = 0;
  int min_synthetic_vs_data = 0;
  int min_resample_vs_synthetic = 0;
  std::vector<std::pair<int, int>> qq_synthetic;
  std::vector<std::pair<int, int>> qq_resample;
  /// Some distribution has minimum 0: a query coincides exactly with a
  /// corpus trajectory. `alarms` says which.
  bool zero_distance_alarm = false;
  std::vector<std::string> alarms;

  bool criterion_satisfied() const;
};

inline const std::vector<double> kDefaultDeltas{0.01, 0.05, 0.10, 0.25};

/// Cutoff table, minima, Q-Q lists and alarms from the three distributions.
/// The synthetic check holds at delta when its cutoff is >= the real
/// sample's; the resample check compares S'' vs S' against the same baseline.
PrivacyReport privacy_criterion_check(MinDistDistribution sample_vs_data, MinDistDistribution synthetic_vs_data,
                                      MinDistDistribution resample_vs_synthetic,
                                      std::span<const double> deltas = kDefaultDeltas);

nlohmann::json to_json(const PrivacyReport& report);
/// Rows per delta plus a "min" row; columns per comparison.
std::string cutoff_table_csv(const PrivacyReport& report);
std::string qq_csv(std::span<const std::pair<int, int>> points);

}  // namespace mobsynth::privacy
