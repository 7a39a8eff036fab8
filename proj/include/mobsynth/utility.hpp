#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobsynth/geo.hpp"
#include "mobsynth/trajectory.hpp"

namespace mobsynth::utility {

/// Discrete distribution over ordered bins. `labels` are bin lower edges for
/// histograms and the integer value for count distributions.
struct Pmf {
  std::vector<double> labels;
  std::vector<double> probabilities;
};

/// Centroid distances between every pair of area tokens.
class DistanceTable {
 public:
  DistanceTable(const AreaMap& map, const TokenVocab& vocab);

  /// Throws DomainError when either token is null or out of range.
  double km(Token a, Token b) const;
  std::size_t vocab_size() const { return vocab_size_; }

 private:
  std::size_t vocab_size_ = 0;
  std::vector<double> km_;
};

/// Distances of every trip: adjacent positions with differing, non-null
/// areas.
std::vector<double> trip_distances(std::span<const Token> tokens, const DistanceTable& table);
std::vector<double> trip_distances(const Sample& sample, const DistanceTable& table);

/// Equal-width histogram over [0, range_max]; values above the range land in
/// the last bin.
Pmf histogram_pmf(std::span<const double> values, int n_bins, double range_max);

/// Throws MetricError when the sample contains no trips.
Pmf trip_distance_pmf(const Sample& sample, const DistanceTable& table, int n_bins, double range_max);

/// D_KL(P || Q) in nats after adding `smoothing` to every bin of both and
/// renormalizing. Throws DomainError when bins differ.
double kl_divergence(const Pmf& p, const Pmf& q, double smoothing = 1e-9);
double kl_divergence(std::span<const double> p, std::span<const double> q, double smoothing = 1e-9);

/// Distinct non-null areas in a trajectory.
int locations_per_user(std::span<const Token> tokens);
std::vector<int> locations_per_user(const Sample& sample);

/// Distribution of locations per user over 0..max_locations; larger counts
/// fall into the last bin.
Pmf locations_per_user_pmf(const Sample& sample, int max_locations);

struct ChiSquaredResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int df = 0;
  bool reject = false;
  /// Some expected count is below 5.
  bool low_expected_count = false;
  std::vector<double> bin_upper_edges;
  std::vector<double> observed;
  std::vector<double> expected;
};

/// Pearson statistic sum (obs - exp)^2 / exp with df = bins - 1.
ChiSquaredResult chi_squared_test(std::span<const double> observed, std::span<const double> expected,
                                  double alpha = 0.05);

/// Homogeneity of `sample_values` against the reference distribution: bins
/// are the n_quantiles equal quantiles of the reference (linear
/// interpolation; duplicate edges and empty bins merged), expected counts are
/// |sample| times the reference bin proportions. Requires |sample| >= 30.
ChiSquaredResult chi_squared_homogeneity(std::span<const int> sample_values, std::span<const int> reference_values,
                                         int n_quantiles = 6, double alpha = 0.05);

/// Share of non-null hours spent in each area (index = token - 1).
/// Throws MetricError for an all-null sample.
std::vector<double> aggregate_time_share(const Sample& sample, std::size_t vocab_size);

struct TimeShareComparison {
  double pearson = 0.0;
  double p_value = 1.0;
  double kl = 0.0;  // D_KL(sample || reference)
};

TimeShareComparison compare_time_share(std::span<const double> sample_share, std::span<const double> reference_share,
                                       double smoothing = 1e-9);

struct LabelErrorRates {
  double home = 0.0;
  double work = 0.0;
};

/// Rate at which inferred labels differ from the requested ones; failed
/// inference counts as an error.
LabelErrorRates label_error_rate(const Sample& sample, int first_hour_of_day = 0);

struct WeekChange {
  double home_change_rate = 0.0;
  double work_change_rate = 0.0;
  double overlap_fraction = 0.0;
  std::size_t overlap = 0;
};

/// Label changes between two panels' trajectories for devices present in
/// both. Throws MetricError for an empty intersection.
WeekChange week_change_baseline(const std::vector<StayTrajectory>& week1, const std::vector<StayTrajectory>& week2,
                                int first_hour_of_day = 0);

struct Baselines {
  Sample secondary_real;
  Sample random;
};

/// Secondary real sample: for each label, a uniformly chosen (with
/// replacement) trajectory of the reference carrying that label. Random
/// sample: tokens i.i.d. uniform over all vocab_size tokens including null,
/// labels copied. Throws MetricError listing labels absent from the reference.
Baselines make_baselines(const Sample& reference, std::span<const HomeWorkLabel> labels, std::size_t vocab_size,
                         std::size_t length, std::uint64_t seed);

struct UtilityOptions {
  int trip_bins = 20;
  int chi_squared_quantiles = 6;
  double alpha = 0.05;
  double smoothing = 1e-9;
  int first_hour_of_day = 0;
};

struct EvaluatedSample {
  std::string name;
  const Sample* sample = nullptr;
  /// Replaces the computed label error (used for the week-change baseline of
  /// the secondary real sample).
  std::optional<LabelErrorRates> label_error_override;
};

struct UtilityColumn {
  std::string name;
  double kl_trip_distance = 0.0;
  double kl_locations_per_user = 0.0;
  double kl_aggregate_time = 0.0;
  double pearson_aggregate_time = 0.0;
  double pearson_p_value = 1.0;
  ChiSquaredResult chi_squared;
  LabelErrorRates label_error;
  bool label_error_from_week_change = false;
  Pmf trip_pmf;
  Pmf locations_pmf;
  std::vector<double> time_share;
};

struct UtilityReport {
  double trip_range_km = 0.0;
  int max_locations = 0;
  Pmf reference_trip_pmf;
  Pmf reference_locations_pmf;
  std::vector<double> real_sample_time_share;
  std::vector<UtilityColumn> columns;
};

/// Distribution metrics compare each sample to the full reference `data`;
/// aggregate time compares to the real sample `real_sample`, whose label
/// distribution the evaluated samples share.
UtilityReport evaluate_utility(const Sample& data, const Sample& real_sample,
                               std::span<const EvaluatedSample> samples, const DistanceTable& table,
                               const UtilityOptions& options = {});

nlohmann::json to_json(const UtilityReport& report);
/// Metric rows by sample columns.
std::string to_csv(const UtilityReport& report);
/// bin label, reference, then one probability column per sample.
std::string trip_pmf_csv(const UtilityReport& report);
std::string locations_pmf_csv(const UtilityReport& report);
std::string time_share_csv(const UtilityReport& report);

}  // namespace mobsynth::utility
