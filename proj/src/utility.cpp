#include "mobsynth/utility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_set>

#include "mobsynth/errors.hpp"
#include "mobsynth/rng.hpp"
#include "mobsynth/stats.hpp"

namespace mobsynth::utility {

DistanceTable::DistanceTable(const AreaMap& map, const TokenVocab& vocab)
    : vocab_size_(vocab.size()), km_(vocab.size() * vocab.size(), 0.0) {
  std::vector<LatLon> centroid(vocab_size_);
  for (std::size_t t = 1; t < vocab_size_; ++t) {
    const auto cell = map.index_of(vocab.area(static_cast<Token>(t)));
    if (!cell) throw VocabularyError("vocabulary area missing from the area map");
    centroid[t] = map.centroid(*cell);
  }
  for (std::size_t a = 1; a < vocab_size_; ++a)
    for (std::size_t b = a + 1; b < vocab_size_; ++b)
      km_[a * vocab_size_ + b] = km_[b * vocab_size_ + a] = haversine_km(centroid[a], centroid[b]);
}

double DistanceTable::km(Token a, Token b) const {
  if (a == kNullToken || b == kNullToken) throw DomainError("null area has no centroid");
  if (a >= vocab_size_ || b >= vocab_size_) throw DomainError("token outside distance table");
  return km_[a * vocab_size_ + b];
}

std::vector<double> trip_distances(std::span<const Token> tokens, const DistanceTable& table) {
  std::vector<double> out;
  for (std::size_t t = 1; t < tokens.size(); ++t)
    if (tokens[t] != tokens[t - 1] && tokens[t] != kNullToken && tokens[t - 1] != kNullToken)
      out.push_back(table.km(tokens[t - 1], tokens[t]));
  return out;
}

std::vector<double> trip_distances(const Sample& sample, const DistanceTable& table) {
  std::vector<double> out;
  for (const auto& s : sample) {
    const auto d = trip_distances(s.trajectory.tokens, table);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

Pmf histogram_pmf(std::span<const double> values, int n_bins, double range_max) {
  if (n_bins < 1) throw DomainError("histogram needs at least one bin");
  if (!(range_max > 0)) throw DomainError("histogram range must be positive");
  if (values.empty()) throw MetricError("histogram of an empty value set");
  Pmf pmf;
  const double width = range_max / n_bins;
  for (int b = 0; b < n_bins; ++b) pmf.labels.push_back(b * width);
  pmf.probabilities.assign(n_bins, 0.0);
  for (double v : values) {
    const int bin = std::clamp(static_cast<int>(std::floor(v / width)), 0, n_bins - 1);
    pmf.probabilities[bin] += 1.0;
  }
  for (auto& p : pmf.probabilities) p /= static_cast<double>(values.size());
  return pmf;
}

Pmf trip_distance_pmf(const Sample& sample, const DistanceTable& table, int n_bins, double range_max) {
  if (sample.empty()) throw MetricError("trip distance PMF of an empty sample");
  const auto d = trip_distances(sample, table);
  if (d.empty()) throw MetricError("sample contains no trips");
  return histogram_pmf(d, n_bins, range_max);
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double smoothing) {
  if (p.size() != q.size() || p.empty()) throw DomainError("KL divergence requires identical bin structure");
  double sp = 0, sq = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sp += p[i] + smoothing;
    sq += q[i] + smoothing;
  }
  double kl = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = (p[i] + smoothing) / sp;
    const double qi = (q[i] + smoothing) / sq;
    if (pi > 0) kl += pi * std::log(pi / qi);
  }
  return std::max(0.0, kl);
}

double kl_divergence(const Pmf& p, const Pmf& q, double smoothing) {
  if (p.labels != q.labels) throw DomainError("KL divergence requires identical bin structure");
  return kl_divergence(p.probabilities, q.probabilities, smoothing);
}

int locations_per_user(std::span<const Token> tokens) {
  std::vector<Token> distinct;
  for (Token t : tokens)
    if (t != kNullToken) distinct.push_back(t);
  std::sort(distinct.begin(), distinct.end());
  return static_cast<int>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
}

std::vector<int> locations_per_user(const Sample& sample) {
  std::vector<int> out;
  out.reserve(sample.size());
  for (const auto& s : sample) out.push_back(locations_per_user(s.trajectory.tokens));
  return out;
}

Pmf locations_per_user_pmf(const Sample& sample, int max_locations) {
  if (sample.empty()) throw MetricError("locations-per-user PMF of an empty sample");
  if (max_locations < 1) throw DomainError("max_locations must be positive");
  Pmf pmf;
  for (int l = 0; l <= max_locations; ++l) pmf.labels.push_back(l);
  pmf.probabilities.assign(max_locations + 1, 0.0);
  for (int l : locations_per_user(sample)) pmf.probabilities[std::min(l, max_locations)] += 1.0;
  for (auto& p : pmf.probabilities) p /= static_cast<double>(sample.size());
  return pmf;
}

ChiSquaredResult chi_squared_test(std::span<const double> observed, std::span<const double> expected, double alpha) {
  if (observed.size() != expected.size() || observed.size() < 2)
    throw DomainError("chi-squared test needs at least two matching categories");
  ChiSquaredResult r;
  r.observed.assign(observed.begin(), observed.end());
  r.expected.assign(expected.begin(), expected.end());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0)) throw DomainError("chi-squared expected counts must be positive");
    r.statistic += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    if (expected[i] < 5.0) r.low_expected_count = true;
  }
  r.df = static_cast<int>(observed.size()) - 1;
  r.p_value = stats::chi_squared_sf(r.statistic, r.df);
  r.reject = r.p_value < alpha;
  return r;
}

namespace {

// Linear-interpolated quantile of sorted values.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Bin i covers (edges[i], edges[i+1]]; the first bin also takes everything
// below, the last everything above.
std::size_t bin_of(double v, const std::vector<double>& upper_edges) {
  for (std::size_t i = 0; i + 1 < upper_edges.size(); ++i)
    if (v <= upper_edges[i]) return i;
  return upper_edges.size() - 1;
}

}  // namespace

ChiSquaredResult chi_squared_homogeneity(std::span<const int> sample_values, std::span<const int> reference_values,
                                         int n_quantiles, double alpha) {
  if (sample_values.size() < 30) throw MetricError("chi-squared homogeneity needs at least 30 sample values");
  if (reference_values.empty()) throw MetricError("empty reference distribution");
  if (n_quantiles < 2) throw DomainError("need at least two quantile bins");

  std::vector<double> ref(reference_values.begin(), reference_values.end());
  std::sort(ref.begin(), ref.end());
  std::vector<double> upper;
  for (int k = 1; k <= n_quantiles; ++k) {
    const double e = quantile(ref, static_cast<double>(k) / n_quantiles);
    if (upper.empty() || e > upper.back()) upper.push_back(e);
  }
  // Merge bins holding no reference mass into their upper neighbour.
  std::vector<double> ref_counts;
  for (;;) {
    ref_counts.assign(upper.size(), 0.0);
    for (double v : ref) ref_counts[bin_of(v, upper)] += 1.0;
    const auto empty = std::find(ref_counts.begin(), ref_counts.end(), 0.0);
    if (empty == ref_counts.end()) break;
    const auto idx = static_cast<std::size_t>(empty - ref_counts.begin());
    upper.erase(upper.begin() + static_cast<std::ptrdiff_t>(idx == upper.size() - 1 ? idx - 1 : idx));
  }
  if (upper.size() < 2) throw MetricError("reference distribution collapses into a single quantile bin");

  std::vector<double> observed(upper.size(), 0.0), expected(upper.size());
  for (int v : sample_values) observed[bin_of(v, upper)] += 1.0;
  const double n = static_cast<double>(sample_values.size());
  for (std::size_t i = 0; i < upper.size(); ++i) expected[i] = n * ref_counts[i] / static_cast<double>(ref.size());
  auto result = chi_squared_test(observed, expected, alpha);
  result.bin_upper_edges = upper;
  return result;
}

std::vector<double> aggregate_time_share(const Sample& sample, std::size_t vocab_size) {
  if (vocab_size < 2) throw DomainError("vocabulary has no areas");
  std::vector<double> share(vocab_size - 1, 0.0);
  double total = 0;
  for (const auto& s : sample)
    for (Token t : s.trajectory.tokens) {
      if (t == kNullToken) continue;
      if (t >= vocab_size) throw DomainError("token outside vocabulary");
      share[t - 1] += 1.0;
      total += 1.0;
    }
  if (total == 0) throw MetricError("aggregate time share of an all-null sample");
  for (auto& v : share) v /= total;
  return share;
}

TimeShareComparison compare_time_share(std::span<const double> sample_share, std::span<const double> reference_share,
                                       double smoothing) {
  const auto c = stats::pearson(sample_share, reference_share);
  return {c.r, c.p_value, kl_divergence(sample_share, reference_share, smoothing)};
}

LabelErrorRates label_error_rate(const Sample& sample, int first_hour_of_day) {
  if (sample.empty()) throw MetricError("label error rate of an empty sample");
  std::size_t home_errors = 0, work_errors = 0;
  for (const auto& s : sample) {
    const auto home = infer_home(s.trajectory.tokens, first_hour_of_day);
    const auto work = infer_work(s.trajectory.tokens, first_hour_of_day);
    if (!home || *home != s.label.home) ++home_errors;
    if (!work || *work != s.label.work) ++work_errors;
  }
  const double n = static_cast<double>(sample.size());
  return {home_errors / n, work_errors / n};
}

WeekChange week_change_baseline(const std::vector<StayTrajectory>& week1, const std::vector<StayTrajectory>& week2,
                                int first_hour_of_day) {
  std::map<std::string, const StayTrajectory*> second;
  for (const auto& t : week2) second.emplace(t.device_id, &t);
  WeekChange wc;
  std::size_t home_changes = 0, work_changes = 0;
  for (const auto& t : week1) {
    const auto it = second.find(t.device_id);
    if (it == second.end()) continue;
    ++wc.overlap;
    if (infer_home(t.tokens, first_hour_of_day) != infer_home(it->second->tokens, first_hour_of_day)) ++home_changes;
    if (infer_work(t.tokens, first_hour_of_day) != infer_work(it->second->tokens, first_hour_of_day)) ++work_changes;
  }
  if (wc.overlap == 0) throw MetricError("no devices appear in both panels");
  const double n = static_cast<double>(wc.overlap);
  wc.home_change_rate = home_changes / n;
  wc.work_change_rate = work_changes / n;
  wc.overlap_fraction = n / static_cast<double>(week1.size());
  return wc;
}

Baselines make_baselines(const Sample& reference, std::span<const HomeWorkLabel> labels, std::size_t vocab_size,
                         std::size_t length, std::uint64_t seed) {
  std::map<HomeWorkLabel, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < reference.size(); ++i) by_label[reference[i].label].push_back(i);

  std::string missing;
  for (const auto& l : labels)
    if (!by_label.contains(l)) missing += " <" + std::to_string(l.home) + "," + std::to_string(l.work) + ">";
  if (!missing.empty()) throw MetricError("label pairs absent from the reference:" + missing);

  Baselines out;
  Rng pick = make_rng(seed, 1);
  Rng noise = make_rng(seed, 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& pool = by_label.at(labels[i]);
    out.secondary_real.push_back(reference[pool[uniform_index(pick, pool.size())]]);

    LabeledTrajectory r;
    char id[32];
    std::snprintf(id, sizeof id, "rnd%06zu", i);
    r.trajectory.device_id = id;
    r.label = labels[i];
    r.trajectory.tokens.resize(length);
    for (auto& t : r.trajectory.tokens) t = static_cast<Token>(uniform_index(noise, vocab_size));
    out.random.push_back(std::move(r));
  }
  return out;
}

UtilityReport evaluate_utility(const Sample& data, const Sample& real_sample, std::span<const EvaluatedSample> samples,
                               const DistanceTable& table, const UtilityOptions& options) {
  if (data.empty() || real_sample.empty()) throw MetricError("utility evaluation needs non-empty data and sample");
  UtilityReport report;
  const auto ref_trips = trip_distances(data, table);
  if (ref_trips.empty()) throw MetricError("reference data contains no trips");
  report.trip_range_km = *std::max_element(ref_trips.begin(), ref_trips.end());
  report.reference_trip_pmf = histogram_pmf(ref_trips, options.trip_bins, report.trip_range_km);

  const auto ref_locations = locations_per_user(data);
  report.max_locations = std::max(1, *std::max_element(ref_locations.begin(), ref_locations.end()));
  report.reference_locations_pmf = locations_per_user_pmf(data, report.max_locations);
  report.real_sample_time_share = aggregate_time_share(real_sample, table.vocab_size());

  for (const auto& ev : samples) {
    const Sample& s = *ev.sample;
    UtilityColumn col;
    col.name = ev.name;
    col.trip_pmf = trip_distance_pmf(s, table, options.trip_bins, report.trip_range_km);
    col.kl_trip_distance = kl_divergence(col.trip_pmf, report.reference_trip_pmf, options.smoothing);
    col.locations_pmf = locations_per_user_pmf(s, report.max_locations);
    col.kl_locations_per_user = kl_divergence(col.locations_pmf, report.reference_locations_pmf, options.smoothing);
    col.chi_squared = chi_squared_homogeneity(locations_per_user(s), ref_locations, options.chi_squared_quantiles,
                                              options.alpha);
    col.time_share = aggregate_time_share(s, table.vocab_size());
    const auto tc = compare_time_share(col.time_share, report.real_sample_time_share, options.smoothing);
    col.kl_aggregate_time = tc.kl;
    col.pearson_aggregate_time = tc.pearson;
    col.pearson_p_value = tc.p_value;
    if (ev.label_error_override) {
      col.label_error = *ev.label_error_override;
      col.label_error_from_week_change = true;
    } else {
      col.label_error = label_error_rate(s, options.first_hour_of_day);
    }
    report.columns.push_back(std::move(col));
  }
  return report;
}

namespace {

nlohmann::json pmf_json(const Pmf& p) { return {{"labels", p.labels}, {"probabilities", p.probabilities}}; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string pmf_table(const Pmf& reference, const UtilityReport& report, const Pmf UtilityColumn::*member) {
  std::string out = "bin,label,reference";
  for (const auto& c : report.columns) out += "," + c.name;
  out += '\n';
  for (std::size_t b = 0; b < reference.labels.size(); ++b) {
    out += std::to_string(b) + "," + fmt(reference.labels[b]) + "," + fmt(reference.probabilities[b]);
    for (const auto& c : report.columns) out += "," + fmt((c.*member).probabilities[b]);
    out += '\n';
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const UtilityReport& report) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : report.columns) {
    cols.push_back({{"name", c.name},
                    {"kl_trip_distance", c.kl_trip_distance},
                    {"kl_locations_per_user", c.kl_locations_per_user},
                    {"kl_aggregate_time", c.kl_aggregate_time},
                    {"pearson_aggregate_time", c.pearson_aggregate_time},
                    {"pearson_p_value", c.pearson_p_value},
                    {"chi_squared",
                     {{"statistic", c.chi_squared.statistic},
                      {"p_value", c.chi_squared.p_value},
                      {"df", c.chi_squared.df},
                      {"reject", c.chi_squared.reject},
                      {"low_expected_count", c.chi_squared.low_expected_count},
                      {"bin_upper_edges", c.chi_squared.bin_upper_edges},
                      {"observed", c.chi_squared.observed},
                      {"expected", c.chi_squared.expected}}},
                    {"home_error_rate", c.label_error.home},
                    {"work_error_rate", c.label_error.work},
                    {"label_error_from_week_change", c.label_error_from_week_change},
                    {"trip_pmf", pmf_json(c.trip_pmf)},
                    {"locations_pmf", pmf_json(c.locations_pmf)}});
  }
  return {{"trip_range_km", report.trip_range_km},
          {"max_locations", report.max_locations},
          {"reference_trip_pmf", pmf_json(report.reference_trip_pmf)},
          {"reference_locations_pmf", pmf_json(report.reference_locations_pmf)},
          {"columns", cols}};
}

std::string to_csv(const UtilityReport& report) {
  std::string out = "metric";
  for (const auto& c : report.columns) out += "," + c.name;
  out += '\n';
  auto row = [&](const char* name, auto get) {
    out += name;
    for (const auto& c : report.columns) out += "," + fmt(get(c));
    out += '\n';
  };
  row("trip distance (KL divergence)", [](const UtilityColumn& c) { return c.kl_trip_distance; });
  row("locations per user (KL divergence)", [](const UtilityColumn& c) { return c.kl_locations_per_user; });
  row("locations per user (chi-squared p-value)", [](const UtilityColumn& c) { return c.chi_squared.p_value; });
  row("aggregate time per location (KL divergence)", [](const UtilityColumn& c) { return c.kl_aggregate_time; });
  row("aggregate time per location (Pearson)", [](const UtilityColumn& c) { return c.pearson_aggregate_time; });
  row("aggregate time per location (Pearson p-value)", [](const UtilityColumn& c) { return c.pearson_p_value; });
  row("home label error rate", [](const UtilityColumn& c) { return c.label_error.home; });
  row("work label error rate", [](const UtilityColumn& c) { return c.label_error.work; });
  return out;
}

std::string trip_pmf_csv(const UtilityReport& report) {
  return pmf_table(report.reference_trip_pmf, report, &UtilityColumn::trip_pmf);
}

std::string locations_pmf_csv(const UtilityReport& report) {
  return pmf_table(report.reference_locations_pmf, report, &UtilityColumn::locations_pmf);
}

std::string time_share_csv(const UtilityReport& report) {
  std::string out = "token,real_sample";
  for (const auto& c : report.columns) out += "," + c.name;
  out += '\n';
  for (std::size_t i = 0; i < report.real_sample_time_share.size(); ++i) {
    out += std::to_string(i + 1) + "," + fmt(report.real_sample_time_share[i]);
    for (const auto& c : report.columns) out += "," + fmt(c.time_share[i]);
    out += '\n';
  }
  return out;
}

}  // namespace mobsynth::utility
