#include "mobsynth/privacy.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

#include "mobsynth/errors.hpp"

namespace mobsynth::privacy {

int edit_distance(std::span<const Token> a, std::span<const Token> b, std::optional<int> cutoff) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  if (!cutoff || *cutoff >= std::max(n, m)) {
    std::vector<int> prev(m + 1), cur(m + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (int i = 1; i <= n; ++i) {
      cur[0] = i;
      for (int j = 1; j <= m; ++j)
        cur[j] = std::min({prev[j - 1] + (a[i - 1] != b[j - 1]), prev[j] + 1, cur[j - 1] + 1});
      std::swap(prev, cur);
    }
    return prev[m];
  }

  const int k = std::max(*cutoff, 0);
  const int inf = k + 1;
  if (std::abs(n - m) > k) return inf;
  std::vector<int> prev(m + 2, inf), cur(m + 2, inf);
  for (int j = 0; j <= std::min(m, k); ++j) prev[j] = j;
  for (int i = 1; i <= n; ++i) {
    const int lo = std::max(1, i - k);
    const int hi = std::min(m, i + k);
    cur[lo - 1] = lo == 1 && i <= k ? i : inf;
    int row_min = cur[lo - 1];
    for (int j = lo; j <= hi; ++j) {
      const int v = std::min({prev[j - 1] + (a[i - 1] != b[j - 1]), prev[j] + 1, cur[j - 1] + 1});
      cur[j] = std::min(v, inf);
      row_min = std::min(row_min, cur[j]);
    }
    if (hi < m) cur[hi + 1] = inf;
    if (row_min > k) return inf;
    std::swap(prev, cur);
  }
  return std::min(prev[m], inf);
}

std::string to_string(MinDistMode mode) {
  switch (mode) {
    case MinDistMode::kSampleVsData: return "S_vs_D";
    case MinDistMode::kSyntheticVsData: return "Sprime_vs_D";
    case MinDistMode::kResampleVsSynthetic: return "Sdoubleprime_vs_Sprime";
  }
  return "unknown";
}

namespace {

// Sorted token multisets give a cheap lower bound on edit distance: every
// token of the longer sequence not matched in the other needs an edit.
class Corpus {
 public:
  explicit Corpus(std::span<const std::vector<Token>> seqs) : seqs_(seqs) {
    bags_.reserve(seqs.size());
    for (const auto& s : seqs) {
      bags_.push_back(s);
      std::sort(bags_.back().begin(), bags_.back().end());
    }
  }

  int min_dist(std::span<const Token> query, bool naive) const {
    if (naive) {
      int best = std::numeric_limits<int>::max();
      for (const auto& s : seqs_) best = std::min(best, edit_distance(query, s));
      return best;
    }
    std::vector<Token> bag(query.begin(), query.end());
    std::sort(bag.begin(), bag.end());
    std::vector<std::pair<int, std::size_t>> order(seqs_.size());
    for (std::size_t c = 0; c < seqs_.size(); ++c) order[c] = {bag_bound(bag, bags_[c]), c};
    std::sort(order.begin(), order.end());

    int best = std::numeric_limits<int>::max();
    for (const auto& [bound, c] : order) {
      if (bound >= best) break;
      const auto& s = seqs_[c];
      const int d = best == std::numeric_limits<int>::max() ? edit_distance(query, s)
                                                            : edit_distance(query, s, best - 1);
      best = std::min(best, d);
      if (best == 0) break;
    }
    return best;
  }

 private:
  static int bag_bound(const std::vector<Token>& x, const std::vector<Token>& y) {
    std::size_t i = 0, j = 0, common = 0;
    while (i < x.size() && j < y.size()) {
      if (x[i] < y[j]) {
        ++i;
      } else if (y[j] < x[i]) {
        ++j;
      } else {
        ++common, ++i, ++j;
      }
    }
    return static_cast<int>(std::max(x.size(), y.size()) - common);
  }

  std::span<const std::vector<Token>> seqs_;
  std::vector<std::vector<Token>> bags_;
};

}  // namespace

int min_dist(std::span<const Token> query, std::span<const std::vector<Token>> corpus, bool naive) {
  if (corpus.empty()) throw MetricError("min-dist against an empty corpus");
  return Corpus(corpus).min_dist(query, naive);
}

MinDistDistribution min_dist_distribution(const Sample& queries, const Sample& corpus, MinDistMode mode,
                                          const MinDistOptions& options) {
  MinDistDistribution out;
  out.mode = mode;

  std::vector<const LabeledTrajectory*> kept;
  if (mode == MinDistMode::kResampleVsSynthetic) {
    for (const auto& q : queries) kept.push_back(&q);
  } else {
    std::map<HomeWorkLabel, std::size_t> pair_count;
    for (const auto& q : queries) ++pair_count[q.label];
    for (const auto& q : queries) {
      if (pair_count[q.label] > 1) {
        kept.push_back(&q);
      } else {
        ++out.dropped_unique_pairs;
      }
    }
  }

  std::vector<bool> removed(corpus.size(), false);
  if (mode == MinDistMode::kSampleVsData) {
    std::map<std::vector<Token>, std::vector<std::size_t>> by_tokens;
    for (std::size_t c = corpus.size(); c-- > 0;) by_tokens[corpus[c].trajectory.tokens].push_back(c);
    for (const auto& q : queries) {
      auto it = by_tokens.find(q.trajectory.tokens);
      if (it == by_tokens.end() || it->second.empty()) continue;
      removed[it->second.back()] = true;
      it->second.pop_back();
    }
  }
  std::vector<std::vector<Token>> seqs;
  for (std::size_t c = 0; c < corpus.size(); ++c)
    if (!removed[c]) seqs.push_back(corpus[c].trajectory.tokens);

  if (kept.empty()) throw MetricError("no queries remain after filtering");
  if (seqs.empty()) throw MetricError("empty corpus after filtering");

  const Corpus index(seqs);
  out.unsorted_values.assign(kept.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < kept.size();)
      out.unsorted_values[i] = index.min_dist(kept[i]->trajectory.tokens, options.naive);
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, kept.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (const auto* q : kept) out.query_ids.push_back(q->trajectory.device_id);
  out.values = out.unsorted_values;
  std::sort(out.values.begin(), out.values.end());
  return out;
}

int delta_cutoff(std::span<const int> sorted_values, double delta) {
  if (sorted_values.empty()) throw MetricError("delta cutoff of an empty distribution");
  const double n = static_cast<double>(sorted_values.size());
  // Walk distinct values; the first whose cumulative share exceeds delta
  // bounds m from above.
  std::size_t i = 0;
  while (i < sorted_values.size()) {
    const int v = sorted_values[i];
    std::size_t j = i;
    while (j < sorted_values.size() && sorted_values[j] == v) ++j;
    if (static_cast<double>(j) / n > delta + 1e-12) return v - 1;
    i = j;
  }
  return sorted_values.back();
}

std::vector<std::pair<int, int>> qq_points(std::span<const int> real_sorted, std::span<const int> evaluated_sorted) {
  if (real_sorted.empty() || evaluated_sorted.empty()) throw MetricError("Q-Q of an empty distribution");
  const std::size_t n = std::min(real_sorted.size(), evaluated_sorted.size());
  auto at = [n](std::span<const int> v, std::size_t i) {
    if (v.size() == n) return v[i];
    const double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(v.size()) / static_cast<double>(n);
    return v[std::min(v.size() - 1, static_cast<std::size_t>(pos))];
  };
  std::vector<std::pair<int, int>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(at(real_sorted, i), at(evaluated_sorted, i));
  return out;
}

bool PrivacyReport::criterion_satisfied() const {
  return std::all_of(cutoffs.begin(), cutoffs.end(), [](const CutoffRow& r) { return r.synthetic_satisfied; });
}

PrivacyReport privacy_criterion_check(MinDistDistribution sample_vs_data, MinDistDistribution synthetic_vs_data,
                                      MinDistDistribution resample_vs_synthetic, std::span<const double> deltas) {
  PrivacyReport r;
  r.sample_vs_data = std::move(sample_vs_data);
  r.synthetic_vs_data = std::move(synthetic_vs_data);
  r.resample_vs_synthetic = std::move(resample_vs_synthetic);
  for (const auto* d : {&r.sample_vs_data, &r.synthetic_vs_data, &r.resample_vs_synthetic})
    if (d->values.empty()) throw MetricError("privacy check needs three non-empty distributions");

  std::vector<double> sorted_deltas(deltas.begin(), deltas.end());
  std::sort(sorted_deltas.begin(), sorted_deltas.end());
  for (double delta : sorted_deltas) {
    if (!(delta > 0 && delta < 1)) throw DomainError("delta must lie in (0, 1)");
    CutoffRow row;
    row.delta = delta;
    row.sample_vs_data = delta_cutoff(r.sample_vs_data.values, delta);
    row.synthetic_vs_data = delta_cutoff(r.synthetic_vs_data.values, delta);
    row.resample_vs_synthetic = delta_cutoff(r.resample_vs_synthetic.values, delta);
    row.synthetic_satisfied = row.synthetic_vs_data >= row.sample_vs_data;
    row.resample_satisfied = row.resample_vs_synthetic >= row.sample_vs_data;
    r.cutoffs.push_back(row);
  }
  r.min_sample_vs_data = r.sample_vs_data.values.front();
  r.min_synthetic_vs_data = r.synthetic_vs_data.values.front();
  r.min_resample_vs_synthetic = r.resample_vs_synthetic.values.front();
  r.qq_synthetic = qq_points(r.sample_vs_data.values, r.synthetic_vs_data.values);
  r.qq_resample = qq_points(r.sample_vs_data.values, r.resample_vs_synthetic.values);

  auto flag = [&r](const MinDistDistribution& d, const char* what) {
    const auto zeros = std::count(d.values.begin(), d.values.end(), 0);
    if (zeros == 0) return;
    r.zero_distance_alarm = true;
    r.alarms.push_back(to_string(d.mode) + ": " + std::to_string(zeros) + " " + what);
  };
  flag(r.sample_vs_data, "real trajectories duplicated elsewhere in the data");
  flag(r.synthetic_vs_data, "synthetic trajectories identical to a real trajectory");
  flag(r.resample_vs_synthetic, "resampled trajectories identical to a synthetic trajectory");
  return r;
}

namespace {

nlohmann::json dist_json(const MinDistDistribution& d) {
  return {{"mode", to_string(d.mode)},
          {"values", d.values},
          {"n", d.values.size()},
          {"dropped_unique_pairs", d.dropped_unique_pairs}};
}

nlohmann::json qq_json(std::span<const std::pair<int, int>> pts) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [x, y] : pts) out.push_back({x, y});
  return out;
}

}  // namespace

nlohmann::json to_json(const PrivacyReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : report.cutoffs)
    rows.push_back({{"delta", c.delta},
                    {"S_vs_D", c.sample_vs_data},
                    {"Sprime_vs_D", c.synthetic_vs_data},
                    {"Sdoubleprime_vs_Sprime", c.resample_vs_synthetic},
                    {"synthetic_satisfied", c.synthetic_satisfied},
                    {"resample_satisfied", c.resample_satisfied}});
  return {{"distributions",
           {dist_json(report.sample_vs_data), dist_json(report.synthetic_vs_data),
            dist_json(report.resample_vs_synthetic)}},
          {"cutoffs", rows},
          {"minimum",
           {{"S_vs_D", report.min_sample_vs_data},
            {"Sprime_vs_D", report.min_synthetic_vs_data},
            {"Sdoubleprime_vs_Sprime", report.min_resample_vs_synthetic}}},
          {"criterion_satisfied", report.criterion_satisfied()},
          {"zero_distance_alarm", report.zero_distance_alarm},
          {"alarms", report.alarms},
          {"qq_synthetic", qq_json(report.qq_synthetic)},
          {"qq_resample", qq_json(report.qq_resample)}};
}

std::string cutoff_table_csv(const PrivacyReport& report) {
  std::string out = "row,S_vs_D,Sprime_vs_D,Sdoubleprime_vs_Sprime\n";
  char buf[128];
  for (const auto& c : report.cutoffs) {
    std::snprintf(buf, sizeof buf, "delta=%g,%d,%d,%d\n", c.delta, c.sample_vs_data, c.synthetic_vs_data,
                  c.resample_vs_synthetic);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "min,%d,%d,%d\n", report.min_sample_vs_data, report.min_synthetic_vs_data,
                report.min_resample_vs_synthetic);
  return out + buf;
}

std::string qq_csv(std::span<const std::pair<int, int>> points) {
  std::string out = "real_quantile,evaluated_quantile\n";
  for (const auto& [x, y] : points) out += std::to_string(x) + "," + std::to_string(y) + "\n";
  return out;
}

}  // namespace mobsynth::privacy
