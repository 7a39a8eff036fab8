#include "mobsynth/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "mobsynth/errors.hpp"
#include "mobsynth/io.hpp"

namespace mobsynth {

TokenVocab::TokenVocab(std::vector<AreaId> areas) : areas_(std::move(areas)) {
  std::sort(areas_.begin(), areas_.end());
  if (std::adjacent_find(areas_.begin(), areas_.end()) != areas_.end())
    throw VocabularyError("duplicate area id in vocabulary");
  if (!areas_.empty() && areas_.front().is_null()) throw VocabularyError("NULL_AREA cannot be a vocabulary area");
  if (areas_.size() + 1 > 65535) throw VocabularyError("vocabulary too large for 16-bit tokens");
  for (std::size_t i = 0; i < areas_.size(); ++i) index_.emplace(areas_[i].value, static_cast<Token>(i + 1));
}

Token TokenVocab::token(const AreaId& area) const {
  if (area.is_null()) return kNullToken;
  const auto it = index_.find(area.value);
  if (it == index_.end()) throw VocabularyError("area '" + area.value + "' not in vocabulary");
  return it->second;
}

const AreaId& TokenVocab::area(Token token) const {
  if (token == kNullToken) return NULL_AREA;
  if (token >= size()) throw VocabularyError("token " + std::to_string(token) + " not in vocabulary");
  return areas_[token - 1];
}

std::vector<Token> TokenVocab::tokenize(std::span<const AreaId> areas) const {
  std::vector<Token> out;
  out.reserve(areas.size());
  for (const auto& a : areas) out.push_back(token(a));
  return out;
}

std::vector<AreaId> TokenVocab::detokenize(std::span<const Token> tokens) const {
  std::vector<AreaId> out;
  out.reserve(tokens.size());
  for (Token t : tokens) out.push_back(area(t));
  return out;
}

nlohmann::json TokenVocab::to_json() const {
  nlohmann::json tokens = nlohmann::json::array();
  for (std::size_t i = 0; i < areas_.size(); ++i) tokens.push_back({{"token", i + 1}, {"area", areas_[i].value}});
  return {{"version", 1}, {"null_token", kNullToken}, {"size", size()}, {"tokens", tokens}};
}

TokenVocab TokenVocab::from_json(const nlohmann::json& j) {
  try {
    std::vector<AreaId> areas;
    for (const auto& t : j.at("tokens")) areas.push_back({t.at("area").get<std::string>()});
    TokenVocab vocab(std::move(areas));
    for (const auto& t : j.at("tokens"))
      if (vocab.token({t.at("area").get<std::string>()}) != t.at("token").get<int>())
        throw FormatError("vocabulary tokens are not in sorted-area order");
    return vocab;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid vocabulary JSON: ") + e.what());
  }
}

std::vector<StayTrajectory> build_stay_trajectories(const Panel& panel, const AreaMap& map,
                                                    const TokenVocab& vocab) {
  const int T = panel.window.n_hours;
  std::vector<Token> cell_token(map.size());
  for (std::size_t c = 0; c < map.size(); ++c) cell_token[c] = vocab.token(map.id(c));

  std::vector<StayTrajectory> out;
  out.reserve(panel.devices.size());
  std::vector<std::map<Token, double>> minutes(T);
  for (const auto& [device, records] : panel.devices) {
    for (auto& m : minutes) m.clear();
    for (const auto& r : records) {
      const auto cell = map.cell_of_point(r.lat, r.lon);
      if (!cell) continue;
      const double begin =
          std::chrono::duration<double, std::ratio<60>>(r.timestamp - panel.window.start).count();
      const double end = std::min(begin + r.dwell_minutes, 60.0 * T);
      for (int t = std::max(0, static_cast<int>(begin / 60.0)); t < T && 60.0 * t < end; ++t) {
        const double overlap = std::min(end, 60.0 * (t + 1)) - std::max(begin, 60.0 * t);
        if (overlap > 0) minutes[t][cell_token[*cell]] += overlap;
      }
    }
    StayTrajectory traj{device, std::vector<Token>(T, kNullToken)};
    for (int t = 0; t < T; ++t) {
      double best = 0.0;
      for (const auto& [token, mins] : minutes[t])  // ascending token order: ties keep the smaller
        if (mins > best) {
          best = mins;
          traj.tokens[t] = token;
        }
    }
    out.push_back(std::move(traj));
  }
  return out;
}

namespace {

std::optional<Token> most_frequent(std::span<const Token> tokens, int first_hour_of_day, bool night) {
  std::map<Token, int> counts;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const int hod = static_cast<int>((first_hour_of_day + t) % 24);
    if (is_night_hour(hod) != night || tokens[t] == kNullToken) continue;
    ++counts[tokens[t]];
  }
  std::optional<Token> best;
  int best_count = 0;
  for (const auto& [token, count] : counts)
    if (count > best_count) {
      best = token;
      best_count = count;
    }
  return best;
}

}  // namespace

std::optional<Token> infer_home(std::span<const Token> tokens, int first_hour_of_day) {
  return most_frequent(tokens, first_hour_of_day, true);
}

std::optional<Token> infer_work(std::span<const Token> tokens, int first_hour_of_day) {
  return most_frequent(tokens, first_hour_of_day, false);
}

std::optional<HomeWorkLabel> infer_label(std::span<const Token> tokens, int first_hour_of_day) {
  const auto home = infer_home(tokens, first_hour_of_day);
  const auto work = infer_work(tokens, first_hour_of_day);
  if (!home || !work) return std::nullopt;
  return HomeWorkLabel{*home, *work};
}

LabelingResult label_trajectories(const std::vector<StayTrajectory>& trajectories, int first_hour_of_day) {
  LabelingResult result;
  for (const auto& traj : trajectories) {
    const auto home = infer_home(traj.tokens, first_hour_of_day);
    if (!home) {
      ++result.dropped_no_home;
      continue;
    }
    const auto work = infer_work(traj.tokens, first_hour_of_day);
    if (!work) {
      ++result.dropped_no_work;
      continue;
    }
    result.sample.push_back({traj, {*home, *work}});
  }
  return result;
}

std::vector<PrefixedSequence> make_training_sequences(const Sample& sample, const TokenVocab& vocab) {
  std::vector<PrefixedSequence> out;
  out.reserve(sample.size());
  for (const auto& item : sample) {
    const auto& label = item.label;
    if (label.home == kNullToken || label.work == kNullToken)
      throw DomainError("label of '" + item.trajectory.device_id + "' contains the null token");
    PrefixedSequence seq;
    seq.reserve(item.trajectory.tokens.size() + 2);
    seq.push_back(label.home);
    seq.push_back(label.work);
    seq.insert(seq.end(), item.trajectory.tokens.begin(), item.trajectory.tokens.end());
    for (Token t : seq)
      if (!vocab.contains(t)) throw VocabularyError("token " + std::to_string(t) + " not in vocabulary");
    out.push_back(std::move(seq));
  }
  return out;
}

std::string trajectory_csv(const Sample& sample) {
  std::size_t T = 0;
  for (const auto& s : sample) T = std::max(T, s.trajectory.tokens.size());
  std::string out = "device_id,home,work";
  for (std::size_t t = 1; t <= T; ++t) out += ",t" + std::to_string(t);
  out += '\n';
  for (const auto& s : sample) {
    out += s.trajectory.device_id;
    out += ',' + std::to_string(s.label.home) + ',' + std::to_string(s.label.work);
    for (Token t : s.trajectory.tokens) out += ',' + std::to_string(t);
    out += '\n';
  }
  return out;
}

Sample parse_trajectory_csv(std::string_view text) {
  Sample sample;
  std::size_t pos = 0;
  bool header = true;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = io::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = io::split_csv_line(line);
    if (header) {
      header = false;
      if (fields.size() < 3 || fields[0] != "device_id") throw FormatError("trajectory file lacks header");
      continue;
    }
    if (fields.size() < 3) throw FormatError("trajectory row " + std::to_string(line_no) + " too short");
    std::vector<Token> tokens;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      unsigned value = 0;
      const auto& f = fields[i];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), value);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || value > 65535)
        throw FormatError("bad token '" + f + "' on trajectory row " + std::to_string(line_no));
      tokens.push_back(static_cast<Token>(value));
    }
    LabeledTrajectory item;
    item.trajectory.device_id = fields[0];
    item.label = {tokens[0], tokens[1]};
    item.trajectory.tokens.assign(tokens.begin() + 2, tokens.end());
    sample.push_back(std::move(item));
  }
  return sample;
}

}  // namespace mobsynth
