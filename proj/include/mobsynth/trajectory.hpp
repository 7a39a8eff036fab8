#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobsynth/geo.hpp"
#include "mobsynth/ingest.hpp"

namespace mobsynth {

using Token = std::uint16_t;
inline constexpr Token kNullToken = 0;

/// Bijection between area ids and dense tokens 1..V-1; token 0 is the null
/// area. Areas are assigned in sorted id order.
class TokenVocab {
 public:
  TokenVocab() = default;
  explicit TokenVocab(std::vector<AreaId> areas);
  static TokenVocab from_map(const AreaMap& map) { return TokenVocab(map.ids()); }

  std::size_t size() const { return areas_.size() + 1; }
  std::size_t area_count() const { return areas_.size(); }

  /// Throws VocabularyError for unknown ids. NULL_AREA maps to kNullToken.
  Token token(const AreaId& area) const;
  /// Throws VocabularyError for tokens >= size(). kNullToken maps to NULL_AREA.
  const AreaId& area(Token token) const;
  bool contains(Token token) const { return token < size(); }

  std::vector<Token> tokenize(std::span<const AreaId> areas) const;
  std::vector<AreaId> detokenize(std::span<const Token> tokens) const;

  nlohmann::json to_json() const;
  static TokenVocab from_json(const nlohmann::json& j);

 private:
  std::vector<AreaId> areas_;
  std::unordered_map<std::string, Token> index_;
};

/// One device's hourly stay trajectory. tokens[t] covers hour [t, t+1) of the
/// study window; kNullToken marks hours without data.
struct StayTrajectory {
  std::string device_id;
  std::vector<Token> tokens;
};

struct HomeWorkLabel {
  Token home = kNullToken;
  Token work = kNullToken;

  auto operator<=>(const HomeWorkLabel&) const = default;
};

struct LabeledTrajectory {
  StayTrajectory trajectory;
  HomeWorkLabel label;
};

using Sample = std::vector<LabeledTrajectory>;

/// Attributes each record's [timestamp, timestamp + dwell] span to the hours
/// it overlaps and keeps the area with the most minutes per hour (ties go to
/// the smaller token). Hours with no attributed minutes are null.
std::vector<StayTrajectory> build_stay_trajectories(const Panel& panel, const AreaMap& map,
                                                    const TokenVocab& vocab);

/// Most frequent non-null token over night hours (20:00-09:00), ties to the
/// smaller token. nullopt when every night hour is null.
/// `first_hour_of_day` is the clock hour of tokens[0].
std::optional<Token> infer_home(std::span<const Token> tokens, int first_hour_of_day = 0);
/// Same over the remaining hours (09:00-20:00).
std::optional<Token> infer_work(std::span<const Token> tokens, int first_hour_of_day = 0);

/// Labels of a trajectory, or nullopt when either label is not inferable.
std::optional<HomeWorkLabel> infer_label(std::span<const Token> tokens, int first_hour_of_day = 0);

struct LabelingResult {
  Sample sample;
  std::size_t dropped_no_home = 0;
  std::size_t dropped_no_work = 0;
};

/// Infers labels for every trajectory, dropping (and counting) those without
/// an inferable home or work.
LabelingResult label_trajectories(const std::vector<StayTrajectory>& trajectories,
                                  int first_hour_of_day = 0);

/// [home, work, t1, ..., tT].
using PrefixedSequence = std::vector<Token>;

/// Builds prefixed sequences. Throws VocabularyError when a token is outside
/// the vocabulary and DomainError when a label is null.
std::vector<PrefixedSequence> make_training_sequences(const Sample& sample, const TokenVocab& vocab);

/// Trajectory file: header "device_id,home,work,t1,...,tT" then one row per
/// device with integer tokens (0 = null).
std::string trajectory_csv(const Sample& sample);
Sample parse_trajectory_csv(std::string_view text);

}  // namespace mobsynth
