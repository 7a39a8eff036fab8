#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mobsynth/geo.hpp"
#include "mobsynth/ingest.hpp"
#include "mobsynth/timeutil.hpp"

namespace mobsynth {

struct WorldConfig {
  std::uint64_t seed = 1;
  BoundingBox bbox{42.20, 42.60, -71.30, -70.90};
  int grid_rows = 5;
  int grid_cols = 10;
  int n_agents = 200;
  Timestamp window_start = Timestamp{std::chrono::sys_days{std::chrono::year{2018} / 5 / 7}};
  int n_days = 5;
  double report_prob = 0.5;
  double explore_prob = 0.2;
  /// Length scale of the distance decay used when drawing work areas.
  double commute_scale_km = 8.0;

  void validate() const;
};

/// Intended area (cell index) for each hour of the week, Monday 00:00 first.
using WeeklyRoutine = std::array<std::size_t, 168>;

/// Sentinel routine entry for hours not pinned to home or work.
inline constexpr std::size_t kFreeHour = static_cast<std::size_t>(-1);

struct Agent {
  std::string agent_id;
  AreaId home_area;
  AreaId work_area;
  WeeklyRoutine routine{};
};

struct World {
  AreaMap map;
  std::vector<LbsRecord> records;
  std::vector<Agent> agents;
};

/// Routine: home 20:00-09:00, work 09:00-17:00 on weekdays, free otherwise.
WeeklyRoutine make_routine(std::size_t home_cell, std::size_t work_cell);

/// Generates agents with home/work areas and hourly Markov routines, then
/// sparsifies their hourly presence into LBS point records. One record per
/// (agent, hour) with probability report_prob; the record's coordinates are
/// uniform inside the current cell and its dwell stays inside the hour.
/// Free hours stay at home unless an exploration (probability explore_prob)
/// draws a uniform area other than home and work.
World simulate_world(const WorldConfig& config);

/// Ground-truth CSV: agent_id,home_area,work_area.
std::string ground_truth_csv(const std::vector<Agent>& agents);

}  // namespace mobsynth
