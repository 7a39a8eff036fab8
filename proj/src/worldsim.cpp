#include "mobsynth/worldsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mobsynth/errors.hpp"
#include "mobsynth/rng.hpp"

namespace mobsynth {
namespace {

std::size_t draw_categorical(const std::vector<double>& weights, Rng& rng) {
  double total = 0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0) return i;
  }
  return weights.size() - 1;
}

double round_to(double x, double step) { return std::round(x / step) * step; }

}  // namespace

void WorldConfig::validate() const {
  if (grid_rows < 1 || grid_cols < 1 || grid_rows * grid_cols < 2)
    throw ConfigError("world grid must have at least 2 areas");
  if (n_agents < 0) throw ConfigError("n_agents must be non-negative");
  if (n_days < 1) throw ConfigError("n_days must be positive");
  if (!(report_prob >= 0 && report_prob <= 1)) throw ConfigError("report_prob must be in [0, 1]");
  if (!(explore_prob >= 0 && explore_prob <= 1)) throw ConfigError("explore_prob must be in [0, 1]");
  if (!(commute_scale_km > 0)) throw ConfigError("commute_scale_km must be positive");
  if (window_start != std::chrono::floor<std::chrono::days>(window_start) || weekday(window_start) != 0)
    throw ConfigError("world window must start on a Monday at 00:00");
}

WeeklyRoutine make_routine(std::size_t home_cell, std::size_t work_cell) {
  WeeklyRoutine r{};
  for (int d = 0; d < 7; ++d)
    for (int h = 0; h < 24; ++h) {
      std::size_t& slot = r[d * 24 + h];
      if (is_night_hour(h))
        slot = home_cell;
      else if (d < 5 && h < 17)
        slot = work_cell;
      else
        slot = kFreeHour;
    }
  return r;
}

World simulate_world(const WorldConfig& config) {
  config.validate();
  World world;
  world.map = AreaMap(config.bbox, config.grid_rows, config.grid_cols);
  const std::size_t n_areas = world.map.size();

  Rng rng = make_rng(config.seed);
  std::vector<double> home_weight(n_areas), job_weight(n_areas);
  for (auto& w : home_weight) w = std::exp(1.5 * (2.0 * uniform01(rng) - 1.0));
  for (auto& w : job_weight) w = std::exp(1.5 * (2.0 * uniform01(rng) - 1.0));

  for (int a = 0; a < config.n_agents; ++a) {
    Rng arng = make_rng(config.seed, 1000 + static_cast<std::uint64_t>(a));
    char id[32];
    std::snprintf(id, sizeof id, "dev%06d", a);
    const std::size_t home = draw_categorical(home_weight, arng);
    std::vector<double> commute(n_areas);
    for (std::size_t c = 0; c < n_areas; ++c)
      commute[c] = job_weight[c] *
                   std::exp(-haversine_km(world.map.centroid(home), world.map.centroid(c)) / config.commute_scale_km);
    const std::size_t work = draw_categorical(commute, arng);

    Agent agent{id, world.map.id(home), world.map.id(work), make_routine(home, work)};

    const int n_hours = config.n_days * 24;
    for (int h = 0; h < n_hours; ++h) {
      const Timestamp hour_start = config.window_start + std::chrono::hours(h);
      std::size_t cell = agent.routine[weekday(hour_start) * 24 + hour_of_day(hour_start)];
      if (cell == kFreeHour) {
        cell = home;
        if (uniform01(arng) < config.explore_prob) {
          std::vector<std::size_t> excluded{std::min(home, work), std::max(home, work)};
          excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
          if (n_areas > excluded.size()) {
            std::size_t pick = uniform_index(arng, n_areas - excluded.size());
            for (std::size_t skip : excluded)
              if (pick >= skip) ++pick;
            cell = pick;
          }
        }
      }
      if (uniform01(arng) >= config.report_prob) continue;

      // Offset below 55 minutes and dwell inside the hour keep each record's
      // time within the hour it describes.
      const int offset_s = static_cast<int>(uniform_index(arng, 55 * 60));
      const double max_dwell = (3600.0 - offset_s) / 60.0;
      const double dwell = std::min(max_dwell, round_to(1.0 + uniform01(arng) * (max_dwell - 1.0), 0.01));
      const BoundingBox cb = world.map.cell_bounds(cell);
      const double lat = round_to(cb.lat_min + (0.05 + 0.9 * uniform01(arng)) * (cb.lat_max - cb.lat_min), 1e-6);
      const double lon = round_to(cb.lon_min + (0.05 + 0.9 * uniform01(arng)) * (cb.lon_max - cb.lon_min), 1e-6);
      world.records.push_back({agent.agent_id, lat, lon, hour_start + std::chrono::seconds(offset_s),
                               std::floor(dwell * 100.0) / 100.0});
    }
    world.agents.push_back(std::move(agent));
  }
  return world;
}

std::string ground_truth_csv(const std::vector<Agent>& agents) {
  std::string out = "agent_id,home_area,work_area\n";
  for (const auto& a : agents) out += a.agent_id + "," + a.home_area.value + "," + a.work_area.value + "\n";
  return out;
}

}  // namespace mobsynth
