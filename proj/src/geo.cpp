#include "mobsynth/geo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mobsynth/errors.hpp"

namespace mobsynth {
namespace {

AreaId grid_id(int row, int col) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%03dc%03d", row, col);
  return AreaId{buf};
}

}  // namespace

AreaMap::AreaMap(BoundingBox bbox, int grid_rows, int grid_cols)
    : bbox_(bbox), rows_(grid_rows), cols_(grid_cols) {
  if (grid_rows < 1 || grid_cols < 1) throw ConfigError("grid dimensions must be positive");
  if (grid_rows > 999 || grid_cols > 999) throw ConfigError("grid dimensions must be below 1000");
  if (!(bbox.lat_min < bbox.lat_max) || !(bbox.lon_min < bbox.lon_max))
    throw ConfigError("bounding box must have positive extent");
  if (bbox.lat_min < -90 || bbox.lat_max > 90 || bbox.lon_min < -180 || bbox.lon_max > 180)
    throw ConfigError("bounding box outside valid lat/lon range");
  const double dlat = (bbox.lat_max - bbox.lat_min) / rows_;
  const double dlon = (bbox.lon_max - bbox.lon_min) / cols_;
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) {
      ids_.push_back(grid_id(r, c));
      centroids_.push_back({bbox.lat_min + (r + 0.5) * dlat, bbox.lon_min + (c + 0.5) * dlon});
    }
}

std::optional<std::size_t> AreaMap::index_of(const AreaId& id) const {
  int r = 0, c = 0;
  if (id.value.size() != 8 || std::sscanf(id.value.c_str(), "r%3dc%3d", &r, &c) != 2) return std::nullopt;
  if (r < 0 || r >= rows_ || c < 0 || c >= cols_) return std::nullopt;
  const std::size_t cell = static_cast<std::size_t>(r) * cols_ + c;
  if (ids_[cell] != id) return std::nullopt;
  return cell;
}

std::optional<std::size_t> AreaMap::cell_of_point(double lat, double lon) const {
  if (!bbox_.contains(lat, lon)) return std::nullopt;
  const double dlat = (bbox_.lat_max - bbox_.lat_min) / rows_;
  const double dlon = (bbox_.lon_max - bbox_.lon_min) / cols_;
  // ceil(x) - 1 sends a point on the edge between cells i and i+1 to cell i.
  auto index = [](double offset, double step, int n) {
    int i = static_cast<int>(std::ceil(offset / step)) - 1;
    return std::clamp(i, 0, n - 1);
  };
  const int r = index(lat - bbox_.lat_min, dlat, rows_);
  const int c = index(lon - bbox_.lon_min, dlon, cols_);
  return static_cast<std::size_t>(r) * cols_ + c;
}

BoundingBox AreaMap::cell_bounds(std::size_t cell) const {
  const double dlat = (bbox_.lat_max - bbox_.lat_min) / rows_;
  const double dlon = (bbox_.lon_max - bbox_.lon_min) / cols_;
  const int r = static_cast<int>(cell / cols_);
  const int c = static_cast<int>(cell % cols_);
  return {bbox_.lat_min + r * dlat, bbox_.lat_min + (r + 1) * dlat, bbox_.lon_min + c * dlon,
          bbox_.lon_min + (c + 1) * dlon};
}

nlohmann::json AreaMap::to_json() const {
  nlohmann::json areas = nlohmann::json::array();
  for (std::size_t i = 0; i < ids_.size(); ++i)
    areas.push_back({{"id", ids_[i].value}, {"lat", centroids_[i].lat}, {"lon", centroids_[i].lon}});
  return {{"version", 1},
          {"bbox",
           {{"lat_min", bbox_.lat_min},
            {"lat_max", bbox_.lat_max},
            {"lon_min", bbox_.lon_min},
            {"lon_max", bbox_.lon_max}}},
          {"grid_rows", rows_},
          {"grid_cols", cols_},
          {"areas", areas}};
}

AreaMap AreaMap::from_json(const nlohmann::json& j) {
  try {
    const auto& b = j.at("bbox");
    AreaMap map({b.at("lat_min").get<double>(), b.at("lat_max").get<double>(),
                 b.at("lon_min").get<double>(), b.at("lon_max").get<double>()},
                j.at("grid_rows").get<int>(), j.at("grid_cols").get<int>());
    const auto& areas = j.at("areas");
    if (areas.size() != map.size()) throw FormatError("area list does not match grid dimensions");
    for (std::size_t i = 0; i < areas.size(); ++i) {
      if (areas[i].at("id").get<std::string>() != map.ids_[i].value)
        throw FormatError("area id " + areas[i].at("id").get<std::string>() + " does not match grid layout");
      map.centroids_[i] = {areas[i].at("lat").get<double>(), areas[i].at("lon").get<double>()};
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid area map JSON: ") + e.what());
  }
}

std::optional<AreaId> area_of_point(double lat, double lon, const AreaMap& map) {
  const auto cell = map.cell_of_point(lat, lon);
  if (!cell) return std::nullopt;
  return map.id(*cell);
}

double haversine_km(LatLon a, LatLon b) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kDeg;
  const double dlon = (b.lon - a.lon) * kDeg;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

double centroid_distance_km(const AreaId& a, const AreaId& b, const AreaMap& map) {
  if (a.is_null() || b.is_null()) throw DomainError("NULL_AREA has no centroid");
  const auto ia = map.index_of(a);
  const auto ib = map.index_of(b);
  if (!ia || !ib) throw DomainError("unknown area id");
  if (*ia == *ib) return 0.0;
  return haversine_km(map.centroid(*ia), map.centroid(*ib));
}

}  // namespace mobsynth
