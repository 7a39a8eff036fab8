#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mobsynth {

/// Opaque area identifier. The empty id is reserved as NULL_AREA ("no data").
struct AreaId {
  std::string value;

  bool is_null() const { return value.empty(); }
  auto operator<=>(const AreaId&) const = default;
};

inline const AreaId NULL_AREA{};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct BoundingBox {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;

  bool contains(double lat, double lon) const {
    return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
  }
};

/// Regular lat/lon grid standing in for census-area polygons. Row 0 is the
/// southern edge, column 0 the western edge; cell index = row * cols + col.
/// Area ids are "r{row}c{col}" zero-padded, so lexicographic id order equals
/// cell-index order.
class AreaMap {
 public:
  AreaMap() = default;
  AreaMap(BoundingBox bbox, int grid_rows, int grid_cols);

  /// Rebuilds from explicit ids and centroids (the JSON form). Ids must match
  /// the grid layout.
  static AreaMap from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const BoundingBox& bbox() const { return bbox_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return ids_.size(); }

  const AreaId& id(std::size_t cell) const { return ids_.at(cell); }
  const LatLon& centroid(std::size_t cell) const { return centroids_.at(cell); }
  std::optional<std::size_t> index_of(const AreaId& id) const;
  const std::vector<AreaId>& ids() const { return ids_; }

  /// Cell containing the point; points on a shared edge resolve to the lower
  /// row/column. nullopt when the point is outside the bounding box.
  std::optional<std::size_t> cell_of_point(double lat, double lon) const;

  /// Bounds of one cell.
  BoundingBox cell_bounds(std::size_t cell) const;

 private:
  BoundingBox bbox_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<AreaId> ids_;
  std::vector<LatLon> centroids_;
};

/// Area containing the point, or nullopt for out-of-region points.
std::optional<AreaId> area_of_point(double lat, double lon, const AreaMap& map);

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle (haversine) distance.
double haversine_km(LatLon a, LatLon b);

/// Distance between area centroids. Throws DomainError for NULL_AREA or
/// unknown ids.
double centroid_distance_km(const AreaId& a, const AreaId& b, const AreaMap& map);

}  // namespace mobsynth
