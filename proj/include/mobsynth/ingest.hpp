#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobsynth/geo.hpp"
#include "mobsynth/timeutil.hpp"

namespace mobsynth {

struct LbsRecord {
  std::string device_id;
  double lat = 0.0;
  double lon = 0.0;
  Timestamp timestamp{};
  double dwell_minutes = 0.0;

  bool operator==(const LbsRecord&) const = default;
};

struct ParseResult {
  std::vector<LbsRecord> records;
  std::size_t skipped_rows = 0;
};

/// Parses header-bearing LBS CSV (device ID, latitude, longitude, timestamp,
/// dwelltime; column order taken from the header). Malformed rows are skipped
/// and counted. A completely empty input yields no records; a first line that
/// is not a recognizable header throws FormatError.
ParseResult parse_lbs_csv(std::istream& in);

/// Inverse of parse_lbs_csv: header plus one row per record, fixed precision.
std::string lbs_csv(const std::vector<LbsRecord>& records);

struct StudyWindow {
  Timestamp start{};
  int n_hours = 120;

  Timestamp end() const { return start + std::chrono::hours(n_hours); }
  bool contains(Timestamp ts) const { return ts >= start && ts < end(); }
};

struct PanelFilter {
  double max_dwell_hours = 24.0;
  int min_unique_days = 3;
  int min_unique_nights = 3;
};

struct PanelStats {
  std::size_t input_records = 0;
  std::size_t dropped_out_of_window = 0;
  std::size_t dropped_out_of_region = 0;
  std::size_t dropped_long_dwell = 0;
  std::size_t input_devices = 0;
  std::size_t dropped_devices = 0;
};

struct Panel {
  StudyWindow window;
  PanelFilter filter;
  /// Device id -> records sorted by timestamp. std::map keeps device order
  /// deterministic.
  std::map<std::string, std::vector<LbsRecord>> devices;
  PanelStats stats;

  std::size_t device_count() const { return devices.size(); }
};

/// Night label of an instant: the calendar day on which its 20:00-09:00 span
/// started, or nullopt for daytime instants.
std::optional<std::int64_t> night_label(Timestamp ts);

/// Drops records outside the window or region and records dwelling longer
/// than max_dwell_hours, then keeps devices with at least min_unique_days
/// distinct dates and min_unique_nights distinct nights. Throws ConfigError
/// for a window that is not hour-aligned or has no hours.
Panel build_panel(const std::vector<LbsRecord>& records, const StudyWindow& window,
                  const AreaMap& map, const PanelFilter& filter = {});

/// Panel persistence: record CSV plus JSON sidecar.
std::string panel_records_csv(const Panel& panel);
nlohmann::json panel_sidecar(const Panel& panel, std::size_t parse_skipped = 0);

}  // namespace mobsynth
