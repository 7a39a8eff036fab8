#include "mobsynth/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "mobsynth/errors.hpp"
#include "mobsynth/io.hpp"

namespace mobsynth {
namespace {

std::string normalize_header(std::string_view name) {
  std::string out;
  for (char c : name)
    if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

struct Columns {
  int device = -1, lat = -1, lon = -1, ts = -1, dwell = -1;
  bool complete() const { return device >= 0 && lat >= 0 && lon >= 0 && ts >= 0 && dwell >= 0; }
};

Columns map_header(const std::vector<std::string>& fields) {
  Columns c;
  for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
    const std::string h = normalize_header(fields[i]);
    if (h == "deviceid" || h == "device") c.device = i;
    else if (h == "latitude" || h == "lat") c.lat = i;
    else if (h == "longitude" || h == "lon" || h == "lng") c.lon = i;
    else if (h == "timestamp" || h == "time") c.ts = i;
    else if (h == "dwelltime" || h == "dwell" || h == "dwellminutes") c.dwell = i;
  }
  return c;
}

}  // namespace

ParseResult parse_lbs_csv(std::istream& in) {
  ParseResult result;
  std::string line;
  Columns cols;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) continue;
    const auto fields = io::split_csv_line(line);
    if (!have_header) {
      cols = map_header(fields);
      if (!cols.complete())
        throw FormatError("missing LBS header (need device ID, latitude, longitude, timestamp, dwelltime)");
      have_header = true;
      continue;
    }
    const int needed = std::max({cols.device, cols.lat, cols.lon, cols.ts, cols.dwell});
    LbsRecord rec;
    bool ok = static_cast<int>(fields.size()) > needed;
    if (ok) {
      rec.device_id = fields[cols.device];
      const auto ts = parse_timestamp(fields[cols.ts]);
      ok = !rec.device_id.empty() && ts.has_value() && parse_double(fields[cols.lat], rec.lat) &&
           parse_double(fields[cols.lon], rec.lon) && parse_double(fields[cols.dwell], rec.dwell_minutes) &&
           rec.dwell_minutes >= 0 && rec.lat >= -90 && rec.lat <= 90 && rec.lon >= -180 && rec.lon <= 180;
      if (ts) rec.timestamp = *ts;
    }
    if (ok)
      result.records.push_back(std::move(rec));
    else
      ++result.skipped_rows;
  }
  return result;
}

std::string lbs_csv(const std::vector<LbsRecord>& records) {
  std::string out = "device_id,latitude,longitude,timestamp,dwelltime\n";
  char buf[160];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%s,%.2f\n", r.lat, r.lon, format_timestamp(r.timestamp).c_str(),
                  r.dwell_minutes);
    out += r.device_id;
    out += buf;
  }
  return out;
}

std::optional<std::int64_t> night_label(Timestamp ts) {
  const int h = hour_of_day(ts);
  if (h >= 20) return day_number(ts);
  if (h < 9) return day_number(ts) - 1;
  return std::nullopt;
}

Panel build_panel(const std::vector<LbsRecord>& records, const StudyWindow& window, const AreaMap& map,
                  const PanelFilter& filter) {
  using namespace std::chrono;
  if (window.n_hours < 1) throw ConfigError("study window must span at least one hour");
  if (window.start != floor<hours>(window.start)) throw ConfigError("study window start is not hour-aligned");
  if (filter.max_dwell_hours < 0) throw ConfigError("max_dwell_hours must be non-negative");

  Panel panel;
  panel.window = window;
  panel.filter = filter;
  panel.stats.input_records = records.size();

  std::map<std::string, std::vector<LbsRecord>> kept;
  std::set<std::string> seen_devices;
  for (const auto& r : records) {
    seen_devices.insert(r.device_id);
    if (!window.contains(r.timestamp)) {
      ++panel.stats.dropped_out_of_window;
      continue;
    }
    if (!map.cell_of_point(r.lat, r.lon)) {
      ++panel.stats.dropped_out_of_region;
      continue;
    }
    if (r.dwell_minutes > filter.max_dwell_hours * 60.0) {
      ++panel.stats.dropped_long_dwell;
      continue;
    }
    kept[r.device_id].push_back(r);
  }
  panel.stats.input_devices = seen_devices.size();

  for (auto& [device, recs] : kept) {
    std::set<std::int64_t> days, nights;
    for (const auto& r : recs) {
      days.insert(day_number(r.timestamp));
      if (auto n = night_label(r.timestamp)) nights.insert(*n);
    }
    if (static_cast<int>(days.size()) < filter.min_unique_days ||
        static_cast<int>(nights.size()) < filter.min_unique_nights)
      continue;
    std::stable_sort(recs.begin(), recs.end(),
                     [](const LbsRecord& a, const LbsRecord& b) { return a.timestamp < b.timestamp; });
    panel.devices.emplace(device, std::move(recs));
  }
  panel.stats.dropped_devices = panel.stats.input_devices - panel.devices.size();
  return panel;
}

std::string panel_records_csv(const Panel& panel) {
  std::vector<LbsRecord> all;
  for (const auto& [device, recs] : panel.devices) all.insert(all.end(), recs.begin(), recs.end());
  return lbs_csv(all);
}

nlohmann::json panel_sidecar(const Panel& panel, std::size_t parse_skipped) {
  const auto& s = panel.stats;
  return {{"window", {{"start", format_timestamp(panel.window.start)}, {"n_hours", panel.window.n_hours}}},
          {"filter",
           {{"max_dwell_hours", panel.filter.max_dwell_hours},
            {"min_unique_days", panel.filter.min_unique_days},
            {"min_unique_nights", panel.filter.min_unique_nights}}},
          {"device_count", panel.device_count()},
          {"counts",
           {{"input_records", s.input_records},
            {"parse_skipped_rows", parse_skipped},
            {"dropped_out_of_window", s.dropped_out_of_window},
            {"dropped_out_of_region", s.dropped_out_of_region},
            {"dropped_long_dwell", s.dropped_long_dwell},
            {"input_devices", s.input_devices},
            {"dropped_devices", s.dropped_devices}}}};
}

}  // namespace mobsynth
