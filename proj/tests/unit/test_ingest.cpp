#include <doctest.h>

#include <sstream>

#include "mobsynth/errors.hpp"
#include "mobsynth/ingest.hpp"

using namespace mobsynth;

namespace {

ParseResult parse(const std::string& text) {
  std::istringstream in(text);
  return parse_lbs_csv(in);
}

Timestamp at(const char* text) { return *parse_timestamp(text); }

const AreaMap kMap({42.2, 42.6, -71.3, -70.9}, 5, 10);
const StudyWindow kWindow{at("2018-05-07T00:00:00Z"), 120};

LbsRecord rec(const std::string& id, const char* ts, double dwell = 10.0) {
  return {id, 42.4, -71.1, at(ts), dwell};
}

}  // namespace

TEST_CASE("a raw export row parses with its dwell time") {
  const auto r = parse(
      "device ID, latitude, longitude, timestamp, dwelltime\n"
      "abc1234xyz, 42.472539, -71.107958, 2018-05-06-18:11:1, 5.02\n");
  REQUIRE(r.records.size() == 1);
  CHECK(r.skipped_rows == 0);
  const auto& x = r.records[0];
  CHECK(x.device_id == "abc1234xyz");
  CHECK(x.lat == doctest::Approx(42.472539));
  CHECK(x.lon == doctest::Approx(-71.107958));
  CHECK(x.timestamp == at("2018-05-06T18:11:01Z"));
  CHECK(x.dwell_minutes == doctest::Approx(5.02));
}

TEST_CASE("empty input and malformed rows") {
  CHECK(parse("").records.empty());
  const auto r = parse(
      "device_id,latitude,longitude,timestamp,dwelltime\n"
      "a,42.4,-71.1,2018-05-07T10:00:00Z,abc\n"
      "b,42.4,-71.1,2018-05-07T10:00:00Z,3\n");
  CHECK(r.skipped_rows == 1);
  CHECK(r.records.size() == 1);
  CHECK_THROWS_AS(parse("a,42.4,-71.1,2018-05-07T10:00:00Z,3\n"), FormatError);
}

TEST_CASE("columns are located by header name") {
  const auto r = parse(
      "timestamp,dwelltime,longitude,latitude,device_id\n"
      "2018-05-07T10:00:00Z,3,-71.1,42.4,z\n");
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].device_id == "z");
  CHECK(r.records[0].lat == doctest::Approx(42.4));
}

TEST_CASE("csv writer round trips") {
  const std::vector<LbsRecord> records{rec("a", "2018-05-07T10:00:00Z", 12.5), rec("b", "2018-05-08T23:59:59Z")};
  const auto back = parse(lbs_csv(records));
  CHECK(back.records == records);
}

TEST_CASE("night labels belong to the evening that starts them") {
  CHECK(night_label(at("2018-05-07T21:00:00Z")) == day_number(at("2018-05-07T00:00:00Z")));
  CHECK(night_label(at("2018-05-08T03:00:00Z")) == day_number(at("2018-05-07T00:00:00Z")));
  CHECK_FALSE(night_label(at("2018-05-08T12:00:00Z")));
}

TEST_CASE("devices seen on only two dates are excluded") {
  std::vector<LbsRecord> r{rec("a", "2018-05-07T21:00:00Z"), rec("a", "2018-05-08T02:00:00Z"),
                           rec("a", "2018-05-08T22:00:00Z")};
  const auto p = build_panel(r, kWindow, kMap);
  CHECK(p.device_count() == 0);
  CHECK(p.stats.dropped_devices == 1);
}

TEST_CASE("a 25-hour dwell is dropped before the day/night filter") {
  std::vector<LbsRecord> r;
  for (const char* ts : {"2018-05-07T21:00:00Z", "2018-05-08T21:00:00Z", "2018-05-09T21:00:00Z"})
    r.push_back(rec("a", ts));
  r.push_back(rec("a", "2018-05-10T12:00:00Z", 25 * 60.0));
  const auto p = build_panel(r, kWindow, kMap);
  REQUIRE(p.device_count() == 1);
  CHECK(p.devices.at("a").size() == 3);
  CHECK(p.stats.dropped_long_dwell == 1);
}

TEST_CASE("a device on five dates and nights keeps every record") {
  std::vector<LbsRecord> r;
  for (const char* ts : {"2018-05-11T23:00:00Z", "2018-05-07T21:00:00Z", "2018-05-08T21:00:00Z",
                         "2018-05-09T21:00:00Z", "2018-05-10T21:00:00Z", "2018-05-07T12:00:00Z"})
    r.push_back(rec("a", ts));
  const auto p = build_panel(r, kWindow, kMap);
  REQUIRE(p.device_count() == 1);
  const auto& kept = p.devices.at("a");
  CHECK(kept.size() == r.size());
  CHECK(std::is_sorted(kept.begin(), kept.end(),
                       [](const LbsRecord& a, const LbsRecord& b) { return a.timestamp < b.timestamp; }));
}

TEST_CASE("out-of-window and out-of-region records are counted") {
  std::vector<LbsRecord> r{rec("a", "2018-05-06T21:00:00Z"), rec("a", "2018-05-12T00:00:00Z")};
  r.push_back({"a", 10.0, 10.0, at("2018-05-07T10:00:00Z"), 5.0});
  const auto p = build_panel(r, kWindow, kMap);
  CHECK(p.stats.dropped_out_of_window == 2);
  CHECK(p.stats.dropped_out_of_region == 1);
}

TEST_CASE("window validation") {
  CHECK_THROWS_AS(build_panel({}, {at("2018-05-07T00:30:00Z"), 120}, kMap), ConfigError);
  CHECK_THROWS_AS(build_panel({}, {at("2018-05-07T00:00:00Z"), 0}, kMap), ConfigError);
}
