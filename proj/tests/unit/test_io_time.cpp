#include <doctest.h>

#include <filesystem>

#include "mobsynth/io.hpp"
#include "mobsynth/timeutil.hpp"

using namespace mobsynth;

TEST_CASE("sha256 of a known vector") {
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("atomic write round trip creates parent directories") {
  const auto dir = std::filesystem::temp_directory_path() / "mobsynth_io_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "nested" / "file.txt";
  io::write_atomic(path, "hello\n");
  CHECK(io::read_file(path) == "hello\n");
  io::write_atomic(path, "replaced");
  CHECK(io::read_file(path) == "replaced");
  CHECK(io::sha256_file(path) == io::sha256_hex("replaced"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv fields are split on commas outside quotes and trimmed") {
  const auto f = io::split_csv_line(R"(abc, "x,y" , 3.5 ,)");
  REQUIRE(f.size() == 4);
  CHECK(f[0] == "abc");
  CHECK(f[1] == "x,y");
  CHECK(f[2] == "3.5");
  CHECK(f[3] == "");
}

TEST_CASE("timestamps in raw export and ISO forms") {
  const auto raw = parse_timestamp("2018-05-06-18:11:1");
  REQUIRE(raw);
  CHECK(format_timestamp(*raw) == "2018-05-06T18:11:01Z");
  const auto iso = parse_timestamp("2018-05-07T09:00:00Z");
  REQUIRE(iso);
  CHECK(hour_of_day(*iso) == 9);
  CHECK(weekday(*iso) == 0);
  CHECK(parse_timestamp("2018-05-07 09:00:00") == iso);
  CHECK_FALSE(parse_timestamp("yesterday"));
  CHECK_FALSE(parse_timestamp("2018-13-01T00:00:00"));
}

TEST_CASE("night hours") {
  CHECK(is_night_hour(20));
  CHECK(is_night_hour(0));
  CHECK(is_night_hour(8));
  CHECK_FALSE(is_night_hour(9));
  CHECK_FALSE(is_night_hour(19));
}
