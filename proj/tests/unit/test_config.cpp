#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cpsim/error.hpp"
#include "cpsim/config.hpp"

using namespace cpsim;
namespace fs = std::filesystem;

namespace {

Error error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e;
  }
  FAIL("config accepted: " << text);
  return Error(ErrorCode::kIo, "");
}

}  // namespace

TEST_CASE("empty file yields documented defaults") {
  const auto c = parse_config("{}");
  const RunConfig d;
  CHECK(config_to_json(c) == config_to_json(d));
  CHECK(c.master_seed == 1);
  CHECK(c.cameras.size() == 7);
  CHECK(c.scenario.arrivals.arrival_rate_per_s == 1.0);
  CHECK(c.calibration.budget_kb == 30.0);
  CHECK(c.fusion.rate_kb == 18.69);
  CHECK(std::isnan(c.proxies.streaming_threshold));
}

TEST_CASE("json round trip") {
  RunConfig c;
  c.master_seed = 99;
  c.channel.link.bandwidth_hz = 1.5e6;
  c.proxies.streaming_threshold = 12.5;
  c.scenario.arena = scenario::Arena::with_cell(12.0, 36.0, 0.1);
  SweepSpec s;
  s.name = "mine";
  s.axis = SweepAxis::kFovSubset;
  s.values = {"0+1", "all"};
  s.repetitions = 2;
  c.sweeps.push_back(s);
  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.sweeps == c.sweeps);
  CHECK(back.scenario == c.scenario);
  CHECK(back.channel == c.channel);
  CHECK(back.proxies.streaming_threshold == 12.5);
}

TEST_CASE("save and load reproduce the file") {
  const auto dir = fs::temp_directory_path() / "cpsim_config_test";
  fs::create_directories(dir);
  RunConfig c;
  c.age.capacity_kbps = 250.0;
  save_config(c, dir / "a.json");
  save_config(load_config(dir / "a.json"), dir / "b.json");
  std::ifstream a(dir / "a.json"), b(dir / "b.json");
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(load_config(dir / "a.json").age.capacity_kbps == 250.0);
  try {
    load_config(dir / "missing.json");
    FAIL("missing file loaded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
  fs::remove_all(dir);
}

TEST_CASE("validation errors carry a field path") {
  auto e = error_of(R"({"channel": {"bandwidth_hz": -1}})");
  CHECK(e.code() == ErrorCode::kValidation);
  CHECK(e.field() == "channel.bandwidth_hz");
  e = error_of(R"({"scenario": {"arena": {"width_m": 12, "bogus": 1}}})");
  CHECK(e.field() == "scenario.arena.bogus");
  e = error_of(R"({"schema_version": 2})");
  CHECK(e.field() == "schema_version");
  e = error_of(R"({"calibration": {"top_n": 0}})");
  CHECK(e.field() == "calibration.top_n");
  e = error_of(R"({"sweeps": [{"name": "x", "axis": "capacity", "values": []}]})");
  CHECK(e.code() == ErrorCode::kValidation);
  e = error_of(R"({"sweeps": [{"name": "x", "axis": "warp", "values": ["1"]}]})");
  CHECK(e.code() == ErrorCode::kValidation);
  e = error_of(R"({"master_seed": "seven"})");
  CHECK(e.field() == "master_seed");
  e = error_of("{\"workers\": 1,");
  CHECK(e.code() == ErrorCode::kParse);
}

TEST_CASE("derived trial settings") {
  RunConfig c;
  c.fusion.temporal_rate_gain = 2.0;
  CHECK(effective_streaming_proxy(c).rate_scale_bits == doctest::Approx(c.proxies.streaming.rate_scale_bits / 2));
  CHECK(age_trial(c).capacity_bps == doctest::Approx(100.0 * 8192));
  CHECK(calibration_trial(c).options.budget_bits == doctest::Approx(30.0 * 8192));
  CHECK(fusion_trial(c).rate_bits == doctest::Approx(18.69 * 8192));
  CHECK(realized_link(c, 5).channel_gain == realized_link(c, 5).channel_gain);
  CHECK(realized_link(c, 5).channel_gain != realized_link(c, 6).channel_gain);
}
