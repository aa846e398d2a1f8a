#include <doctest.h>

#include <set>
#include <sstream>

#include "cpsim/error.hpp"
#include "cpsim/sweep.hpp"

using namespace cpsim;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.scenario.arena = scenario::Arena::with_cell(12.0, 36.0, 0.1);
  c.scenario.duration_s = 30.0;
  c.fusion.frames = 2;
  c.calibration.epochs = 1;
  return c;
}

std::string text(const CsvTable& t) {
  std::ostringstream out;
  t.write(out);
  return out.str();
}

}  // namespace

TEST_CASE("every preset resolves with one axis each") {
  const auto names = sweep::preset_names();
  CHECK(names.size() == 10);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  for (const auto& n : names) {
    const auto s = sweep::preset(n);
    CHECK(s.name == n);
    CHECK_NOTHROW(s.validate());
    CHECK_FALSE(sweep::metric_columns(s).empty());
  }
  CHECK_THROWS_AS(sweep::preset("nope"), Error);
  CHECK(sweep::resolve(RunConfig{}).size() == names.size());
}

TEST_CASE("one point, one repetition") {
  auto s = sweep::preset("capacity");
  s.values = {"100"};
  s.repetitions = 1;
  const auto t = sweep::run_sweep(small_config(), s);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.header[0] == "axis_value");
  CHECK(t.header[1] == "repetition");
  CHECK(t.header[2] == "status");
  CHECK(t.rows[0][2] == "ok");
}

TEST_CASE("failed points become rows") {
  auto s = sweep::preset("visible_counts");
  s.values = {"9", "0"};
  s.repetitions = 1;
  const auto t = sweep::run_sweep(small_config(), s);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][2] == "validation");
  CHECK(t.rows[0][3].empty());
  CHECK(t.rows[1][2] == "ok");
  const auto sum = sweep::summarize(t);
  CHECK(sum.rows[0][sum.column("n_failed")] == "1");
  CHECK(sum.rows[1][sum.column("n_ok")] == "1");
}

TEST_CASE("cameras that cannot calibrate are counted, not fatal") {
  auto s = sweep::preset("calibration_budget");
  s.values = {"0.5"};
  s.repetitions = 1;
  const auto t = sweep::run_sweep(small_config(), s);
  CHECK(t.rows[0][2] == "ok");
  CHECK(t.rows[0][t.column("failed_cameras")] == "7");
  CHECK(t.rows[0][t.column("rotation_error_deg")].empty());
}

TEST_CASE("capacity sweep lowers AoPT") {
  const auto t = sweep::run_sweep(small_config(), sweep::preset("capacity"));
  const auto col = t.column("aopt_cycle");
  const auto reps = sweep::preset("capacity").repetitions;
  for (int r = 0; r < reps; ++r) {
    double prev = INFINITY;
    for (std::size_t v = 0; v < 5; ++v) {
      const double a = std::stod(t.rows[v * reps + r][col]);
      CHECK(a < prev);
      prev = a;
    }
  }
}

TEST_CASE("output is independent of worker count and repeatable") {
  auto c = small_config();
  auto s = sweep::preset("loss_rate");
  s.repetitions = 2;
  s.values = {"0", "0.3"};
  const auto one = text(sweep::run_sweep(c, s));
  c.workers = 3;
  CHECK(text(sweep::run_sweep(c, s)) == one);
  CHECK(text(sweep::run_sweep(c, s)) == one);
}

TEST_CASE("summary and rendering") {
  CsvTable t;
  t.header = {"axis_value", "repetition", "status", "tx_delay_ms", "inference_delay_ms", "total_delay_ms"};
  t.rows = {{"10", "0", "ok", "1", "73", "74"}, {"10", "1", "ok", "3", "73", "76"}};
  const auto s = sweep::summarize(t);
  CHECK(s.header == std::vector<std::string>{"axis_value", "n_ok", "n_failed", "tx_delay_ms_mean", "tx_delay_ms_sd",
                                             "inference_delay_ms_mean", "inference_delay_ms_sd",
                                             "total_delay_ms_mean", "total_delay_ms_sd"});
  CHECK(s.rows[0][3] == "2");
  CHECK(std::stod(s.rows[0][4]) == doctest::Approx(std::sqrt(2.0)));
  const auto r = sweep::render("latency", s);
  CHECK(r.find("Transmission (ms)") != std::string::npos);
  CHECK(r.find("2.00 ± 1.41") != std::string::npos);
}
