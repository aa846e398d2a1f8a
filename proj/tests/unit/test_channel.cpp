#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cpsim/channel.hpp"
#include "cpsim/config.hpp"
#include "cpsim/error.hpp"

using namespace cpsim;
using namespace cpsim::channel;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("snr and capacity follow the link budget") {
  LinkParams l;
  l.bandwidth_hz = 1e6;
  l.tx_power_w = 0.2;
  l.noise_psd_w_per_hz = 1e-20;
  l.channel_gain = 1e-12;
  CHECK(snr(l) == doctest::Approx(0.2 * 1e-12 / (1e-20 * 1e6)).epsilon(1e-14));
  CHECK(capacity(l) == doctest::Approx(1e6 * std::log2(1.0 + 20.0)).epsilon(1e-14));
  CHECK(transmission_delay(8192.0, l) == doctest::Approx(8192.0 / capacity(l)).epsilon(1e-14));
  CHECK(total_delay(8192.0, l) == doctest::Approx(8192.0 / capacity(l) + l.inference_delay_s));
}

TEST_CASE("dead link") {
  LinkParams l;
  l.channel_gain = 0.0;
  CHECK(capacity(l) == 0.0);
  CHECK(transmission_delay(0.0, l) == 0.0);
  CHECK(code_of([&] { transmission_delay(1.0, l); }) == ErrorCode::kUnreachableLink);
}

TEST_CASE("parameter validation names the field") {
  LinkParams l;
  l.bandwidth_hz = -1.0;
  try {
    l.validate();
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDomain);
    CHECK(e.field() == "bandwidth_hz");
  }
  PathLossConfig p;
  p.path_loss_exponent = 1.5;
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::kValidation);
}

TEST_CASE("log-distance median gain") {
  PathLossConfig p;
  const double lambda = 299792458.0 / p.carrier_freq_hz;
  const double g0 = std::pow(lambda / (4.0 * std::numbers::pi * p.reference_distance_m), 2.0);
  CHECK(reference_gain(p) == doctest::Approx(g0).epsilon(1e-14));
  for (double d : {1.0, 10.0, 50.0, 200.0}) {
    CHECK(median_gain_at(d, p) == doctest::Approx(g0 * std::pow(d, -p.path_loss_exponent)).epsilon(1e-12));
  }
  // Frozen: default link at 50 m.
  RunConfig cfg;
  const auto l = median_link(cfg);
  CHECK(l.channel_gain == doctest::Approx(1.1179031482331907e-10).epsilon(1e-12));
  CHECK(snr(l) == doctest::Approx(1397.3789352914885).epsilon(1e-12));
  CHECK(capacity(l) == doctest::Approx(20899079.285011087).epsilon(1e-12));
}

TEST_CASE("shadowing draws are log-normal around the median") {
  PathLossConfig p;
  Rng rng(5);
  const double med = median_gain_at(30.0, p);
  const int n = 20000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double db = 10.0 * std::log10(channel_gain_at(30.0, p, rng).gain / med);
    s += db;
    s2 += db * db;
  }
  const double mean = s / n;
  const double sd = std::sqrt(s2 / n - mean * mean);
  CHECK(std::abs(mean) < 4.0 * p.shadowing_sigma_db / std::sqrt(n));
  CHECK(sd == doctest::Approx(p.shadowing_sigma_db).epsilon(0.03));
}

TEST_CASE("zero sigma still consumes one normal") {
  PathLossConfig p;
  p.shadowing_sigma_db = 0.0;
  Rng a(9), b(9);
  const auto g = channel_gain_at(25.0, p, a);
  CHECK(g.gain == doctest::Approx(median_gain_at(25.0, p)).epsilon(1e-14));
  b.normal();
  CHECK(a.next() == b.next());
}

TEST_CASE("distances below the reference are clamped") {
  PathLossConfig p;
  p.shadowing_sigma_db = 0.0;
  Rng rng(1);
  const auto g = channel_gain_at(0.2, p, rng);
  CHECK(g.clamped);
  CHECK(g.gain == doctest::Approx(reference_gain(p)));
}

TEST_CASE("interference raises the noise floor") {
  PathLossConfig p;
  CHECK(interference_psd(p) == 0.0);
  p.interferer_density_per_100m2 = 2.0;
  const double want = 2.0 * p.interferer_power_w * median_gain_at(p.interferer_mean_distance_m, p) /
                      p.interference_band_hz;
  CHECK(interference_psd(p) == doctest::Approx(want).epsilon(1e-14));
  LinkParams l;
  const auto li = with_interference(l, p);
  CHECK(li.noise_psd_w_per_hz == doctest::Approx(l.noise_psd_w_per_hz + want));
  CHECK(capacity(li) < capacity(l));
}

TEST_CASE("packet losses") {
  CHECK(realize_losses(100, {0.0, 3}) == std::vector<bool>(100, false));
  CHECK(realize_losses(100, {1.0, 3}) == std::vector<bool>(100, true));
  const auto a = realize_losses(50000, {0.3, 11});
  CHECK(a == realize_losses(50000, {0.3, 11}));
  const double rate = std::count(a.begin(), a.end(), true) / 50000.0;
  CHECK(rate == doctest::Approx(0.3).epsilon(0.03));
  CHECK(code_of([] { realize_losses(1, {1.5, 0}); }) == ErrorCode::kDomain);
}
