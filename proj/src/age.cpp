#include "cpsim/age.hpp"

#include <cmath>
#include <ostream>

#include "cpsim/error.hpp"
#include "cpsim/textio.hpp"

namespace cpsim::age {

void AgentAgeInputs::validate() const {
  require(std::isfinite(sampling_interval_s) && sampling_interval_s > 0.0, ErrorCode::kDomain,
          "sampling_interval_s", "must be > 0");
  require(std::isfinite(total_delay_s) && total_delay_s >= 0.0, ErrorCode::kDomain,
          "total_delay_s", "must be >= 0");
  require(target_count >= 0, ErrorCode::kDomain, "target_count", "must be >= 0");
}

double aoi(const AgentAgeInputs& agent) {
  agent.validate();
  return agent.sampling_interval_s / 2.0 + agent.total_delay_s;
}

double agent_term(const AgentAgeInputs& agent, double eps_g) {
  if (agent.target_count < eps_g) return 0.0;
  return agent.target_count * aoi(agent);
}

StreamingAopt aopt_streaming(std::span<const AgentAgeInputs> agents, double eps_g) {
  require(!agents.empty(), ErrorCode::kDomain, "agents", "must be non-empty");
  StreamingAopt out;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    agents[k].validate();
    if (agents[k].target_count < eps_g) continue;
    const double term = agent_term(agents[k], eps_g);
    if (!out.bottleneck || term > out.value) {
      out.value = term;
      out.bottleneck = k;
    }
  }
  return out;
}

double aoi_calibration(double total_delay_s, double calibration_interval_s) {
  require(total_delay_s >= 0.0, ErrorCode::kDomain, "total_delay_s", "must be >= 0");
  require(calibration_interval_s >= 0.0, ErrorCode::kDomain, "calibration_interval_s",
          "must be >= 0");
  return (calibration_interval_s + 3.0 * total_delay_s) / 2.0;
}

double aopt_calibration(std::span<const AgentAgeInputs> agents, double eps_g,
                        double calibration_interval_s) {
  const auto st = aopt_streaming(agents, eps_g);
  if (st.idle()) return 0.0;
  const auto& a = agents[*st.bottleneck];
  return a.target_count * aoi_calibration(a.total_delay_s, calibration_interval_s);
}

void CycleConfig::validate() const {
  require(calibration_prob >= 0.0 && calibration_prob <= 1.0, ErrorCode::kDomain,
          "calibration_prob", "must lie in [0, 1]");
  require(calibration_interval_s >= 0.0, ErrorCode::kDomain, "calibration_interval_s",
          "must be >= 0");
}

AoptReport aopt_cycle(std::span<const AgentAgeInputs> agents, const CycleConfig& cfg) {
  cfg.validate();
  AoptReport r;
  const auto st = aopt_streaming(agents, cfg.count_threshold);
  if (st.idle()) return r;
  const auto& a = agents[*st.bottleneck];
  const double p1 = cfg.calibration_prob;
  const double g = a.target_count;
  r.bottleneck = st.bottleneck;
  r.g_khat = a.target_count;
  r.aopt_streaming = st.value;
  r.aopt_calibration = g * aoi_calibration(a.total_delay_s, cfg.calibration_interval_s);
  r.aopt_cycle = p1 * r.aopt_calibration + (1.0 - p1) * r.aopt_streaming;
  r.calibration_rate_term = g * (p1 / 2.0) * cfg.calibration_interval_s;
  r.transmission_term =
      g * ((p1 / 2.0 + 1.0) * a.total_delay_s + (1.0 - p1) / 2.0 * a.sampling_interval_s);
  return r;
}

PhaseOccupancy phase_occupancies(const scenario::ArrivalModel& model, double calibration_prob) {
  require(calibration_prob >= 0.0 && calibration_prob <= 1.0, ErrorCode::kDomain,
          "calibration_prob", "must lie in [0, 1]");
  const double empty = std::exp(-scenario::offered_load(model));
  PhaseOccupancy o;
  o.calibration = calibration_prob;
  o.idle = (1.0 - calibration_prob) * empty;
  // Written as the remainder so the three sum to one in floating point.
  o.streaming = 1.0 - o.calibration - o.idle;
  return o;
}

double average_comm_cost(const PhaseOccupancy& o, const PhaseCosts& c) {
  return o.idle * c.idle_bits + o.calibration * c.calibration_bits +
         o.streaming * c.streaming_bits;
}

void write_report_header(std::ostream& out) { out << "t,aopt_st,aopt_ca,aopt_cy,k_hat,g_khat\n"; }

void write_report_row(std::ostream& out, double t, const AoptReport& r) {
  out << number(t) << ',' << number(r.aopt_streaming) << ',' << number(r.aopt_calibration) << ','
      << number(r.aopt_cycle) << ',';
  if (r.bottleneck) out << *r.bottleneck;
  out << ',' << r.g_khat << '\n';
}

}  // namespace cpsim::age
