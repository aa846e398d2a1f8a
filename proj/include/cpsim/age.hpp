#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cpsim/scenario.hpp"

// Age of information and age of perceived targets (AoPT) for a camera fleet.
namespace cpsim::age {

struct AgentAgeInputs {
  double sampling_interval_s = 1.0;  // Delta_k
  double total_delay_s = 0.0;        // transmission plus inference
  int target_count = 0;              // g_k

  void validate() const;
};

// Time-averaged age under periodic sampling with a fixed delay.
double aoi(const AgentAgeInputs& agent);

// Per-agent term g_k (Delta_k / 2 + d_k), zero when g_k < eps_g.
double agent_term(const AgentAgeInputs& agent, double eps_g);

struct StreamingAopt {
  double value = 0.0;
  std::optional<std::size_t> bottleneck;  // k-hat; empty when every agent is filtered
  bool idle() const { return !bottleneck.has_value(); }
};

// Worst agent term over the fleet. Exact ties go to the lowest index.
StreamingAopt aopt_streaming(std::span<const AgentAgeInputs> agents, double eps_g = 1.0);

// (Delta_T + 3 d) / 2.
double aoi_calibration(double total_delay_s, double calibration_interval_s);

// g_khat (3 d_khat + Delta_T) / 2, zero when every agent is filtered.
double aopt_calibration(std::span<const AgentAgeInputs> agents, double eps_g,
                        double calibration_interval_s);

struct PhaseCosts {
  double idle_bits = 0.0;         // C_0
  double calibration_bits = 0.0;  // C_1
  double streaming_bits = 0.0;    // C_2
};

struct CycleConfig {
  double calibration_prob = 0.1;  // p_1
  double calibration_interval_s = 1.0;
  double count_threshold = 1.0;  // eps_g
  PhaseCosts phase_costs;

  void validate() const;
};

struct AoptReport {
  double aopt_streaming = 0.0;
  double aopt_calibration = 0.0;
  double aopt_cycle = 0.0;
  std::optional<std::size_t> bottleneck;
  int g_khat = 0;
  // Regrouped cycle terms; they sum to aopt_cycle up to rounding.
  double calibration_rate_term = 0.0;  // g p_1 / 2 Delta_T
  double transmission_term = 0.0;      // g ((p_1/2 + 1) d + (1 - p_1)/2 Delta)
  bool idle() const { return !bottleneck.has_value(); }
};

AoptReport aopt_cycle(std::span<const AgentAgeInputs> agents, const CycleConfig& cfg);

struct PhaseOccupancy {
  double idle = 0.0;         // pi_0
  double calibration = 0.0;  // pi_1
  double streaming = 0.0;    // pi_2
};

PhaseOccupancy phase_occupancies(const scenario::ArrivalModel& model, double calibration_prob);

double average_comm_cost(const PhaseOccupancy& occupancy, const PhaseCosts& costs);

// CSV rows: t, aopt_st, aopt_ca, aopt_cy, k_hat, g_khat. An idle report
// writes an empty k_hat cell.
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, double t, const AoptReport& report);

}  // namespace cpsim::age
