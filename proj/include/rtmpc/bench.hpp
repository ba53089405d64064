#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtmpc/aladin.hpp"
#include "rtmpc/explicit_stage.hpp"
#include "rtmpc/synthesis.hpp"

namespace rtmpc {

struct TimingRow {
  int N = 0;
  std::string algo;  ///< "aladin" or "centralized"
  double median_us = 0.0;
  double p95_us = 0.0;
  int samples = 0;
};

struct HorizonSweep {
  std::vector<TimingRow> rows;
  double slope_aladin = 0.0;
  double slope_centralized = 0.0;
  int m_bar = 0;
  int workers = 1;
  bool explicit_mode = false;
};

struct HorizonSweepOptions {
  std::vector<int> N_list{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  int reps = 200;         ///< timed samples per (N, algo)
  int warmup = 20;        ///< discarded samples
  int episode = 25;       ///< closed-loop steps before restarting from x0
  int m_bar = 5;
  double gamma = 1.0;
  int workers = 1;
  std::uint64_t seed = 1;
  VectorXd x0;            ///< defaults to (-7, -2) when empty
  /// Explicit stage maps for ALADIN (online stage QPs when null).
  std::shared_ptr<const ExplicitStageMaps> maps;
};

/// Per-sample wall time of one full rti_step and of one warm-started condensed
/// solve along seeded closed-loop episodes under uniform noise.
HorizonSweep sweep_horizon(const PlantModel& model, const TubeSynthesis& syn,
                           const HorizonSweepOptions& opts);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct DegradationRow {
  int m_bar = 0;
  std::string noise;  ///< "zero" or "uniform"
  double mean = 0.0;  ///< mean over seeds of cost_aladin / cost_central - 1
  double max = 0.0;
  int seeds = 0;
};

struct MbarSweepOptions {
  std::vector<int> m_list{1, 2, 3, 5, 10, 20, 50, 100, 200};
  int seeds = 20;
  int steps = 50;
  int N = 20;
  double gamma = 1.0;
  std::uint64_t seed = 1;
  VectorXd x0;
};

/// Closed-loop cost degradation of ALADIN against the centralized
/// controller on the same disturbance realizations.
std::vector<DegradationRow> sweep_mbar(const PlantModel& model, const TubeSynthesis& syn,
                                       const MbarSweepOptions& opts);

void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows);
void write_slopes_json(std::ostream& os, const HorizonSweep& sweep);
void write_degradation_csv(std::ostream& os, const std::vector<DegradationRow>& rows);

}  // namespace rtmpc
