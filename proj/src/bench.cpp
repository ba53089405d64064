#include "rtmpc/bench.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "rtmpc/controller.hpp"
#include "rtmpc/errors.hpp"
#include "rtmpc/problem.hpp"
#include "rtmpc/sim.hpp"

namespace rtmpc {

namespace {

VectorXd default_x0(const VectorXd& x0) {
  if (x0.size() > 0) return x0;
  return (VectorXd(2) << -7.0, -2.0).finished();
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - i;
  return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v.back();
}

std::vector<double> time_controller(TubeController& ctrl, const TubeProblem& prob,
                                    const VectorXd& x0, const HorizonSweepOptions& opts) {
  std::vector<double> times;
  DisturbanceSampler dist(prob.model.W, DisturbanceMode::Uniform, opts.seed);
  int taken = 0;
  while (static_cast<int>(times.size()) < opts.reps) {
    ctrl.reset();
    VectorXd x = x0;
    for (int t = 0; t < opts.episode && static_cast<int>(times.size()) < opts.reps; ++t) {
      const ControlStep s = ctrl.step(x);
      if (taken++ >= opts.warmup) times.push_back(s.solve_us);
      x = prob.model.A * x + prob.model.B * s.u + dist.next();
    }
  }
  return times;
}

}  // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error(ErrorCode::InvalidArgument, "loglog_slope: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

HorizonSweep sweep_horizon(const PlantModel& model, const TubeSynthesis& syn,
                           const HorizonSweepOptions& opts) {
  HorizonSweep out;
  out.m_bar = opts.m_bar;
  out.workers = opts.workers;
  out.explicit_mode = opts.maps != nullptr;
  const VectorXd x0 = default_x0(opts.x0);
  std::vector<double> Ns, ta, tc;
  for (int N : opts.N_list) {
    const TubeProblem prob = build_problem(model, syn, N);
    RtiConfig cfg;
    cfg.m_bar = opts.m_bar;
    cfg.gamma = opts.gamma;
    cfg.workers = opts.workers;
    AladinController aladin(prob, cfg, opts.maps);
    CentralizedController central(prob);
    const std::vector<double> a = time_controller(aladin, prob, x0, opts);
    const std::vector<double> c = time_controller(central, prob, x0, opts);
    out.rows.push_back({N, "aladin", quantile(a, 0.5), quantile(a, 0.95), static_cast<int>(a.size())});
    out.rows.push_back({N, "centralized", quantile(c, 0.5), quantile(c, 0.95), static_cast<int>(c.size())});
    Ns.push_back(N);
    ta.push_back(out.rows[out.rows.size() - 2].median_us);
    tc.push_back(out.rows.back().median_us);
  }
  if (Ns.size() >= 2) {
    out.slope_aladin = loglog_slope(Ns, ta);
    out.slope_centralized = loglog_slope(Ns, tc);
  }
  return out;
}

std::vector<DegradationRow> sweep_mbar(const PlantModel& model, const TubeSynthesis& syn,
                                       const MbarSweepOptions& opts) {
  const TubeProblem prob = build_problem(model, syn, opts.N);
  const VectorXd x0 = default_x0(opts.x0);
  std::vector<DegradationRow> rows;
  for (DisturbanceMode mode : {DisturbanceMode::Zero, DisturbanceMode::Uniform}) {
    const int seeds = mode == DisturbanceMode::Zero ? 1 : opts.seeds;
    std::vector<double> central_cost(seeds);
    for (int s = 0; s < seeds; ++s) {
      CentralizedController central(prob);
      const SimTrace tr = run_closed_loop(central, prob, x0, opts.steps, mode, opts.seed + s);
      if (!tr.ok()) throw Error(ErrorCode::Infeasible, "sweep_mbar: centralized run infeasible: " + tr.failure);
      central_cost[s] = closed_loop_cost(tr);
    }
    for (int m : opts.m_list) {
      RtiConfig cfg;
      cfg.m_bar = m;
      cfg.gamma = opts.gamma;
      DegradationRow row;
      row.m_bar = m;
      row.noise = to_string(mode);
      row.seeds = seeds;
      row.max = -INFINITY;
      for (int s = 0; s < seeds; ++s) {
        AladinController ctrl(prob, cfg);
        const SimTrace tr = run_closed_loop(ctrl, prob, x0, opts.steps, mode, opts.seed + s);
        if (!tr.ok()) throw Error(ErrorCode::Infeasible, "sweep_mbar: ALADIN run infeasible: " + tr.failure);
        const double d = closed_loop_cost(tr) / central_cost[s] - 1.0;
        row.mean += d / seeds;
        row.max = std::max(row.max, d);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows) {
  os << "N,algo,median_us,p95_us\n";
  for (const auto& r : rows) os << r.N << ',' << r.algo << ',' << r.median_us << ',' << r.p95_us << '\n';
}

void write_slopes_json(std::ostream& os, const HorizonSweep& sweep) {
  nlohmann::json j;
  j["slopes"] = {{"aladin", sweep.slope_aladin}, {"centralized", sweep.slope_centralized}};
  j["m_bar"] = sweep.m_bar;
  j["workers"] = sweep.workers;
  j["stage_solver"] = sweep.explicit_mode ? "explicit" : "online";
  std::vector<int> Ns;
  for (const auto& r : sweep.rows) {
    if (r.algo == "aladin") Ns.push_back(r.N);
  }
  j["N"] = Ns;
  os << j.dump(2) << '\n';
}

void write_degradation_csv(std::ostream& os, const std::vector<DegradationRow>& rows) {
  os << "mbar,noise,mean_degradation,max_degradation,seeds\n";
  os.precision(10);
  for (const auto& r : rows) {
    os << r.m_bar << ',' << r.noise << ',' << r.mean << ',' << r.max << ',' << r.seeds << '\n';
  }
}

}  // namespace rtmpc
