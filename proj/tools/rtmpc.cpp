// rtmpc: synthesize, simulate, benchmark and compare rigid tube MPC controllers.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rtmpc/aladin.hpp"
#include "rtmpc/bench.hpp"
#include "rtmpc/controller.hpp"
#include "rtmpc/errors.hpp"
#include "rtmpc/io.hpp"
#include "rtmpc/problem.hpp"
#include "rtmpc/sim.hpp"
#include "rtmpc/synthesis.hpp"

using namespace rtmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitValidation = 3;
constexpr int kExitInfeasible = 4;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
      return kExitConfig;
    case ErrorCode::EmptyTightening:
    case ErrorCode::EmptyStageSet:
    case ErrorCode::NoConvergence:
    case ErrorCode::NoFiniteDetermination:
      return kExitValidation;
    case ErrorCode::Infeasible:
    case ErrorCode::StageInfeasible:
      return kExitInfeasible;
    default:
      return kExitCheckFailed;
  }
}

VectorXd parse_x0(const std::vector<double>& v, int nx) {
  if (v.empty()) {
    if (nx != 2) throw Error(ErrorCode::Config, "--x0 is required for models with nx != 2");
    return (VectorXd(2) << -7.0, -2.0).finished();
  }
  if (static_cast<int>(v.size()) != nx) throw Error(ErrorCode::Config, "--x0 needs " + std::to_string(nx) + " values");
  return Eigen::Map<const VectorXd>(v.data(), nx);
}

// Rescale constant for horizon N: the bundle's value when N matches.
double gamma_for(const Bundle& b, const TubeProblem& prob) {
  if (prob.N == b.config.N) return b.gamma;
  std::cerr << "note: recalibrating gamma for N = " << prob.N << "\n";
  CentralizedSolver central(prob);
  return calibrate_gamma(central, b.config.gamma_safety);
}

std::shared_ptr<const ExplicitStageMaps> maps_for(const TubeProblem& prob, const RtiConfig& cfg,
                                                  const VectorXd& x0, std::uint64_t seed) {
  CentralizedSolver central(prob);
  std::vector<VectorXd> starts{x0};
  for (const auto& s : sample_feasible_states(central, 8, seed, 0.9)) starts.push_back(s);
  auto maps = build_calibrated_maps(prob, cfg, starts, 50, seed);
  std::cerr << "explicit maps: " << maps->first.regions.size() << " first / " << maps->middle.regions.size()
            << " middle / " << maps->terminal.regions.size() << " terminal regions, middle map "
            << serialized_size(maps->middle) << " bytes\n";
  return maps;
}

struct SynthOpts {
  std::string config;
  std::string out = "bundle.json";
};

int cmd_synthesize(const SynthOpts& o) {
  const Config cfg = o.config.empty() ? default_config() : load_config(o.config);
  SynthesisOptions so;
  so.eps_rpi = cfg.eps_rpi;
  Bundle b;
  b.config = cfg;
  b.syn = synthesize(cfg.model, cfg.weights, so);
  b.report = validate_assumptions(b.syn, cfg.model);
  if (b.report.all_pass()) {
    const TubeProblem prob = build_problem(cfg.model, b.syn, cfg.N);
    CentralizedSolver central(prob);
    b.gamma = calibrate_gamma(central, cfg.gamma_safety);
  }
  save_bundle(o.out, b);
  std::printf("K = [");
  for (int j = 0; j < b.syn.K.cols(); ++j) std::printf("%s%.6f", j ? ", " : "", b.syn.K(0, j));
  std::printf("]  alpha = %.3e  s = %d  X_T rows = %d  gamma = %.4f\n", b.syn.alpha, b.syn.s,
              b.syn.X_T.num_rows(), b.gamma);
  for (const auto& item : b.report.items) {
    std::printf("  %-28s %s  margin %.3e\n", item.name.c_str(), item.pass ? "pass" : "FAIL", item.margin);
  }
  std::printf("wrote %s\n", o.out.c_str());
  return b.report.all_pass() ? kExitOk : kExitValidation;
}

struct RunOpts {
  std::string bundle = "bundle.json";
  std::string controller = "aladin";
  int mbar = -1;
  int N = -1;
  int steps = 50;
  std::uint64_t seed = 1;
  std::string noise = "uniform";
  bool explicit_mode = false;
  std::vector<double> x0;
  std::string out = "trace";
};

int cmd_run(const RunOpts& o, int workers) {
  const Bundle b = load_bundle(o.bundle);
  const int N = o.N > 0 ? o.N : b.config.N;
  const TubeProblem prob = build_problem(b.config.model, b.syn, N);
  const VectorXd x0 = parse_x0(o.x0, prob.nx());
  const DisturbanceMode mode = parse_disturbance_mode(o.noise);
  std::unique_ptr<TubeController> ctrl;
  std::vector<IterationDiag> diag;
  if (o.controller == "centralized") {
    ctrl = std::make_unique<CentralizedController>(prob);
  } else if (o.controller == "aladin") {
    RtiConfig cfg;
    cfg.m_bar = o.mbar > 0 ? o.mbar : b.config.mbar;
    cfg.gamma = gamma_for(b, prob);
    cfg.workers = workers;
    auto maps = o.explicit_mode ? maps_for(prob, cfg, x0, o.seed) : nullptr;
    auto a = std::make_unique<AladinController>(prob, cfg, maps);
    a->set_diagnostics(&diag);
    ctrl = std::move(a);
  } else {
    throw Error(ErrorCode::Config, "--controller must be aladin or centralized");
  }
  const SimTrace tr = run_closed_loop(*ctrl, prob, x0, o.steps, mode, o.seed);
  {
    std::ofstream f(o.out + ".csv");
    write_trace_csv(f, tr);
  }
  if (prob.nx() == 2) write_text_file(o.out + "_tube.json", tube_json(tr, b.syn).dump(1) + "\n");
  if (!diag.empty()) {
    std::ofstream f(o.out + "_diag.csv");
    write_diagnostics_header(f);
    write_diagnostics_csv(f, diag);
  }
  const TraceAudit audit = audit_trace(tr, prob);
  std::printf("%s: %d steps, cost %.6f, x/u/tube violations %d/%d/%d", ctrl->name().c_str(), tr.steps(),
              closed_loop_cost(tr), audit.x_violations, audit.u_violations, audit.tube_violations);
  if (o.controller == "centralized") std::printf(", descent violations %d", audit.descent_violations);
  std::printf("\n");
  if (!tr.ok()) {
    std::fprintf(stderr, "infeasible at step %d: %s\n", tr.infeasible_step, tr.failure.c_str());
    return kExitInfeasible;
  }
  return kExitOk;
}

struct BenchOpts {
  std::string bundle = "bundle.json";
  std::vector<int> Ns{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  int reps = 200;
  int mbar = -1;
  bool explicit_mode = false;
  bool skip_mbar = false;
  std::vector<int> m_list{1, 2, 3, 5, 10, 20, 50, 100, 200};
  int seeds = 20;
  std::string out = "bench";
};

int cmd_bench(const BenchOpts& o, int workers) {
  const Bundle b = load_bundle(o.bundle);
  HorizonSweepOptions ho;
  ho.N_list = o.Ns;
  ho.reps = o.reps;
  ho.m_bar = o.mbar > 0 ? o.mbar : b.config.mbar;
  ho.workers = workers;
  ho.gamma = b.gamma;
  if (o.explicit_mode) {
    const TubeProblem prob = build_problem(b.config.model, b.syn, b.config.N);
    RtiConfig cfg;
    cfg.m_bar = ho.m_bar;
    cfg.gamma = b.gamma;
    ho.maps = maps_for(prob, cfg, parse_x0({}, prob.nx()), 1);
  }
  const HorizonSweep hs = sweep_horizon(b.config.model, b.syn, ho);
  {
    std::ofstream f(o.out + "_timing.csv");
    write_timing_csv(f, hs.rows);
  }
  {
    std::ofstream f(o.out + "_slopes.json");
    write_slopes_json(f, hs);
  }
  write_timing_csv(std::cout, hs.rows);
  std::printf("slope aladin %.3f  centralized %.3f  (workers %d)\n", hs.slope_aladin, hs.slope_centralized,
              workers);
  if (!o.skip_mbar) {
    MbarSweepOptions mo;
    mo.m_list = o.m_list;
    mo.seeds = o.seeds;
    mo.N = b.config.N;
    mo.gamma = b.gamma;
    const auto rows = sweep_mbar(b.config.model, b.syn, mo);
    std::ofstream f(o.out + "_mbar.csv");
    write_degradation_csv(f, rows);
    write_degradation_csv(std::cout, rows);
  }
  return kExitOk;
}

struct CompareOpts {
  std::string bundle = "bundle.json";
  int mbar = 200;
  int states = 100;
  std::uint64_t seed = 1;
  bool explicit_mode = false;
  double tol = 1e-5;
  std::string out = "compare.csv";
};

int cmd_compare(const CompareOpts& o, int workers) {
  const Bundle b = load_bundle(o.bundle);
  const TubeProblem prob = build_problem(b.config.model, b.syn, b.config.N);
  CentralizedSolver central(prob);
  const auto states = sample_feasible_states(central, o.states, o.seed);
  RtiConfig cfg;
  cfg.m_bar = o.mbar;
  cfg.gamma = b.gamma;
  cfg.workers = workers;
  std::shared_ptr<const ExplicitStageMaps> maps;
  if (o.explicit_mode) maps = maps_for(prob, cfg, parse_x0({}, prob.nx()), o.seed);
  std::ofstream f(o.out);
  f << "state,u_aladin,u_centralized,deviation,mode_deviation\n";
  f.precision(17);
  double worst = 0.0, mean = 0.0, worst_mode = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const VectorXd& x = states[i];
    const auto sol = central.solve(x, nullptr, false);
    const VectorXd uc = tube_feedback(x, sol->y[0].head(prob.nx()), sol->y[0].tail(prob.nu()), b.syn.K);
    AladinController online(prob, cfg);
    const VectorXd ua = online.step(x).u;
    double mode_dev = 0.0;
    if (maps) {
      AladinController expl(prob, cfg, maps);
      mode_dev = (expl.step(x).u - ua).cwiseAbs().maxCoeff();
      worst_mode = std::max(worst_mode, mode_dev);
    }
    const double dev = (ua - uc).cwiseAbs().maxCoeff();
    worst = std::max(worst, dev);
    mean += dev / states.size();
    f << i << ',' << ua(0) << ',' << uc(0) << ',' << dev << ',' << mode_dev << '\n';
  }
  std::printf("compare: %zu states, m_bar %d, input deviation max %.3e mean %.3e (tol %.1e)\n", states.size(),
              o.mbar, worst, mean, o.tol);
  if (maps) std::printf("explicit vs online: max deviation %.3e\n", worst_mode);
  const bool ok = worst <= o.tol && (!maps || worst_mode <= 1e-8);
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigid tube MPC with a parallel real-time iteration"};
  app.set_version_flag("--version", std::string(kBundleSchema));
  int workers = 1;
  app.add_option("--workers", workers, "Worker threads for the stage solves")->check(CLI::PositiveNumber);
  app.require_subcommand(1);

  SynthOpts so;
  auto* syn = app.add_subcommand("synthesize", "Synthesize K, P, Z, X_T and write a bundle");
  syn->add_option("--config", so.config, "Config JSON (defaults to the case study)");
  syn->add_option("-o,--out", so.out, "Bundle output path");

  RunOpts ro;
  auto* run = app.add_subcommand("run", "Closed-loop simulation");
  run->add_option("--bundle", ro.bundle);
  run->add_option("--controller", ro.controller)->check(CLI::IsMember({"aladin", "centralized"}));
  run->add_option("--mbar", ro.mbar, "Inner iterations per sample");
  run->add_option("--N", ro.N, "Horizon (defaults to the bundle's)");
  run->add_option("--steps", ro.steps);
  run->add_option("--seed", ro.seed);
  run->add_option("--noise", ro.noise)->check(CLI::IsMember({"uniform", "vertex", "zero"}));
  run->add_flag("--explicit", ro.explicit_mode, "Evaluate explicit stage maps");
  run->add_option("--x0", ro.x0)->expected(1, 64);
  run->add_option("-o,--out", ro.out, "Output prefix");

  BenchOpts bo;
  auto* bench = app.add_subcommand("bench", "Timing sweep over N and degradation sweep over m_bar");
  bench->add_option("--bundle", bo.bundle);
  bench->add_option("--Ns", bo.Ns)->delimiter(',');
  bench->add_option("--reps", bo.reps);
  bench->add_option("--mbar", bo.mbar);
  bench->add_flag("--explicit", bo.explicit_mode);
  bench->add_flag("--skip-mbar", bo.skip_mbar);
  bench->add_option("--mbar-list", bo.m_list)->delimiter(',');
  bench->add_option("--seeds", bo.seeds);
  bench->add_option("-o,--out", bo.out, "Output prefix");

  CompareOpts co;
  auto* cmp = app.add_subcommand("compare", "ALADIN against the centralized controller");
  cmp->add_option("--bundle", co.bundle);
  cmp->add_option("--mbar", co.mbar);
  cmp->add_option("--states", co.states);
  cmp->add_option("--seed", co.seed);
  cmp->add_option("--tol", co.tol);
  cmp->add_flag("--explicit", co.explicit_mode);
  cmp->add_option("-o,--out", co.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  try {
    if (*syn) return cmd_synthesize(so);
    if (*run) return cmd_run(ro, workers);
    if (*bench) return cmd_bench(bo, workers);
    if (*cmp) return cmd_compare(co, workers);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.code()), e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailed;
  }
  return kExitOk;
}
