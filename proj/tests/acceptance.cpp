// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Desk-scale by default; heavier variants of the same experiments
// are available through the CLI's --full flag.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "risim/harness.hpp"
#include "risim/parallel.hpp"

using namespace risim;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Outcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Outcome> outcomes;

void record(const std::string& name, bool pass, const std::string& detail) {
  outcomes.push_back({name, pass, detail});
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

SceneConfig diagonal_scene(const SceneConfig& base, double range) {
  SceneConfig scene = base;
  scene.ue_positions = {{-range / std::sqrt(2.0), range / std::sqrt(2.0), 0.0}};
  return scene;
}

// ---------------------------------------------------------------- criterion 1
void criterion_fim() {
  double start = now_s();
  Rng scene_rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    SceneConfig scene;
    scene.ris_m_x = 4;
    scene.ris_m_z = 4;
    scene.bs_m_x = 4;
    scene.bs_m_z = 4;
    scene.rician_bs_ris = scene_rng.uniform(5.0, 80.0);
    scene.rician_ris_ue = scene_rng.uniform(5.0, 80.0);
    scene.bs_power_w = scene_rng.uniform(0.1, 1.0);
    scene.ue_positions = {{scene_rng.uniform(-30.0, -3.0), scene_rng.uniform(3.0, 30.0), 0.0}};
    scene.sensing_phase_seed = 9000 + trial;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);  // T = 100

    Eigen::Matrix4d analytic = fim_channel(scene, state, setup, 0);

    const VectorC bs_proj = state.los_bs_ris * setup.pilot;
    const Upa ris = scene.ris_upa();
    auto forward = [&](double az, double el, Complex beta) {
      SteeringVector a = steering_vector(ris, {az, el}, scene.wavelength());
      VectorC out(setup.snapshots());
      for (int t = 0; t < setup.snapshots(); ++t)
        out[t] = beta *
                 a.full.cwiseProduct(setup.phase_sequence[t].vec()).cwiseProduct(bs_proj).sum();
      return out;
    };
    const Angle psi = state.ue_aod[0];
    const Complex beta = state.gains.ris_ue_los[0];
    const double h = 1e-6;
    MatrixC grads(setup.snapshots(), 4);
    grads.col(0) = (forward(psi.azimuth + h, psi.elevation, beta) -
                    forward(psi.azimuth - h, psi.elevation, beta)) /
                   (2 * h);
    grads.col(1) = (forward(psi.azimuth, psi.elevation + h, beta) -
                    forward(psi.azimuth, psi.elevation - h, beta)) /
                   (2 * h);
    grads.col(2) = (forward(psi.azimuth, psi.elevation, beta + h) -
                    forward(psi.azimuth, psi.elevation, beta - h)) /
                   (2 * h);
    grads.col(3) = (forward(psi.azimuth, psi.elevation, beta + Complex(0, h)) -
                    forward(psi.azimuth, psi.elevation, beta - Complex(0, h))) /
                   (2 * h);
    Eigen::Matrix4d fd = Eigen::Matrix4d::Zero();
    for (int t = 0; t < setup.snapshots(); ++t) {
      Eigen::Vector4cd g = grads.row(t).transpose();
      fd += (g * g.adjoint()).real();
    }
    fd *= 2.0 / setup.noise[0].total;

    double scale = fd.cwiseAbs().maxCoeff();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        worst = std::max(worst, std::abs(analytic(r, c) - fd(r, c)) /
                                    std::max(std::abs(fd(r, c)), 1e-9 * scale));
  }
  double elapsed = now_s() - start;
  record("1 fim-vs-finite-diff", worst < 1e-4 && elapsed < 10.0,
         "max rel err " + fmt(worst) + ", " + fmt(elapsed) + " s (20 scenes, T=100)");
}

// ------------------------------------------------------------ criteria 2 & 4
void criterion_estimator_vs_crb_and_noiseless() {
  SceneConfig base;
  base.ris_m_x = 64;
  base.ris_m_z = 64;
  base.ue_positions = {{-5.0, 5.0, 0.0}};

  SceneConfig probe = diagonal_scene(base, 5.0);
  ChannelState probe_state = make_channel_state(probe);
  SensingSetup setup = make_sensing_setup(probe, probe_state);
  SensingModel model = make_sensing_model(probe, probe_state, setup);
  IfftDictionary dict = ifft_dictionary(probe, probe_state, setup, 256);

  // --- criterion 2: estimation error against the bound over range
  const int trials = 200;
  bool pass2 = true;
  std::string detail2;
  for (double r : {5.0, 10.0, 15.0, 20.0, 25.0, 30.0}) {
    SceneConfig scene = diagonal_scene(base, r);
    ChannelState state = make_channel_state(scene);
    SensingSetup point_setup = setup;
    point_setup.noise = {noise_variance(scene, state, 0, setup.pilot)};
    FimResult fim = crb(scene, state, point_setup, 0);
    VectorC mean = rx_scale(state, point_setup, 0) * model.model_vector(state.ue_aod[0]);
    double sigma2 = point_setup.noise[0].total;

    Eigen::VectorXd err2(trials);
    parallel_for(trials, [&](std::int64_t t) {
      Rng rng(derive_seed(7771, std::uint64_t(r), t));
      VectorC rx = mean;
      for (Eigen::Index i = 0; i < rx.size(); ++i) rx[i] += rng.cgaussian(sigma2);
      EstimateResult est = estimate_position(rx, dict, model, scene, 0.0);
      err2[t] = (est.position - scene.ue_positions[0]).squaredNorm();
    });
    double rmse = std::sqrt(err2.mean());
    bool ok = rmse <= 2.0 * fim.crb_position && (r >= 30.0 || rmse < 1.0);
    pass2 = pass2 && ok;
    detail2 += "r=" + fmt(r) + ":" + fmt(rmse) + "/" + fmt(fim.crb_position) + " ";
  }
  record("2 rmse-vs-crb", pass2, "rmse/crb (m): " + detail2 + "(200 trials)");

  // --- criterion 4: noiseless consistency, including the full-size transform
  bool pass4 = true;
  double worst_angle = 0.0, worst_pos = 0.0;
  Rng rng(515);
  for (int trial = 0; trial < 6; ++trial) {
    SceneConfig scene = base;
    scene.ue_positions = {{rng.uniform(-28.0, -3.0), rng.uniform(3.0, 28.0), 0.0}};
    ChannelState state = make_channel_state(scene);
    SensingSetup moved = setup;
    moved.noise = {noise_variance(scene, state, 0, setup.pilot)};
    VectorC rx = noiseless_rx(scene, state, moved, 0);
    EstimateResult est = estimate_position(rx, dict, model, scene, 0.0);
    double angle_err = std::max(std::abs(est.refined.azimuth - state.ue_aod[0].azimuth),
                                std::abs(est.refined.elevation - state.ue_aod[0].elevation));
    double pos_err = (est.position - scene.ue_positions[0]).norm();
    worst_angle = std::max(worst_angle, angle_err);
    worst_pos = std::max(worst_pos, pos_err);
    pass4 = pass4 && angle_err < 1e-6 && pos_err < 1e-3;
  }
  record("4 noiseless-consistency", pass4,
         "max angle err " + fmt(worst_angle) + " rad, max pos err " + fmt(worst_pos) +
             " m (64x64, 256-bin transform)");
}

// ---------------------------------------------------------------- criterion 3
void criterion_crb_monotone() {
  double previous = std::numeric_limits<double>::infinity();
  bool pass = true;
  std::string detail;
  for (int side : {4, 6, 8, 10}) {
    SceneConfig scene;
    scene.ris_m_x = side;
    scene.ris_m_z = side;
    scene.ue_positions = {{-15.0 / std::sqrt(2.0), 15.0 / std::sqrt(2.0), 0.0}};
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    FimResult fim = crb(scene, state, setup, 0);
    pass = pass && fim.crb_position < previous;
    previous = fim.crb_position;
    detail += fmt(fim.crb_position) + " ";
  }
  record("3 crb-monotone-in-elements", pass, "crb_pos (m) over {16,36,64,100}: " + detail);
}

// ---------------------------------------------------------------- criterion 5
void criterion_moment_oracles() {
  double start = now_s();
  SceneConfig scene;
  scene.bs_m_x = 2;
  scene.bs_m_z = 1;  // M_B = 2
  scene.ris_m_x = 2;
  scene.ris_m_z = 2;  // M_R = 4
  scene.rician_bs_ris = 5.0;
  scene.rician_ris_ue = 4.0;
  scene.block_duration_s = 8.0 / scene.bandwidth_hz;  // tau = 8
  scene.ue_positions = {{-9.0, 7.0, 0.0}, {-14.0, 11.0, 0.0}};
  ChannelState state = make_channel_state(scene);
  Rng prof_rng(606);
  PhaseProfile profile = PhaseProfile::random(2, 2, prof_rng);
  SpConfig sp = make_sp_config(scene, 0.5);
  Moments mom = moments(scene, state, profile);
  Eigen::VectorXd coeff = lmmse_coefficients(sp, mom.cascade);
  const int m_b = 2;

  const int draws = 1000000;
  // accumulators: value and squared value for standard errors
  enum { kChi0, kDelta0, kOmega01, kXi01, kLambda0, kErr0, kCount };
  std::vector<Eigen::Array2d> acc(kCount, Eigen::Array2d::Zero());
  const int workers = 8;  // fixed split, deterministic
  std::vector<std::vector<Eigen::Array2d>> partial(
      workers, std::vector<Eigen::Array2d>(kCount, Eigen::Array2d::Zero()));
  parallel_for(workers, [&](std::int64_t w) {
    auto& slot = partial[w];
    const int lo = int(w * (long long)draws / workers);
    const int hi = int((w + 1) * (long long)draws / workers);
    for (int d = lo; d < hi; ++d) {
      Rng rng(derive_seed(808, d));
      SpBlock block = generate_block(scene, state, profile, sp, rng);
      LmmseEstimate est;
      est.despread = block.rx * sp.pilots / std::sqrt(double(sp.pilot_length));
      est.estimates = est.despread * coeff.asDiagonal();
      double n0 = block.channels.col(0).squaredNorm();
      double n1 = block.channels.col(1).squaredNorm();
      double c01 = std::norm(block.channels.col(0).dot(block.channels.col(1)));
      double l0 = est.estimates.col(0).squaredNorm();
      double e0 = (block.channels.col(0) - est.estimates.col(0)).squaredNorm();
      auto push = [&](int which, double v) { slot[which] += Eigen::Array2d(v, v * v); };
      push(kChi0, n0);
      push(kDelta0, n0 * n0);
      push(kOmega01, c01);
      push(kXi01, n0 * n1);
      push(kLambda0, l0);
      push(kErr0, e0);
    }
  });
  for (int w = 0; w < workers; ++w)
    for (int q = 0; q < kCount; ++q) acc[q] += partial[w][q];

  double lambda0 = std::sqrt(sp.pilot_snr[0] * sp.pilot_length) * mom.cascade[0] * coeff[0];
  struct Check {
    const char* name;
    int which;
    double expected;
  } checks[] = {
      {"chi", kChi0, m_b * mom.cascade[0]},
      {"fourth", kDelta0, m_b * mom.fourth[0]},
      {"cross", kOmega01, m_b * mom.cross(0, 1)},
      {"power-product", kXi01, m_b * mom.power_prod(0, 1)},
      {"estimate-power", kLambda0, m_b * lambda0},
      {"error-power", kErr0, m_b * (mom.cascade[0] - lambda0)},
  };
  bool pass = true;
  std::string detail;
  for (const auto& c : checks) {
    double mean = acc[c.which][0] / draws;
    double var = acc[c.which][1] / draws - mean * mean;
    double se = std::sqrt(std::max(var, 0.0) / draws);
    double sigmas = std::abs(mean - c.expected) / se;
    pass = pass && sigmas < 3.0;
    detail += std::string(c.name) + ":" + fmt(sigmas) + "se ";
  }
  double elapsed = now_s() - start;
  record("5 moment-oracles", pass && elapsed < 120.0,
         detail + "(1e6 draws, " + fmt(elapsed) + " s)");
}

// ---------------------------------------------------------------- criterion 6
void criterion_rate_tightness() {
  Config config = default_config();
  config.scene.ris_m_x = 2;
  config.scene.ris_m_z = 2;
  config.k_ues = 4;
  SceneConfig scene = materialize_scene(config, 12021);
  ChannelState state = make_channel_state(scene);
  SpConfig sp = make_sp_config(scene, 0.5);
  Rng prof_rng(33);
  PhaseProfile profile = PhaseProfile::random(2, 2, prof_rng);

  RateReport cf = closed_form_rate(scene, state, profile, sp);
  McRate mc = empirical_rate(scene, state, profile, sp, 10000, 404);

  bool pass = true;
  std::string detail;
  for (int k = 0; k < 4; ++k) {
    double gap = std::abs(cf.rate[k] - mc.rate[k]) / mc.rate[k];
    bool lower = cf.rate[k] <= mc.rate[k] + 2.0 * mc.rate_se[k];
    pass = pass && gap < 0.05 && lower;
    detail += "ue" + std::to_string(k) + ":" + fmt(100 * gap) + "% ";
  }
  record("6 rate-bound-tightness", pass, "cf-vs-mc gap " + detail + "(1e4 blocks)");
}

// ---------------------------------------------------------------- criterion 7
void criterion_optimization_order() {
  Config config = default_config();  // RIS 10x10 -> M_R = 100
  config.k_ues = 4;
  SceneConfig scene = materialize_scene(config, 5150);
  ChannelState state = make_channel_state(scene);
  SpConfig sp = make_sp_config(scene, 0.5);

  RandomBaselineResult random = random_baseline(scene, state, sp, 1000, 61);
  SaParams sa = config.sa;
  sa.seed = 62;
  OptimizationResult annealed = sa_optimize(scene, state, sp, sa);
  GaParams ga = config.ga;
  ga.seed = 63;
  ga.generations = 300;  // converged budget for the 100-gene search
  ga.stagnation = 80;
  OptimizationResult evolved = ga_optimize(scene, state, sp, ga);

  bool monotone = true;
  for (size_t g = 1; g < evolved.trace.size(); ++g)
    monotone = monotone && evolved.trace[g] >= evolved.trace[g - 1];
  bool pass = random.mean < annealed.fitness && random.mean < evolved.fitness &&
              annealed.fitness <= 1.02 * evolved.fitness && monotone;
  record("7 optimization-ordering", pass,
         "random " + fmt(random.mean) + " < SA " + fmt(annealed.fitness) + ", GA " +
             fmt(evolved.fitness) + ", trace monotone: " + (monotone ? "yes" : "no"));
}

// ---------------------------------------------------------------- criterion 8
void criterion_power_peak() {
  Config config = default_config();
  config.scene.ris_m_x = 20;
  config.scene.ris_m_z = 20;
  config.k_ues = 16;
  SceneConfig scene = materialize_scene(config, 888);
  ChannelState state = make_channel_state(scene);

  SpConfig sp_mid = make_sp_config(scene, 0.5);
  GaParams ga = config.ga;
  ga.generations = 40;
  ga.seed = 89;
  PhaseProfile profile = ga_optimize(scene, state, sp_mid, ga).best;

  std::vector<double> rates;
  for (int step = 1; step <= 19; ++step) {
    SpConfig sp = make_sp_config(scene, 0.05 * step);
    rates.push_back(closed_form_rate(scene, state, profile, sp).rate.sum());
  }
  size_t best = std::distance(rates.begin(), std::max_element(rates.begin(), rates.end()));
  bool interior = best > 0 && best + 1 < rates.size();
  bool above = rates[best] > rates.front() && rates[best] > rates.back();
  record("8 power-allocation-peak", interior && above,
         "peak " + fmt(rates[best]) + " at eta=" + fmt(0.05 * (best + 1)) + ", endpoints " +
             fmt(rates.front()) + " / " + fmt(rates.back()) + " (RIS 20x20, K=16)");
}

// ---------------------------------------------------------------- criterion 9
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void criterion_determinism(const std::string& cli) {
  ExperimentSpec spec;
  spec.id = "crb-vs-mr";
  spec.config = default_config();
  spec.config.k_ues = 1;
  spec.seed = 2718;
  spec.out_path = "acceptance_det_a.csv";
  run_experiment(spec);
  spec.out_path = "acceptance_det_b.csv";
  run_experiment(spec);
  bool in_process = slurp("acceptance_det_a.csv") == slurp("acceptance_det_b.csv") &&
                    !slurp("acceptance_det_a.csv").empty();
  std::remove("acceptance_det_a.csv");
  std::remove("acceptance_det_b.csv");
  std::remove("acceptance_det_a.csv.manifest");
  std::remove("acceptance_det_b.csv.manifest");

  bool via_cli = true;
  std::string note;
  if (!cli.empty()) {
    std::string base = "\"" + cli + "\" sense --seed 99 --trials 5 ";
    int rc1 = std::system((base + "--out acceptance_cli_a.csv > /dev/null").c_str());
    int rc2 = std::system((base + "--out acceptance_cli_b.csv > /dev/null").c_str());
    via_cli = rc1 == 0 && rc2 == 0 &&
              slurp("acceptance_cli_a.csv") == slurp("acceptance_cli_b.csv") &&
              !slurp("acceptance_cli_a.csv").empty();
    std::remove("acceptance_cli_a.csv");
    std::remove("acceptance_cli_b.csv");
    note = via_cli ? "in-process and CLI reruns byte-identical"
                   : "CLI rerun differed or failed";
  } else {
    via_cli = false;
    note = "no --cli path given";
  }
  record("9 determinism", in_process && via_cli, note);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

  double start = now_s();
  criterion_fim();
  criterion_crb_monotone();
  criterion_estimator_vs_crb_and_noiseless();
  criterion_moment_oracles();
  criterion_rate_tightness();
  criterion_optimization_order();
  criterion_power_peak();
  criterion_determinism(cli);

  int failed = 0;
  for (const auto& o : outcomes)
    if (!o.pass) ++failed;
  std::printf("----\n%zu criteria checked in %.1f s, %d failed\n", outcomes.size(),
              now_s() - start, failed);
  return failed == 0 ? 0 : 1;
}
