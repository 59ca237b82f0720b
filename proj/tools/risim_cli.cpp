// Command-line front end: scenario setup from a key=value config file,
// CRB/sensing/rate evaluation, phase optimization, frame simulation and the
// predefined experiment sweeps. All numeric output goes to CSV files.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "risim/harness.hpp"
#include "risim/parallel.hpp"

using namespace risim;

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_path;
  int trials = 0;
  bool full = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& default_out) {
  args.out_path = default_out;
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--seed", args.seed, "root RNG seed");
  cmd->add_option("--out", args.out_path, "output CSV path");
  cmd->add_option("--trials", args.trials, "trials / MC blocks / intervals override");
  cmd->add_flag("--full", args.full, "full-scale run instead of desk-scale defaults");
}

Config load_config(const CommonArgs& args) {
  return args.config_path.empty() ? default_config() : parse_config(args.config_path);
}

int run_crb(const CommonArgs& args) {
  Config config = load_config(args);
  SceneConfig scene = materialize_scene(config, args.seed);
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  CsvWriter csv(args.out_path);
  for (int k = 0; k < scene.ue_count(); ++k) {
    FimResult fim = crb(scene, state, setup, k);
    std::string ue = std::to_string(k);
    double range = (scene.ue_positions[k] - scene.ris_position).norm();
    csv.row("crb", "ue", k, ue, "range_m", range);
    csv.row("crb", "ue", k, ue, "crb_pos_m", fim.crb_position);
    csv.row("crb", "ue", k, ue, "crb_azimuth_rad", fim.crb_azimuth);
    csv.row("crb", "ue", k, ue, "crb_elevation_rad", fim.crb_elevation);
    std::cout << "ue " << k << ": crb_pos = " << fim.crb_position << " m\n";
  }
  return 0;
}

int run_sense(const CommonArgs& args) {
  Config config = load_config(args);
  SceneConfig scene = materialize_scene(config, args.seed);
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  SensingModel model = make_sensing_model(scene, state, setup);
  IfftDictionary dict = ifft_dictionary(scene, state, setup, config.ifft_size);
  const int trials = args.trials > 0 ? args.trials : 50;

  CsvWriter csv(args.out_path);
  for (int k = 0; k < scene.ue_count(); ++k) {
    FimResult fim = crb(scene, state, setup, k);
    VectorC mean = rx_scale(state, setup, k) * model.model_vector(state.ue_aod[k]);
    double sigma2 = setup.noise[k].total;
    Eigen::VectorXd err2(trials);
    parallel_for(trials, [&](std::int64_t t) {
      Rng rng(derive_seed(args.seed, k, t));
      VectorC rx = mean;
      for (Eigen::Index i = 0; i < rx.size(); ++i) rx[i] += rng.cgaussian(sigma2);
      EstimateResult est = estimate_position(rx, dict, model, scene, scene.ue_height);
      err2[t] = (est.position - scene.ue_positions[k]).squaredNorm();
    });
    double rmse = std::sqrt(err2.mean());
    std::string ue = std::to_string(k);
    csv.row("sense", "ue", k, ue, "rmse_pos_m", rmse);
    csv.row("sense", "ue", k, ue, "crb_pos_m", fim.crb_position);
    std::cout << "ue " << k << ": rmse = " << rmse << " m, crb = " << fim.crb_position
              << " m (" << trials << " trials)\n";
  }
  return 0;
}

int run_rate(const CommonArgs& args) {
  Config config = load_config(args);
  SceneConfig scene = materialize_scene(config, args.seed);
  ChannelState state = make_channel_state(scene);
  SpConfig sp = make_sp_config(scene, config.data_fraction);
  sp.weights = Eigen::VectorXd::Constant(scene.ue_count(), config.kappa);
  Rng profile_rng(derive_seed(args.seed, 0x9a0f));
  PhaseProfile profile = PhaseProfile::random(scene.ris_m_x, scene.ris_m_z, profile_rng);
  const int blocks = args.trials > 0 ? args.trials : 2000;

  RateReport cf = closed_form_rate(scene, state, profile, sp);
  McRate mc = empirical_rate(scene, state, profile, sp, blocks, derive_seed(args.seed, 0x3c));

  CsvWriter csv(args.out_path);
  for (int k = 0; k < scene.ue_count(); ++k) {
    std::string ue = std::to_string(k);
    csv.row("rate", "ue", k, ue, "rate_cf_bps", cf.rate[k]);
    csv.row("rate", "ue", k, ue, "rate_mc_bps", mc.rate[k], mc.rate_se[k]);
    std::cout << "ue " << k << ": closed form " << cf.rate[k] << ", MC " << mc.rate[k]
              << " +/- " << mc.rate_se[k] << " bit/s/Hz\n";
  }
  csv.row("rate", "ue", -1, "all", "sum_rate_cf_bps", cf.rate.sum());
  csv.row("rate", "ue", -1, "all", "sum_rate_mc_bps", mc.rate.sum());
  return 0;
}

int run_optimize(const CommonArgs& args) {
  Config config = load_config(args);
  SceneConfig scene = materialize_scene(config, args.seed);
  ChannelState state = make_channel_state(scene);
  SpConfig sp = make_sp_config(scene, config.data_fraction);
  sp.weights = Eigen::VectorXd::Constant(scene.ue_count(), config.kappa);
  const int samples = args.trials > 0 ? args.trials : 1000;

  RandomBaselineResult random =
      random_baseline(scene, state, sp, samples, derive_seed(args.seed, 0xba5e));
  SaParams sa = config.sa;
  sa.seed = derive_seed(args.seed, 0x5a);
  OptimizationResult annealed = sa_optimize(scene, state, sp, sa);
  GaParams ga = config.ga;
  ga.seed = derive_seed(args.seed, 0x6a);
  OptimizationResult evolved = ga_optimize(scene, state, sp, ga);

  CsvWriter csv(args.out_path);
  csv.row("optimize", "method", 0, "all", "rate_random_mean", random.mean, random.stderr_mean);
  csv.row("optimize", "method", 0, "all", "rate_random_max", random.max);
  csv.row("optimize", "method", 1, "all", "rate_sa", annealed.fitness);
  csv.row("optimize", "method", 2, "all", "rate_ga", evolved.fitness);
  for (size_t g = 0; g < evolved.trace.size(); ++g)
    csv.row("optimize", "generation", g, "all", "ga_best_fitness", evolved.trace[g]);
  std::cout << "random mean " << random.mean << ", SA " << annealed.fitness << ", GA "
            << evolved.fitness << " bit/s/Hz (weighted sum)\n";
  return 0;
}

int run_frame_cmd(const CommonArgs& args) {
  Config config = load_config(args);
  ExperimentSpec spec;
  spec.id = "frame-sim";
  spec.config = config;
  spec.seed = args.seed;
  spec.out_path = args.out_path;
  spec.trials = args.trials;
  spec.full = args.full;
  run_experiment(spec);
  std::cout << "frame simulation written to " << args.out_path << "\n";
  return 0;
}

int run_sweep(const CommonArgs& args, const std::string& experiment) {
  ExperimentSpec spec;
  spec.id = experiment;
  spec.config = load_config(args);
  spec.seed = args.seed;
  spec.out_path = args.out_path;
  spec.trials = args.trials;
  spec.full = args.full;
  run_experiment(spec);
  std::cout << experiment << " written to " << args.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-assisted location sensing and superimposed-pilot link simulator"};
  app.require_subcommand(1);

  CommonArgs crb_args, sense_args, rate_args, opt_args, frame_args, sweep_args;
  std::string experiment;

  add_common(app.add_subcommand("crb", "closed-form position error bounds"), crb_args,
             "crb.csv");
  add_common(app.add_subcommand("sense", "Monte-Carlo position estimation vs bound"),
             sense_args, "sense.csv");
  add_common(app.add_subcommand("rate", "closed-form and Monte-Carlo uplink rates"),
             rate_args, "rate.csv");
  add_common(app.add_subcommand("optimize", "phase optimization (random/SA/GA)"), opt_args,
             "optimize.csv");
  add_common(app.add_subcommand("frame", "frame-protocol simulation"), frame_args,
             "frame.csv");
  CLI::App* sweep = app.add_subcommand("sweep", "predefined experiment sweeps");
  add_common(sweep, sweep_args, "sweep.csv");
  sweep->add_option("--experiment", experiment,
                    "rmse-vs-crb | crb-vs-mr | ifft-vs-mle | rate-validate | "
                    "rate-vs-mr | power-sweep | frame-sim")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("crb")) return run_crb(crb_args);
    if (app.got_subcommand("sense")) return run_sense(sense_args);
    if (app.got_subcommand("rate")) return run_rate(rate_args);
    if (app.got_subcommand("optimize")) return run_optimize(opt_args);
    if (app.got_subcommand("frame")) return run_frame_cmd(frame_args);
    if (app.got_subcommand("sweep")) return run_sweep(sweep_args, experiment);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
