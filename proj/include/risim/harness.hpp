#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "risim/optimize.hpp"
#include "risim/sensing.hpp"

namespace risim {

// Everything parsed from a key=value config file. UE positions stay abstract
// (count plus placement rectangle) until materialize_scene resolves them.
struct Config {
  SceneConfig scene;
  GaParams ga;
  SaParams sa;
  double data_fraction = 0.5;  // share of UE power on data symbols
  double kappa = 1.0;          // common rate weight
  int k_ues = 4;
  double ue_x_min = -20.0, ue_x_max = -3.0;
  double ue_y_min = 3.0, ue_y_max = 20.0;
  std::map<int, std::pair<double, double>> explicit_ues;  // index -> (x, y)
  int ifft_size = 256;
  int mle_grid = 0;  // 0: twice the transform size
  double walk_std_m = 0.5;
  int intervals = 5;
};

Config default_config();
Config parse_config_text(const std::string& text);
Config parse_config(const std::string& path);  // throws on unknown keys / bad values

// Effective configuration as sorted key=value pairs (manifest content).
std::vector<std::pair<std::string, std::string>> config_key_values(const Config& config);

// Scene with UE positions resolved: explicit entries win, the rest are drawn
// uniformly from the placement rectangle using a substream of `seed`.
SceneConfig materialize_scene(const Config& config, std::uint64_t seed);

struct MobilityModel {
  Eigen::Matrix2d step_covariance = Eigen::Matrix2d::Zero();
  static MobilityModel isotropic(double std_m);
};

// One Gaussian step in the horizontal plane per UE; heights are preserved.
void step_mobility(std::vector<Vector3>& positions, const MobilityModel& model, Rng& rng);

struct FrameUeReport {
  bool sensed = false;
  double position_error = 0.0;
  double rate_cf_est = 0.0;
  double rate_cf_acc = 0.0;
  double rate_mc_est = 0.0;
  double rate_mc_acc = 0.0;
};

struct FrameIntervalReport {
  std::vector<FrameUeReport> ues;
  double sum_rate_cf_est = 0.0;
  double sum_rate_cf_acc = 0.0;
  double sum_rate_mc_est = 0.0;
  double sum_rate_mc_acc = 0.0;
};

struct FrameOptions {
  int intervals = 0;   // 0: take from config
  int mc_blocks = 0;   // 0: all blocks of the interval
  bool optimize_phase = true;
};

// Frame protocol simulation: per location interval the UEs move, get sensed,
// the channel statistics are rebuilt from the estimated positions, the phase
// profile is optimized on those statistics, and rates are evaluated both with
// estimated and accurate locations. Sensing failures mark the UE's
// estimated-location rates as missing instead of aborting.
std::vector<FrameIntervalReport> run_frame(const Config& config, std::uint64_t seed,
                                           const FrameOptions& options = {});

struct ExperimentSpec {
  std::string id;  // rmse-vs-crb | crb-vs-mr | ifft-vs-mle | rate-validate |
                   // rate-vs-mr | power-sweep | frame-sim
  Config config;
  std::uint64_t seed = 1;
  std::string out_path = "out.csv";
  int trials = 0;  // 0: per-experiment default
  bool full = false;

  void validate() const;
};

// Runs one named experiment, writing a long-format CSV
// (experiment,sweep_var,sweep_value,ue,metric,value,stderr) plus a
// key=value manifest at <out_path>.manifest.
void run_experiment(const ExperimentSpec& spec);

std::string format_double(double v);  // round-trip decimal formatting

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);  // throws on unwritable path
  ~CsvWriter();
  void row(const std::string& experiment, const std::string& sweep_var,
           double sweep_value, const std::string& ue, const std::string& metric,
           double value, double stderr_value = 0.0);

 private:
  std::string path_;
  std::string buffer_;
};

void write_manifest(const std::string& csv_path, const ExperimentSpec& spec);

const char* version_string();

}  // namespace risim
