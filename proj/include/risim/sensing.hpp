#pragma once

#include <vector>

#include "risim/channel.hpp"

namespace risim {

// Downlink pilot noise seen by one UE: thermal noise plus the variance of
// the three cascade fluctuation terms (NLOS x LOS, LOS x NLOS, NLOS x NLOS).
struct NoiseVariance {
  double total = 0.0;
  double awgn = 0.0;
  double bs_nlos_ue_los = 0.0;
  double bs_los_ue_nlos = 0.0;
  double both_nlos = 0.0;
};

// Everything the positioning stage needs: the BS pilot, the per-snapshot
// reflection profiles (known to the estimator) and per-UE noise levels.
struct SensingSetup {
  VectorC pilot;                             // |s_i|^2 = P_B / M_B
  std::vector<PhaseProfile> phase_sequence;  // one profile per snapshot
  std::vector<NoiseVariance> noise;          // per UE

  int snapshots() const { return static_cast<int>(phase_sequence.size()); }
  void validate(const SceneConfig& scene) const;
};

NoiseVariance noise_variance(const SceneConfig& scene, const ChannelState& state,
                             int ue, const VectorC& pilot);

// Pilot beamformed toward the RIS plus a fresh uniform phase sequence drawn
// from scene.sensing_phase_seed.
SensingSetup make_sensing_setup(const SceneConfig& scene, const ChannelState& state);

// Snapshot response model phi(psi): the noise-free observation is
// rx_scale * phi(psi) with rx_scale the (unknown) complex path scalar.
struct SensingModel {
  Upa ris;
  double wavelength = 0.0;
  int count = 0;
  MatrixC stacked;  // (T * m_x) x m_z, block t holds Lambda_t (.*) A(ris_aoa)

  int snapshots() const { return count; }
  VectorC model_vector(const Angle& psi) const;
};

SensingModel make_sensing_model(const SceneConfig& scene, const ChannelState& state,
                                const SensingSetup& setup);

// Complex scalar multiplying the snapshot response in the noise-free
// observation (LOS gains times the beamformed pilot).
Complex rx_scale(const ChannelState& state, const SensingSetup& setup, int ue);

// Noise-free T-vector of observations for one UE.
VectorC noiseless_rx(const SceneConfig& scene, const ChannelState& state,
                     const SensingSetup& setup, int ue);

enum class SensingMode {
  kGaussianApprox,  // LOS mean plus white Gaussian total-noise model
  kFullChannel,     // fresh physical NLOS draws each snapshot, AWGN only
};

VectorC simulate_sensing(const SceneConfig& scene, const ChannelState& state,
                         const SensingSetup& setup, int ue, Rng& rng,
                         SensingMode mode = SensingMode::kGaussianApprox);

// Fisher information of [azimuth, elevation, Re gain, Im gain] and the CRBs
// it implies for the horizontal UE position.
struct FimResult {
  Eigen::Matrix4d channel_fim = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d location_jacobian = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d location_fim = Eigen::Matrix4d::Zero();
  Eigen::Matrix2d position_error = Eigen::Matrix2d::Zero();
  double crb_position = 0.0;
  double crb_azimuth = 0.0;
  double crb_elevation = 0.0;
};

Eigen::Matrix4d fim_channel(const SceneConfig& scene, const ChannelState& state,
                            const SensingSetup& setup, int ue);
Eigen::Matrix4d jacobian_location(const SceneConfig& scene, const ChannelState& state,
                                  int ue);
FimResult crb(const SceneConfig& scene, const ChannelState& state,
              const SensingSetup& setup, int ue);

// Zero-padded 2-D inverse DFT of every snapshot profile, evaluated offline.
// Column m * fft_z + n holds the T-vector of bin (m, n) across snapshots.
struct IfftDictionary {
  int fft_x = 0;
  int fft_z = 0;
  double spacing = 0.0;
  double wavelength = 0.0;
  MatrixC atoms;               // T x (fft_x * fft_z)
  Eigen::VectorXd atom_power;  // squared column norms

  int bins() const { return fft_x * fft_z; }
};

IfftDictionary ifft_dictionary(const Upa& ris, const Angle& ris_aoa,
                               const std::vector<PhaseProfile>& sequence,
                               int fft_x, int fft_z, double wavelength);
IfftDictionary ifft_dictionary(const SceneConfig& scene, const ChannelState& state,
                               const SensingSetup& setup, int fft_size);

// Direction cosine implied by a (fractional) dictionary bin index.
double bin_to_cosine(double bin, int fft_size, double spacing, double wavelength);

// Matched-projection residual over all bins with the minimizing bin;
// ties break toward the smallest (m, n) pair.
struct GridSearchResult {
  int m = 0;
  int n = 0;
  Eigen::MatrixXd surface;  // fft_x rows, fft_z columns
};
GridSearchResult grid_search(const VectorC& rx, const IfftDictionary& dict);

struct EstimateResult {
  int grid_m = 0, grid_n = 0;
  double refined_m = 0.0, refined_n = 0.0;
  Angle coarse;    // after quadratic peak interpolation
  Angle refined;   // after quasi-Newton refinement
  Vector3 position = Vector3::Zero();
  double residual = 0.0;  // final matched-projection residual norm
  bool grid_edge = false;
  int iterations = 0;
  double elapsed_s = 0.0;
};

// Quadratic interpolation around the best bin followed by quasi-Newton
// minimization of the matched-projection residual. Leaves position unset.
EstimateResult refine(const VectorC& rx, const Eigen::MatrixXd& surface, int m, int n,
                      const IfftDictionary& dict, const SensingModel& model);

// Range from the known UE height, then back to global coordinates.
// Throws std::runtime_error at grazing elevation.
Vector3 locate(const Angle& psi, const SceneConfig& scene, double ue_height);

// Full estimator: grid search, refinement, position fix, wall time.
EstimateResult estimate_position(const VectorC& rx, const IfftDictionary& dict,
                                 const SensingModel& model, const SceneConfig& scene,
                                 double ue_height);

// Dense angular grid over (0, pi)^2 maximizing the same matched projection,
// refined identically; the model vectors are evaluated on the fly. A grid
// coarser than the objective's lobe width may lock onto the wrong lobe.
EstimateResult mle_baseline(const VectorC& rx, const SensingModel& model,
                            const SceneConfig& scene, double ue_height,
                            int grid_density);

}  // namespace risim
