#pragma once

#include <cstdint>

#include "risim/channel.hpp"

namespace risim {

// Uplink block configuration: orthogonal pilots superimposed on data, with
// per-UE normalized pilot/data SNRs (thermal noise scaled to unit variance).
struct SpConfig {
  int pilot_length = 0;       // symbols per coherence block
  Eigen::VectorXd pilot_snr;  // q_k
  Eigen::VectorXd data_snr;   // p_k
  Eigen::VectorXd weights;    // kappa_k
  MatrixC pilots;             // pilot_length x K, phi_k^H phi_k = pilot_length

  int ue_count() const { return static_cast<int>(pilot_snr.size()); }
  void validate() const;
};

// Uniform split of P_U: data_fraction goes to data, the rest to pilots.
// Pilots are DFT columns, deterministic and exactly orthogonal.
SpConfig make_sp_config(const SceneConfig& scene, double data_fraction);

// Cascaded-channel moments entering the rate bound. All are scaled by 1/M_B
// relative to the raw expectations.
struct Moments {
  VectorC pair;                // inner product between the two RIS responses
  Eigen::VectorXd cascade;     // E||g_k||^2 / M_B
  Eigen::VectorXd fourth;      // E||g_k||^4 / M_B
  Eigen::MatrixXd cross;       // E|g_k^H g_i|^2 / M_B, off-diagonal
  Eigen::MatrixXd power_prod;  // E{||g_k||^2 ||g_i||^2} / M_B, off-diagonal
};

Moments moments(const SceneConfig& scene, const ChannelState& state,
                const PhaseProfile& profile);

Eigen::VectorXd cascade_powers(const SceneConfig& scene, const ChannelState& state,
                               const PhaseProfile& profile);

// One received uplink block with everything that generated it.
struct SpBlock {
  MatrixC rx;        // M_B x tau
  MatrixC channels;  // M_B x K, column k = g_k
  MatrixC data;      // tau x K, column k = nu_k
  MatrixC noise;     // M_B x tau, unit-variance AWGN
};
SpBlock generate_block(const SceneConfig& scene, const ChannelState& state,
                       const PhaseProfile& profile, const SpConfig& sp, Rng& rng);

struct LmmseEstimate {
  MatrixC despread;       // column k = Y phi_k / sqrt(tau)
  MatrixC estimates;      // column k = c_k * despread_k
  Eigen::VectorXd coeff;  // c_k
  Eigen::VectorXd gain;   // lambda_k = sqrt(q_k tau) chi_k c_k
};

Eigen::VectorXd lmmse_coefficients(const SpConfig& sp, const Eigen::VectorXd& cascade);
LmmseEstimate despread_and_estimate(const MatrixC& rx, const SpConfig& sp,
                                    const Eigen::VectorXd& cascade);

// MRC detection after pilot-contribution subtraction, with each detected row
// split into the mean signal, the channel-gain fluctuation around it, and
// the four residual interference/noise parts. The parts sum to the row.
struct McDetection {
  MatrixC detected;          // K x tau
  MatrixC mean_signal;       // deterministic gain times own data
  MatrixC gain_fluctuation;  // centered own-gain term
  MatrixC self_residual;     // estimate/true-channel mismatch times own data
  MatrixC cross_data;        // other UEs' data through the filter
  MatrixC estimation_error;  // pilot-weighted channel estimation errors
  MatrixC filtered_noise;    // thermal noise through the filter
};
McDetection mrc_detect(const SpBlock& block, const LmmseEstimate& est,
                       const SpConfig& sp, const Eigen::VectorXd& cascade);

struct McRate {
  Eigen::VectorXd sinr;
  Eigen::VectorXd rate;
  Eigen::VectorXd rate_se;  // jackknife standard errors
  int blocks = 0;
};

// Ergodic SINR/rate estimated over fresh channel/data/noise draws per block.
// receiver_coeff overrides the matched LMMSE coefficients (e.g. a receiver
// built from estimated positions); the channel statistics stay truthful.
McRate empirical_rate(const SceneConfig& scene, const ChannelState& state,
                      const PhaseProfile& profile, const SpConfig& sp, int blocks,
                      std::uint64_t seed,
                      const Eigen::VectorXd* receiver_coeff = nullptr);

// Column indices of RateReport::denominator_terms.
enum DenominatorTerm {
  kGainFluctuation = 0,  // own-gain variance
  kSelfData,             // own-data residual interference
  kCrossData,            // other-UE data interference
  kEstimationError,      // pilot-weighted estimation error
  kFilteredNoise,        // thermal noise through the filter
  kMeanPower,            // minus the squared means
  kMeanCross,            // minus the mean cross terms
  kMomentCross,          // second-moment cross terms
  kDenominatorTermCount
};

struct RateReport {
  Eigen::VectorXd coeff;
  Eigen::VectorXd gain;
  Eigen::VectorXd sinr;
  Eigen::VectorXd rate;
  Eigen::MatrixXd denominator_terms;  // K x kDenominatorTermCount
  Moments moment_values;
  double weighted_sum = 0.0;
};

// Closed-form lower bound of the ergodic rate. Throws std::runtime_error
// when the denominator is not positive ("out of regime").
RateReport closed_form_rate(const SceneConfig& scene, const ChannelState& state,
                            const PhaseProfile& profile, const SpConfig& sp);

// Sum of weighted closed-form rates; -inf when the bound is out of regime.
double weighted_sum_rate(const SceneConfig& scene, const ChannelState& state,
                         const PhaseProfile& profile, const SpConfig& sp);

// Profile-independent data for fast repeated rate evaluation (optimizers).
struct RateContext {
  int m_b = 0;
  int m_r = 0;
  double rician_bs_ris = 0.0;
  double rician_ris_ue = 0.0;
  Eigen::VectorXd nlos_power;  // per-UE cascade NLOS power factor
  MatrixC pair_basis;          // M_R x K, column k = conj(a_ris) .* a_ue_k
  MatrixC los_gram;            // K x K gram of the RIS responses toward the UEs
  SpConfig sp;
};
RateContext make_rate_context(const SceneConfig& scene, const ChannelState& state,
                              const SpConfig& sp);
Moments moments(const RateContext& ctx, const PhaseProfile& profile);
RateReport closed_form_rate(const RateContext& ctx, const PhaseProfile& profile);
double weighted_sum_rate(const RateContext& ctx, const PhaseProfile& profile);

}  // namespace risim
