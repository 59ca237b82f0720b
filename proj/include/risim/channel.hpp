#pragma once

#include <vector>

#include "risim/scene.hpp"

namespace risim {

// Complex path gains and derived power factors, one entry per UE.
struct LinkGains {
  Complex bs_ris_path;              // free-space gain with distance phase
  Complex bs_ris_los;               // path gain scaled by the Rician LOS share
  std::vector<Complex> ris_ue_path;
  std::vector<Complex> ris_ue_los;
  std::vector<double> cascade_nlos_power;  // |alpha_k|^2 |alpha_0|^2 / ((eps_k+1)(eps_0+1))
};

// Deterministic per-scene channel statistics shared by sensing and rate code.
struct ChannelState {
  LinkGains gains;
  Angle bs_aod;                 // BS -> RIS direction in the BS frame
  Angle ris_aoa;                // RIS -> BS direction in the RIS frame
  std::vector<Angle> ue_aod;    // RIS -> UE directions in the RIS frame
  SteeringVector a_bs;          // BS array response toward the RIS
  SteeringVector a_ris;         // RIS array response toward the BS
  std::vector<SteeringVector> a_ue;  // RIS array responses toward each UE
  MatrixC los_bs_ris;                // rank-1 LOS component of the BS-RIS channel
  std::vector<VectorC> los_ris_ue;   // LOS components of the RIS-UE channels
};

// One random draw of the physical channels and the cascaded BS-UE vectors.
struct ChannelRealization {
  MatrixC bs_ris;                 // M_R x M_B
  std::vector<VectorC> ris_ue;    // M_R each
  std::vector<VectorC> cascaded;  // M_B each
};

LinkGains path_gains(const SceneConfig& scene);

// Fills gains, angles, steering vectors and LOS components in one pass.
ChannelState make_channel_state(const SceneConfig& scene);

// Rank-1 BS-RIS LOS matrix and per-UE LOS vectors.
struct LosComponents {
  MatrixC bs_ris;
  std::vector<VectorC> ris_ue;
};
LosComponents los_components(const SceneConfig& scene);

// Draws NLOS parts as iid complex Gaussians around the LOS components and
// forms the cascade through the given reflection profile. With
// scene.pure_los the fluctuation variance is exactly zero.
ChannelRealization sample_channel(const SceneConfig& scene, const ChannelState& state,
                                  const PhaseProfile& profile, Rng& rng);
ChannelRealization sample_channel(const SceneConfig& scene, const PhaseProfile& profile,
                                  Rng& rng);

// Cascade h = H0^H diag(vec Lambda) h_k for one UE.
VectorC cascade_channel(const MatrixC& bs_ris, const VectorC& ris_ue,
                        const VectorC& profile_vec);

// Inner product a(ris->bs)^H diag(vec Lambda) a(ris->ue); |result| <= M_R.
Complex pair_response(const VectorC& a_ris, const VectorC& a_ue, const VectorC& profile_vec);
Complex pair_response(const SceneConfig& scene, const ChannelState& state,
                      const PhaseProfile& profile, int ue);

// Mean squared norm of the cascaded channel per BS antenna.
double cascade_power(double nlos_power, double rician_bs_ris, double rician_ris_ue,
                     double pair_response_abs2, int ris_elements);
double cascade_power(const SceneConfig& scene, const ChannelState& state,
                     const PhaseProfile& profile, int ue);

}  // namespace risim
