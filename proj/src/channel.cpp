#include "risim/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace risim {

namespace {

Complex free_space_gain(double wavelength, double distance, double exponent) {
  // Amplitude lambda / (4 pi d^(b/2)), phase from the propagation delay.
  double amplitude = wavelength / (4.0 * kPi * std::pow(distance, exponent / 2.0));
  return std::polar(amplitude, -2.0 * kPi * distance / wavelength);
}

}  // namespace

LinkGains path_gains(const SceneConfig& scene) {
  const double lambda = scene.wavelength();
  const double d0 = (scene.ris_position - scene.bs_position).norm();
  if (d0 < 1e-9) throw std::invalid_argument("path_gains: BS and RIS coincide");

  LinkGains g;
  g.bs_ris_path = free_space_gain(lambda, d0, 2.0);
  double los_share0 = std::sqrt(scene.rician_bs_ris / (scene.rician_bs_ris + 1.0));
  g.bs_ris_los = g.bs_ris_path * los_share0;

  const int k_ues = scene.ue_count();
  g.ris_ue_path.resize(k_ues);
  g.ris_ue_los.resize(k_ues);
  g.cascade_nlos_power.resize(k_ues);
  double los_share_k = std::sqrt(scene.rician_ris_ue / (scene.rician_ris_ue + 1.0));
  for (int k = 0; k < k_ues; ++k) {
    double dk = (scene.ue_positions[k] - scene.ris_position).norm();
    if (dk < 1e-9) throw std::invalid_argument("path_gains: UE and RIS coincide");
    g.ris_ue_path[k] = free_space_gain(lambda, dk, scene.path_loss_exponent);
    g.ris_ue_los[k] = g.ris_ue_path[k] * los_share_k;
    g.cascade_nlos_power[k] = std::norm(g.ris_ue_path[k]) * std::norm(g.bs_ris_path) /
                              ((scene.rician_ris_ue + 1.0) * (scene.rician_bs_ris + 1.0));
  }
  return g;
}

ChannelState make_channel_state(const SceneConfig& scene) {
  ChannelState state;
  state.gains = path_gains(scene);

  Spherical bs_view = cart_to_local_spherical(scene.ris_position, scene.bs_frame());
  state.bs_aod = {bs_view.azimuth, bs_view.elevation};
  Spherical ris_view = cart_to_local_spherical(scene.bs_position, scene.ris_frame());
  state.ris_aoa = {ris_view.azimuth, ris_view.elevation};

  const double lambda = scene.wavelength();
  const Upa bs = scene.bs_upa();
  const Upa ris = scene.ris_upa();
  state.a_bs = steering_vector(bs, state.bs_aod, lambda);
  state.a_ris = steering_vector(ris, state.ris_aoa, lambda);

  state.los_bs_ris = state.gains.bs_ris_los *
                     (state.a_ris.full * state.a_bs.full.transpose());

  const int k_ues = scene.ue_count();
  state.ue_aod.resize(k_ues);
  state.a_ue.resize(k_ues);
  state.los_ris_ue.resize(k_ues);
  for (int k = 0; k < k_ues; ++k) {
    Spherical view = cart_to_local_spherical(scene.ue_positions[k], scene.ris_frame());
    state.ue_aod[k] = {view.azimuth, view.elevation};
    state.a_ue[k] = steering_vector(ris, state.ue_aod[k], lambda);
    state.los_ris_ue[k] = state.gains.ris_ue_los[k] * state.a_ue[k].full;
  }
  return state;
}

LosComponents los_components(const SceneConfig& scene) {
  ChannelState state = make_channel_state(scene);
  return {std::move(state.los_bs_ris), std::move(state.los_ris_ue)};
}

VectorC cascade_channel(const MatrixC& bs_ris, const VectorC& ris_ue,
                        const VectorC& profile_vec) {
  return bs_ris.adjoint() * profile_vec.cwiseProduct(ris_ue);
}

ChannelRealization sample_channel(const SceneConfig& scene, const ChannelState& state,
                                  const PhaseProfile& profile, Rng& rng) {
  const int m_r = scene.ris_m_x * scene.ris_m_z;
  const int m_b = scene.bs_m_x * scene.bs_m_z;
  const double var0 =
      scene.pure_los ? 0.0 : std::norm(state.gains.bs_ris_path) / (scene.rician_bs_ris + 1.0);

  ChannelRealization real;
  real.bs_ris = state.los_bs_ris;
  if (var0 > 0.0) {
    for (int c = 0; c < m_b; ++c)
      for (int r = 0; r < m_r; ++r) real.bs_ris(r, c) += rng.cgaussian(var0);
  }

  const VectorC profile_vec = profile.vec();
  const int k_ues = scene.ue_count();
  real.ris_ue.resize(k_ues);
  real.cascaded.resize(k_ues);
  for (int k = 0; k < k_ues; ++k) {
    double var_k = scene.pure_los
                       ? 0.0
                       : std::norm(state.gains.ris_ue_path[k]) / (scene.rician_ris_ue + 1.0);
    VectorC h = state.los_ris_ue[k];
    if (var_k > 0.0)
      for (int r = 0; r < m_r; ++r) h[r] += rng.cgaussian(var_k);
    real.cascaded[k] = cascade_channel(real.bs_ris, h, profile_vec);
    real.ris_ue[k] = std::move(h);
  }
  return real;
}

ChannelRealization sample_channel(const SceneConfig& scene, const PhaseProfile& profile,
                                  Rng& rng) {
  return sample_channel(scene, make_channel_state(scene), profile, rng);
}

Complex pair_response(const VectorC& a_ris, const VectorC& a_ue,
                      const VectorC& profile_vec) {
  return (a_ris.conjugate().cwiseProduct(profile_vec).cwiseProduct(a_ue)).sum();
}

Complex pair_response(const SceneConfig& scene, const ChannelState& state,
                      const PhaseProfile& profile, int ue) {
  (void)scene;
  return pair_response(state.a_ris.full, state.a_ue[ue].full, profile.vec());
}

double cascade_power(double nlos_power, double rician_bs_ris, double rician_ris_ue,
                     double pair_response_abs2, int ris_elements) {
  return nlos_power * (rician_bs_ris * rician_ris_ue * pair_response_abs2 +
                       (rician_bs_ris + rician_ris_ue + 1.0) * ris_elements);
}

double cascade_power(const SceneConfig& scene, const ChannelState& state,
                     const PhaseProfile& profile, int ue) {
  Complex f = pair_response(scene, state, profile, ue);
  return cascade_power(state.gains.cascade_nlos_power[ue], scene.rician_bs_ris,
                       scene.rician_ris_ue, std::norm(f), scene.ris_m_x * scene.ris_m_z);
}

}  // namespace risim
