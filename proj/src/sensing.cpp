#include "risim/sensing.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace risim {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// ||rx - f x||^2 with f = x^H rx / x^H x, computed as an explicit residual.
double projection_residual_sq(const VectorC& rx, const VectorC& model) {
  double den = model.squaredNorm();
  if (den < 1e-300) return rx.squaredNorm();
  Complex f = model.dot(rx) / den;
  return (rx - f * model).squaredNorm();
}

struct QuasiNewtonResult {
  Angle angle;
  double residual_sq = 0.0;
  int iterations = 0;
};

// Two-parameter BFGS with backtracking line search on the normalized
// matched-projection residual; central-difference gradients.
QuasiNewtonResult minimize_residual(const VectorC& rx, const SensingModel& model,
                                    const Angle& init) {
  const double rx2 = rx.squaredNorm();
  const double scale = rx2 > 0.0 ? 1.0 / rx2 : 1.0;
  auto objective = [&](const Eigen::Vector2d& x) {
    return scale * projection_residual_sq(rx, model.model_vector({x[0], x[1]}));
  };
  const double h = 1e-7;
  auto gradient = [&](const Eigen::Vector2d& x) {
    Eigen::Vector2d g;
    for (int i = 0; i < 2; ++i) {
      Eigen::Vector2d xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      g[i] = (objective(xp) - objective(xm)) / (2.0 * h);
    }
    return g;
  };

  Eigen::Vector2d x(init.azimuth, init.elevation);
  double fx = objective(x);
  Eigen::Vector2d g = gradient(x);
  Eigen::Matrix2d hinv = Eigen::Matrix2d::Identity();
  int iter = 0;
  for (; iter < 200; ++iter) {
    if (g.norm() < 1e-9) break;
    Eigen::Vector2d p = -hinv * g;
    double slope = g.dot(p);
    if (slope >= 0.0) {
      hinv.setIdentity();
      p = -g;
      slope = g.dot(p);
    }
    double alpha = 1.0;
    Eigen::Vector2d xn;
    double fn = fx;
    bool improved = false;
    for (int bt = 0; bt < 50; ++bt) {
      xn = x + alpha * p;
      fn = objective(xn);
      if (fn <= fx + 1e-4 * alpha * slope) {
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved || !(fn < fx)) break;  // at the finite-difference noise floor
    Eigen::Vector2d gn = gradient(xn);
    Eigen::Vector2d s = xn - x;
    Eigen::Vector2d yv = gn - g;
    double sy = s.dot(yv);
    if (sy > 1e-16 * s.norm() * yv.norm()) {
      double rho = 1.0 / sy;
      Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
      hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) +
             rho * s * s.transpose();
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  return {{x[0], x[1]}, fx / scale, iter};
}

}  // namespace

void SensingSetup::validate(const SceneConfig& scene) const {
  if (std::abs(pilot.squaredNorm() - scene.bs_power_w) > 1e-9 * scene.bs_power_w)
    throw std::invalid_argument("SensingSetup: pilot energy must equal the BS power");
  if (phase_sequence.empty())
    throw std::invalid_argument("SensingSetup: empty phase sequence");
  for (const auto& p : phase_sequence) p.validate();
  if (static_cast<int>(noise.size()) != scene.ue_count())
    throw std::invalid_argument("SensingSetup: noise entries must match UE count");
  for (const auto& nv : noise)
    if (nv.total < 0 || nv.awgn < 0 || nv.bs_nlos_ue_los < 0 || nv.bs_los_ue_nlos < 0 ||
        nv.both_nlos < 0)
      throw std::invalid_argument("SensingSetup: negative noise component");
}

NoiseVariance noise_variance(const SceneConfig& scene, const ChannelState& state,
                             int ue, const VectorC& pilot) {
  NoiseVariance nv;
  nv.awgn = scene.awgn_power_w();
  if (scene.pure_los) {
    nv.total = nv.awgn;
    return nv;
  }
  const double rho = state.gains.cascade_nlos_power[ue];
  const double pilot_energy = pilot.squaredNorm();
  const double bs_sum2 = std::norm(state.a_bs.full.cwiseProduct(pilot).sum());
  const int m_r = scene.ris_m_x * scene.ris_m_z;
  nv.bs_nlos_ue_los = pilot_energy * rho * scene.rician_ris_ue;
  nv.bs_los_ue_nlos = m_r * bs_sum2 * rho * scene.rician_bs_ris;
  nv.both_nlos = pilot_energy * rho;
  nv.total = nv.awgn + nv.bs_nlos_ue_los + nv.bs_los_ue_nlos + nv.both_nlos;
  return nv;
}

SensingSetup make_sensing_setup(const SceneConfig& scene, const ChannelState& state) {
  SensingSetup setup;
  const int m_b = scene.bs_m_x * scene.bs_m_z;
  // Conjugate beamforming toward the RIS; only |s_i| is constrained, and the
  // RIS position is known, so this deterministic choice maximizes the
  // received pilot energy.
  setup.pilot = std::sqrt(scene.bs_power_w / m_b) * state.a_bs.full.conjugate();
  setup.phase_sequence = random_phase_sequence(scene.ris_m_x, scene.ris_m_z,
                                               scene.sensing_snapshots(),
                                               scene.sensing_phase_seed);
  setup.noise.reserve(scene.ue_count());
  for (int k = 0; k < scene.ue_count(); ++k)
    setup.noise.push_back(noise_variance(scene, state, k, setup.pilot));
  return setup;
}

VectorC SensingModel::model_vector(const Angle& psi) const {
  SteeringVector s = steering_vector(ris, psi, wavelength);
  VectorC w = stacked * s.z;
  Eigen::Map<const MatrixC> blocks(w.data(), ris.m_x, count);
  return blocks.transpose() * s.x;
}

SensingModel make_sensing_model(const SceneConfig& scene, const ChannelState& state,
                                const SensingSetup& setup) {
  SensingModel model;
  model.ris = scene.ris_upa();
  model.wavelength = scene.wavelength();
  model.count = setup.snapshots();
  MatrixC response = state.a_ris.x * state.a_ris.z.transpose();
  model.stacked.resize(static_cast<Eigen::Index>(model.count) * model.ris.m_x,
                       model.ris.m_z);
  for (int t = 0; t < model.count; ++t)
    model.stacked.middleRows(static_cast<Eigen::Index>(t) * model.ris.m_x, model.ris.m_x) =
        setup.phase_sequence[t].profile.cwiseProduct(response);
  return model;
}

Complex rx_scale(const ChannelState& state, const SensingSetup& setup, int ue) {
  Complex pilot_sum = state.a_bs.full.cwiseProduct(setup.pilot).sum();
  return state.gains.bs_ris_los * state.gains.ris_ue_los[ue] * pilot_sum;
}

VectorC noiseless_rx(const SceneConfig& scene, const ChannelState& state,
                     const SensingSetup& setup, int ue) {
  SensingModel model = make_sensing_model(scene, state, setup);
  return rx_scale(state, setup, ue) * model.model_vector(state.ue_aod[ue]);
}

VectorC simulate_sensing(const SceneConfig& scene, const ChannelState& state,
                         const SensingSetup& setup, int ue, Rng& rng, SensingMode mode) {
  const int t_count = setup.snapshots();
  VectorC rx(t_count);
  if (mode == SensingMode::kGaussianApprox) {
    VectorC mean = noiseless_rx(scene, state, setup, ue);
    double sigma2 = setup.noise[ue].total;
    for (int t = 0; t < t_count; ++t)
      rx[t] = mean[t] + (sigma2 > 0.0 ? rng.cgaussian(sigma2) : Complex{0.0, 0.0});
    return rx;
  }

  // Physical cascade with fresh fluctuations each snapshot; thermal noise only.
  const int m_r = scene.ris_m_x * scene.ris_m_z;
  const int m_b = scene.bs_m_x * scene.bs_m_z;
  const double var0 =
      scene.pure_los ? 0.0 : std::norm(state.gains.bs_ris_path) / (scene.rician_bs_ris + 1.0);
  const double var_k = scene.pure_los ? 0.0 : std::norm(state.gains.ris_ue_path[ue]) /
                                                  (scene.rician_ris_ue + 1.0);
  const double awgn = scene.awgn_power_w();
  MatrixC bs_ris(m_r, m_b);
  VectorC ris_ue(m_r);
  for (int t = 0; t < t_count; ++t) {
    bs_ris = state.los_bs_ris;
    if (var0 > 0.0)
      for (int c = 0; c < m_b; ++c)
        for (int r = 0; r < m_r; ++r) bs_ris(r, c) += rng.cgaussian(var0);
    ris_ue = state.los_ris_ue[ue];
    if (var_k > 0.0)
      for (int r = 0; r < m_r; ++r) ris_ue[r] += rng.cgaussian(var_k);
    VectorC through = bs_ris * setup.pilot;
    Complex y = ris_ue.cwiseProduct(setup.phase_sequence[t].vec()).cwiseProduct(through).sum();
    rx[t] = y + (awgn > 0.0 ? rng.cgaussian(awgn) : Complex{0.0, 0.0});
  }
  return rx;
}

Eigen::Matrix4d fim_channel(const SceneConfig& scene, const ChannelState& state,
                            const SensingSetup& setup, int ue) {
  const double sigma2 = setup.noise[ue].total;
  if (sigma2 <= 0.0) throw std::invalid_argument("fim_channel: noise variance must be positive");
  const VectorC bs_proj = state.los_bs_ris * setup.pilot;  // LOS path times pilot, M_R
  SteeringDerivatives deriv =
      steering_derivatives(scene.ris_upa(), state.ue_aod[ue], scene.wavelength());
  const VectorC& a = state.a_ue[ue].full;
  const Complex gain = state.gains.ris_ue_los[ue];

  Eigen::Matrix4d fim = Eigen::Matrix4d::Zero();
  for (int t = 0; t < setup.snapshots(); ++t) {
    VectorC v = setup.phase_sequence[t].vec().cwiseProduct(bs_proj);
    Complex base = a.cwiseProduct(v).sum();
    Complex d_az = gain * deriv.dazimuth.cwiseProduct(v).sum();
    Complex d_el = gain * deriv.delevation.cwiseProduct(v).sum();
    Eigen::Vector4cd grad(d_az, d_el, base, kJ * base);
    fim += (grad * grad.adjoint()).real();
  }
  return (2.0 / sigma2) * fim;
}

Eigen::Matrix4d jacobian_location(const SceneConfig& scene, const ChannelState& state,
                                  int ue) {
  (void)state;
  const Vector3 delta = scene.ris_rotation * (scene.ue_positions[ue] - scene.ris_position);
  const double dp = delta.x() * delta.x() + delta.y() * delta.y();
  if (dp < 1e-18)
    throw std::runtime_error("jacobian_location: azimuth undefined (UE on the array axis)");
  const double r2 = delta.squaredNorm();
  Eigen::RowVector3d d_az =
      (-delta.y() * scene.ris_rotation.row(0) + delta.x() * scene.ris_rotation.row(1)) / dp;
  Eigen::RowVector3d d_el =
      (-r2 * scene.ris_rotation.row(2) +
       (scene.ue_positions[ue] - scene.ris_position).transpose() * delta.z()) /
      (r2 * std::sqrt(dp));

  Eigen::Matrix4d jac = Eigen::Matrix4d::Zero();
  jac(0, 0) = d_az[0];
  jac(0, 1) = d_az[1];
  jac(1, 0) = d_el[0];
  jac(1, 1) = d_el[1];
  jac(2, 2) = 1.0;
  jac(3, 3) = 1.0;
  return jac;
}

FimResult crb(const SceneConfig& scene, const ChannelState& state,
              const SensingSetup& setup, int ue) {
  FimResult out;
  out.channel_fim = fim_channel(scene, state, setup, ue);
  out.location_jacobian = jacobian_location(scene, state, ue);
  out.location_fim =
      out.location_jacobian.transpose() * out.channel_fim * out.location_jacobian;

  auto require_invertible = [](const Eigen::Matrix4d& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
    double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0.0) || es.eigenvalues().minCoeff() <= 1e-12 * lmax)
      throw std::runtime_error("crb: unidentifiable geometry (singular information matrix)");
  };
  require_invertible(out.channel_fim);
  require_invertible(out.location_fim);

  Eigen::Matrix4d channel_inv = out.channel_fim.inverse();
  Eigen::Matrix4d location_inv = out.location_fim.inverse();
  out.position_error = location_inv.topLeftCorner<2, 2>();
  out.crb_position = std::sqrt(out.position_error.trace());
  out.crb_azimuth = std::sqrt(channel_inv(0, 0));
  out.crb_elevation = std::sqrt(channel_inv(1, 1));
  return out;
}

IfftDictionary ifft_dictionary(const Upa& ris, const Angle& ris_aoa,
                               const std::vector<PhaseProfile>& sequence,
                               int fft_x, int fft_z, double wavelength) {
  if (fft_x < ris.m_x || fft_z < ris.m_z)
    throw std::invalid_argument("ifft_dictionary: transform must not truncate the array");
  if (sequence.empty()) throw std::invalid_argument("ifft_dictionary: empty phase sequence");

  SteeringVector a_ris = steering_vector(ris, ris_aoa, wavelength);
  MatrixC response = a_ris.x * a_ris.z.transpose();

  MatrixC gx(fft_x, ris.m_x), gz(fft_z, ris.m_z);
  for (int m = 0; m < fft_x; ++m)
    for (int k = 0; k < ris.m_x; ++k)
      gx(m, k) = std::polar(1.0 / fft_x, 2.0 * kPi * m * k / fft_x);
  for (int n = 0; n < fft_z; ++n)
    for (int l = 0; l < ris.m_z; ++l)
      gz(n, l) = std::polar(1.0 / fft_z, 2.0 * kPi * n * l / fft_z);

  IfftDictionary dict;
  dict.fft_x = fft_x;
  dict.fft_z = fft_z;
  dict.spacing = ris.spacing;
  dict.wavelength = wavelength;
  const int t_count = static_cast<int>(sequence.size());
  dict.atoms.resize(t_count, static_cast<Eigen::Index>(fft_x) * fft_z);
  for (int t = 0; t < t_count; ++t) {
    MatrixC padded = gx * sequence[t].profile.cwiseProduct(response) * gz.transpose();
    MatrixC flat = padded.transpose();  // bin (m, n) lands at column m * fft_z + n
    dict.atoms.row(t) = Eigen::Map<const Eigen::RowVectorXcd>(flat.data(), flat.size());
  }
  dict.atom_power = dict.atoms.colwise().squaredNorm().transpose();
  return dict;
}

IfftDictionary ifft_dictionary(const SceneConfig& scene, const ChannelState& state,
                               const SensingSetup& setup, int fft_size) {
  return ifft_dictionary(scene.ris_upa(), state.ris_aoa, setup.phase_sequence, fft_size,
                         fft_size, scene.wavelength());
}

double bin_to_cosine(double bin, int fft_size, double spacing, double wavelength) {
  // Bin m collects directions whose x (or z) phase increment is congruent to
  // -2 pi m / M_F; take the representative in (-pi, pi].
  double mu_d = wrap_to_pi(-2.0 * kPi * bin / fft_size);
  return -mu_d * wavelength / (2.0 * kPi * spacing);
}

GridSearchResult grid_search(const VectorC& rx, const IfftDictionary& dict) {
  if (rx.size() != dict.atoms.rows())
    throw std::invalid_argument("grid_search: snapshot count mismatch");
  const double rx2 = rx.squaredNorm();
  const VectorC corr = dict.atoms.adjoint() * rx;

  GridSearchResult out;
  out.surface.resize(dict.fft_x, dict.fft_z);
  double best = std::numeric_limits<double>::infinity();
  for (int m = 0; m < dict.fft_x; ++m) {
    for (int n = 0; n < dict.fft_z; ++n) {
      Eigen::Index j = static_cast<Eigen::Index>(m) * dict.fft_z + n;
      double power = dict.atom_power[j];
      double eps = rx2;  // zero atoms are skipped
      if (power > 1e-300) eps = std::clamp(rx2 - std::norm(corr[j]) / power, 0.0, rx2);
      out.surface(m, n) = eps;
      if (eps < best) {
        best = eps;
        out.m = m;
        out.n = n;
      }
    }
  }

  // The winner and its interpolation neighbors get explicit residuals; the
  // fast expansion above cancels catastrophically near a perfect match.
  auto patch = [&](int m, int n) {
    Eigen::Index j = static_cast<Eigen::Index>(m) * dict.fft_z + n;
    double power = dict.atom_power[j];
    if (power <= 1e-300) return;
    Complex f = corr[j] / power;
    double eps = (rx - f * dict.atoms.col(j)).squaredNorm();
    out.surface(m, n) = std::min(eps, rx2);
  };
  patch(out.m, out.n);
  patch((out.m + 1) % dict.fft_x, out.n);
  patch((out.m + dict.fft_x - 1) % dict.fft_x, out.n);
  patch(out.m, (out.n + 1) % dict.fft_z);
  patch(out.m, (out.n + dict.fft_z - 1) % dict.fft_z);
  return out;
}

EstimateResult refine(const VectorC& rx, const Eigen::MatrixXd& surface, int m, int n,
                      const IfftDictionary& dict, const SensingModel& model) {
  EstimateResult est;
  est.grid_m = m;
  est.grid_n = n;

  // Three-point quadratic peak interpolation along each axis, neighbors
  // wrapping modulo the transform size; the offset stays within one bin.
  auto interpolate = [](double prev, double center, double next) {
    double den = 2.0 * (prev + next - 2.0 * center);
    if (std::abs(den) < 1e-300) return 0.0;
    return std::clamp((prev - next) / den, -1.0, 1.0);
  };
  const int fx = dict.fft_x, fz = dict.fft_z;
  est.refined_m =
      m + interpolate(surface((m + fx - 1) % fx, n), surface(m, n), surface((m + 1) % fx, n));
  est.refined_n =
      n + interpolate(surface(m, (n + fz - 1) % fz), surface(m, n), surface(m, (n + 1) % fz));

  double w1 = bin_to_cosine(est.refined_m, fx, dict.spacing, dict.wavelength);
  double w3 = bin_to_cosine(est.refined_n, fz, dict.spacing, dict.wavelength);
  if (std::abs(w1) > 1.0) {
    w1 = std::clamp(w1, -1.0, 1.0);
    est.grid_edge = true;
  }
  if (std::abs(w3) > 1.0) {
    w3 = std::clamp(w3, -1.0, 1.0);
    est.grid_edge = true;
  }
  double w2sq = 1.0 - w1 * w1 - w3 * w3;
  if (w2sq < 0.0) {
    w2sq = 0.0;
    est.grid_edge = true;
  }
  // Positive root: UEs lie in the frontal half-space of the RIS.
  double w2 = std::sqrt(w2sq);
  est.coarse = {std::atan2(w2, w1), std::acos(std::clamp(w3, -1.0, 1.0))};

  QuasiNewtonResult qn = minimize_residual(rx, model, est.coarse);
  est.refined = qn.angle;
  // keep the reported direction in the frontal open interval
  est.refined.azimuth = std::clamp(est.refined.azimuth, 1e-12, kPi - 1e-12);
  est.refined.elevation = std::clamp(est.refined.elevation, 1e-12, kPi - 1e-12);
  est.residual = std::sqrt(qn.residual_sq);
  est.iterations = qn.iterations;
  return est;
}

Vector3 locate(const Angle& psi, const SceneConfig& scene, double ue_height) {
  Vector3 direction = scene.ris_rotation.transpose() * direction_vector(psi);
  if (std::abs(direction.z()) < 1e-6)
    throw std::runtime_error("locate: grazing elevation, range unresolvable");
  double range = std::abs((ue_height - scene.ris_position.z()) / direction.z());
  return scene.ris_position + range * direction;
}

EstimateResult estimate_position(const VectorC& rx, const IfftDictionary& dict,
                                 const SensingModel& model, const SceneConfig& scene,
                                 double ue_height) {
  double start = now_seconds();
  GridSearchResult gs = grid_search(rx, dict);
  EstimateResult est = refine(rx, gs.surface, gs.m, gs.n, dict, model);
  est.position = locate(est.refined, scene, ue_height);
  est.elapsed_s = now_seconds() - start;
  return est;
}

EstimateResult mle_baseline(const VectorC& rx, const SensingModel& model,
                            const SceneConfig& scene, double ue_height,
                            int grid_density) {
  if (grid_density < 2) throw std::invalid_argument("mle_baseline: grid density too small");
  double start = now_seconds();
  double best = std::numeric_limits<double>::infinity();
  int best_i = 0, best_j = 0;
  for (int i = 0; i < grid_density; ++i) {
    for (int j = 0; j < grid_density; ++j) {
      Angle psi{(i + 0.5) * kPi / grid_density, (j + 0.5) * kPi / grid_density};
      double eps = projection_residual_sq(rx, model.model_vector(psi));
      if (eps < best) {
        best = eps;
        best_i = i;
        best_j = j;
      }
    }
  }
  Angle coarse{(best_i + 0.5) * kPi / grid_density, (best_j + 0.5) * kPi / grid_density};
  QuasiNewtonResult qn = minimize_residual(rx, model, coarse);

  EstimateResult est;
  est.grid_m = best_i;
  est.grid_n = best_j;
  est.refined_m = best_i;
  est.refined_n = best_j;
  est.coarse = coarse;
  est.refined = qn.angle;
  est.residual = std::sqrt(qn.residual_sq);
  est.iterations = qn.iterations;
  est.position = locate(est.refined, scene, ue_height);
  est.elapsed_s = now_seconds() - start;
  return est;
}

}  // namespace risim
