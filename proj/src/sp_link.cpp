#include "risim/sp_link.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "risim/parallel.hpp"

namespace risim {

namespace {

constexpr double kSinrCap = 1e12;  // reporting sentinel for effectively infinite SINR

double rate_from_sinr(double sinr) { return std::log1p(sinr) / std::log(2.0); }

// Shared moment evaluation; gram(k, i) is the adjoint product of the
// unit-modulus RIS responses toward UEs k and i.
Moments compute_moments(int m_b, int m_r, double e0, double ek,
                        const Eigen::VectorXd& rho, const VectorC& pair,
                        const MatrixC& gram) {
  const int k_ues = static_cast<int>(rho.size());
  Moments mom;
  mom.pair = pair;
  mom.cascade.resize(k_ues);
  mom.fourth.resize(k_ues);
  mom.cross = Eigen::MatrixXd::Zero(k_ues, k_ues);
  mom.power_prod = Eigen::MatrixXd::Zero(k_ues, k_ues);

  for (int k = 0; k < k_ues; ++k) {
    const double f2 = std::norm(pair[k]);
    mom.cascade[k] = cascade_power(rho[k], e0, ek, f2, m_r);
    mom.fourth[k] =
        rho[k] * rho[k] *
        (m_b * (e0 * ek) * (e0 * ek) * f2 * f2 +
         2.0 * e0 * ek * f2 *
             (2.0 * m_b * m_r * e0 + m_b * m_r * ek + m_b * m_r + 2.0 * m_b + m_r * ek +
              m_r + 2.0) +
         m_b * m_r * m_r * (2.0 * e0 * e0 + ek * ek + 2.0 * e0 * ek + 2.0 * e0 + 2.0 * ek + 1.0) +
         m_r * m_r * (ek * ek + 2.0 * e0 * ek + 2.0 * e0 + 2.0 * ek + 1.0) +
         m_b * m_r * (2.0 * e0 + 2.0 * ek + 1.0) +
         m_r * (2.0 * e0 + 2.0 * ek + 1.0));
  }

  for (int k = 0; k < k_ues; ++k) {
    const double fk2 = std::norm(pair[k]);
    for (int i = k + 1; i < k_ues; ++i) {
      const double fi2 = std::norm(pair[i]);
      const double gram2 = std::norm(gram(k, i));
      const double cross_term =
          std::real(std::conj(pair[k]) * pair[i] * gram(i, k));
      double omega =
          rho[i] * rho[k] *
          (m_b * e0 * e0 * ek * ek * fk2 * fi2 +
           e0 * ek * fk2 * (e0 * m_b * m_r + m_r * ek + m_r + 2.0 * m_b) +
           e0 * ek * fi2 * (e0 * m_b * m_r + m_r * ek + m_r + 2.0 * m_b) +
           m_r * m_r * (m_b * e0 * e0 + e0 * (ek + ek + 2.0) + (ek + 1.0) * (ek + 1.0)) +
           m_b * m_r * (2.0 * e0 + ek + ek + 1.0) +
           m_b * ek * ek * gram2 +
           2.0 * m_b * e0 * ek * ek * cross_term);
      mom.cross(k, i) = omega;
      mom.cross(i, k) = omega;
      double xi = m_b * mom.cascade[k] * mom.cascade[i] +
                  rho[i] * rho[k] *
                      (ek * ek * gram2 + m_r * (ek + ek + 1.0) + 2.0 * e0 * ek * fk2 +
                       2.0 * e0 * ek * fi2 + 2.0 * m_r * e0 +
                       2.0 * e0 * ek * ek * cross_term);
      mom.power_prod(k, i) = xi;
      mom.power_prod(i, k) = xi;
    }
  }
  return mom;
}

RateReport closed_form_core(int m_b, const SpConfig& sp, const Moments& mom) {
  const int k_ues = sp.ue_count();
  const double tau = sp.pilot_length;
  const Eigen::VectorXd& q = sp.pilot_snr;
  const Eigen::VectorXd& p = sp.data_snr;
  const Eigen::VectorXd& chi = mom.cascade;

  RateReport report;
  report.moment_values = mom;
  report.coeff = lmmse_coefficients(sp, chi);
  report.gain.resize(k_ues);
  for (int k = 0; k < k_ues; ++k)
    report.gain[k] = std::sqrt(q[k] * tau) * chi[k] * report.coeff[k];

  report.sinr.resize(k_ues);
  report.rate.resize(k_ues);
  report.denominator_terms.resize(k_ues, kDenominatorTermCount);

  for (int k = 0; k < k_ues; ++k) {
    const double c2 = report.coeff[k] * report.coeff[k];
    const double lam = report.gain[k];

    double gain_fluct = p[k] * tau * m_b * lam * lam *
                        (mom.fourth[k] / (chi[k] * chi[k]) - m_b);

    double self_data = m_b * c2 * p[k] * p[k] * (tau + 1.0) * mom.fourth[k] +
                       m_b * c2 * tau * p[k] * chi[k];
    for (int i = 0; i < k_ues; ++i)
      if (i != k) self_data += m_b * c2 * tau * p[i] * p[k] * mom.cross(k, i);

    double cross_data = 0.0;
    for (int i = 0; i < k_ues; ++i) {
      if (i == k) continue;
      cross_data += m_b * q[k] * c2 * tau * tau * p[i] * mom.cross(k, i);
      cross_data += m_b * tau * c2 * p[i] * p[i] * mom.fourth[i];
      cross_data += m_b * c2 * p[i] * p[i] * mom.fourth[i];
      cross_data += m_b * tau * c2 * p[i] * chi[i];
      for (int j = 0; j < k_ues; ++j) {
        if (j != k && j != i) cross_data += m_b * c2 * p[i] * p[j] * mom.power_prod(i, j);
        if (j != i) cross_data += m_b * tau * c2 * p[i] * p[j] * mom.cross(i, j);
      }
    }

    double est_error = 0.0;
    for (int i = 0; i < k_ues; ++i) {
      double lam_i = std::sqrt(q[i] * tau) * chi[i] * report.coeff[i];
      est_error += m_b * tau * q[i] * lam * (chi[i] - lam_i);
    }

    double filtered_noise = m_b * lam * tau + c2 * m_b * m_b;

    double other_data_power = 0.0;
    for (int i = 0; i < k_ues; ++i)
      if (i != k) other_data_power += p[i] * chi[i];

    double mean_power = -(m_b * m_b * p[k] * p[k] * c2 * chi[k] * chi[k] +
                          m_b * m_b * c2 * other_data_power * other_data_power +
                          m_b * m_b * c2);
    double mean_cross = -2.0 * m_b * m_b * c2 *
                        (p[k] * chi[k] * other_data_power + p[k] * chi[k] + other_data_power);

    double moment_cross = 0.0;
    for (int i = 0; i < k_ues; ++i)
      if (i != k) moment_cross += p[i] * mom.power_prod(i, k);
    moment_cross = 2.0 * m_b * c2 *
                   (p[k] * moment_cross + m_b * p[k] * chi[k] + m_b * other_data_power);

    report.denominator_terms(k, kGainFluctuation) = gain_fluct;
    report.denominator_terms(k, kSelfData) = self_data;
    report.denominator_terms(k, kCrossData) = cross_data;
    report.denominator_terms(k, kEstimationError) = est_error;
    report.denominator_terms(k, kFilteredNoise) = filtered_noise;
    report.denominator_terms(k, kMeanPower) = mean_power;
    report.denominator_terms(k, kMeanCross) = mean_cross;
    report.denominator_terms(k, kMomentCross) = moment_cross;

    double numerator = m_b * m_b * lam * lam * p[k] * tau;
    double denominator = report.denominator_terms.row(k).sum();
    if (lam == 0.0 || numerator == 0.0) {
      report.sinr[k] = 0.0;
    } else {
      if (denominator <= 0.0)
        throw std::runtime_error("closed_form_rate: lower bound out of regime");
      report.sinr[k] = std::min(numerator / denominator, kSinrCap);
    }
    report.rate[k] = rate_from_sinr(report.sinr[k]);
  }

  report.weighted_sum = (sp.weights.array() * report.rate.array()).sum();
  return report;
}

}  // namespace

void SpConfig::validate() const {
  const int k_ues = ue_count();
  if (pilot_length < k_ues)
    throw std::invalid_argument("SpConfig: pilot length must be at least the UE count");
  if (data_snr.size() != k_ues || weights.size() != k_ues)
    throw std::invalid_argument("SpConfig: inconsistent per-UE sizes");
  if (pilots.rows() != pilot_length || pilots.cols() != k_ues)
    throw std::invalid_argument("SpConfig: pilot matrix shape mismatch");
  for (int k = 0; k < k_ues; ++k) {
    for (int i = 0; i < k_ues; ++i) {
      Complex g = pilots.col(k).dot(pilots.col(i));
      Complex want = (i == k) ? Complex(pilot_length, 0.0) : Complex(0.0, 0.0);
      if (std::abs(g - want) > 1e-9 * pilot_length)
        throw std::invalid_argument("SpConfig: pilots must be orthogonal with norm tau");
    }
  }
}

SpConfig make_sp_config(const SceneConfig& scene, double data_fraction) {
  if (data_fraction < 0.0 || data_fraction > 1.0)
    throw std::invalid_argument("make_sp_config: data fraction must be in [0, 1]");
  const int k_ues = scene.ue_count();
  SpConfig sp;
  sp.pilot_length = scene.block_symbols();
  if (sp.pilot_length < k_ues)
    throw std::invalid_argument("make_sp_config: block too short for orthogonal pilots");
  const double budget = scene.ue_power_w / scene.awgn_power_w();
  sp.data_snr = Eigen::VectorXd::Constant(k_ues, data_fraction * budget);
  sp.pilot_snr = Eigen::VectorXd::Constant(k_ues, (1.0 - data_fraction) * budget);
  sp.weights = Eigen::VectorXd::Ones(k_ues);
  sp.pilots.resize(sp.pilot_length, k_ues);
  for (int t = 0; t < sp.pilot_length; ++t)
    for (int k = 0; k < k_ues; ++k)
      sp.pilots(t, k) = std::polar(1.0, -2.0 * kPi * t * k / sp.pilot_length);
  return sp;
}

Eigen::VectorXd cascade_powers(const SceneConfig& scene, const ChannelState& state,
                               const PhaseProfile& profile) {
  const int k_ues = scene.ue_count();
  const VectorC profile_vec = profile.vec();
  Eigen::VectorXd chi(k_ues);
  for (int k = 0; k < k_ues; ++k) {
    Complex f = pair_response(state.a_ris.full, state.a_ue[k].full, profile_vec);
    chi[k] = cascade_power(state.gains.cascade_nlos_power[k], scene.rician_bs_ris,
                           scene.rician_ris_ue, std::norm(f), scene.ris_m_x * scene.ris_m_z);
  }
  return chi;
}

Moments moments(const SceneConfig& scene, const ChannelState& state,
                const PhaseProfile& profile) {
  const int k_ues = scene.ue_count();
  const VectorC profile_vec = profile.vec();
  VectorC pair(k_ues);
  for (int k = 0; k < k_ues; ++k)
    pair[k] = pair_response(state.a_ris.full, state.a_ue[k].full, profile_vec);
  MatrixC gram(k_ues, k_ues);
  for (int k = 0; k < k_ues; ++k)
    for (int i = 0; i < k_ues; ++i)
      gram(k, i) = state.a_ue[k].full.dot(state.a_ue[i].full);
  Eigen::VectorXd rho = Eigen::Map<const Eigen::VectorXd>(
      state.gains.cascade_nlos_power.data(), k_ues);
  return compute_moments(scene.bs_m_x * scene.bs_m_z, scene.ris_m_x * scene.ris_m_z,
                         scene.rician_bs_ris, scene.rician_ris_ue, rho, pair, gram);
}

SpBlock generate_block(const SceneConfig& scene, const ChannelState& state,
                       const PhaseProfile& profile, const SpConfig& sp, Rng& rng) {
  const int k_ues = scene.ue_count();
  const int m_b = scene.bs_m_x * scene.bs_m_z;
  const int tau = sp.pilot_length;

  SpBlock block;
  ChannelRealization real = sample_channel(scene, state, profile, rng);
  block.channels.resize(m_b, k_ues);
  for (int k = 0; k < k_ues; ++k) block.channels.col(k) = real.cascaded[k];

  block.data.resize(tau, k_ues);
  for (int k = 0; k < k_ues; ++k)
    for (int t = 0; t < tau; ++t) block.data(t, k) = rng.cgaussian(1.0);
  block.noise.resize(m_b, tau);
  for (int t = 0; t < tau; ++t)
    for (int r = 0; r < m_b; ++r) block.noise(r, t) = rng.cgaussian(1.0);

  block.rx = block.noise;
  for (int k = 0; k < k_ues; ++k)
    block.rx += block.channels.col(k) *
                (std::sqrt(sp.pilot_snr[k]) * sp.pilots.col(k).adjoint() +
                 std::sqrt(sp.data_snr[k]) * block.data.col(k).adjoint());
  return block;
}

Eigen::VectorXd lmmse_coefficients(const SpConfig& sp, const Eigen::VectorXd& cascade) {
  const int k_ues = sp.ue_count();
  const double tau = sp.pilot_length;
  double data_load = 1.0;  // unit AWGN
  for (int i = 0; i < k_ues; ++i) data_load += sp.data_snr[i] * cascade[i];
  Eigen::VectorXd coeff(k_ues);
  for (int k = 0; k < k_ues; ++k) {
    double qt = sp.pilot_snr[k] * tau;
    coeff[k] = std::sqrt(qt) * cascade[k] / (qt * cascade[k] + data_load);
  }
  return coeff;
}

LmmseEstimate despread_and_estimate(const MatrixC& rx, const SpConfig& sp,
                                    const Eigen::VectorXd& cascade) {
  LmmseEstimate est;
  est.despread = rx * sp.pilots / std::sqrt(double(sp.pilot_length));
  est.coeff = lmmse_coefficients(sp, cascade);
  est.gain.resize(sp.ue_count());
  for (int k = 0; k < sp.ue_count(); ++k)
    est.gain[k] = std::sqrt(sp.pilot_snr[k] * sp.pilot_length) * cascade[k] * est.coeff[k];
  est.estimates = est.despread * est.coeff.asDiagonal();
  return est;
}

McDetection mrc_detect(const SpBlock& block, const LmmseEstimate& est,
                       const SpConfig& sp, const Eigen::VectorXd& cascade) {
  const int k_ues = sp.ue_count();
  const int tau = sp.pilot_length;
  const int m_b = static_cast<int>(block.rx.rows());

  MatrixC cleaned = block.rx;
  for (int i = 0; i < k_ues; ++i)
    cleaned -= std::sqrt(sp.pilot_snr[i]) * est.estimates.col(i) * sp.pilots.col(i).adjoint();

  McDetection det;
  det.detected.resize(k_ues, tau);
  det.mean_signal.resize(k_ues, tau);
  det.gain_fluctuation.resize(k_ues, tau);
  det.self_residual.resize(k_ues, tau);
  det.cross_data.resize(k_ues, tau);
  det.estimation_error.resize(k_ues, tau);
  det.filtered_noise.resize(k_ues, tau);

  for (int k = 0; k < k_ues; ++k) {
    const VectorC g_hat = est.estimates.col(k);
    det.detected.row(k) = g_hat.adjoint() * cleaned;

    const double root_p = std::sqrt(sp.data_snr[k]);
    const double match = est.gain[k] / cascade[k];  // = c_k sqrt(q_k tau)
    const Complex own_gain = block.channels.col(k).squaredNorm();
    det.mean_signal.row(k) = root_p * est.gain[k] * double(m_b) * block.data.col(k).adjoint();
    det.gain_fluctuation.row(k) = root_p * (est.gain[k] / cascade[k]) *
                                  (own_gain - double(m_b) * cascade[k]) *
                                  block.data.col(k).adjoint();
    // Part of the estimate not collinear with the true channel.
    VectorC g_bar = g_hat - match * block.channels.col(k);
    det.self_residual.row(k) =
        root_p * (g_bar.adjoint() * block.channels.col(k))(0, 0) * block.data.col(k).adjoint();

    det.cross_data.row(k).setZero();
    for (int i = 0; i < k_ues; ++i) {
      if (i == k) continue;
      Complex mix = g_hat.dot(block.channels.col(i));
      det.cross_data.row(k) += std::sqrt(sp.data_snr[i]) * mix * block.data.col(i).adjoint();
    }

    det.estimation_error.row(k).setZero();
    for (int i = 0; i < k_ues; ++i) {
      VectorC err = block.channels.col(i) - est.estimates.col(i);
      Complex mix = g_hat.dot(err);
      det.estimation_error.row(k) += std::sqrt(sp.pilot_snr[i]) * mix * sp.pilots.col(i).adjoint();
    }

    det.filtered_noise.row(k) = g_hat.adjoint() * block.noise;
  }
  return det;
}

McRate empirical_rate(const SceneConfig& scene, const ChannelState& state,
                      const PhaseProfile& profile, const SpConfig& sp, int blocks,
                      std::uint64_t seed, const Eigen::VectorXd* receiver_coeff) {
  if (blocks < 1) throw std::invalid_argument("empirical_rate: need at least one block");
  const int k_ues = sp.ue_count();
  const int tau = sp.pilot_length;
  const Eigen::VectorXd cascade = cascade_powers(scene, state, profile);
  const Eigen::VectorXd coeff =
      receiver_coeff ? *receiver_coeff : lmmse_coefficients(sp, cascade);
  Eigen::VectorXd gain(k_ues);
  for (int k = 0; k < k_ues; ++k)
    gain[k] = std::sqrt(sp.pilot_snr[k] * tau) * cascade[k] * coeff[k];

  // Per-block statistics, slot-indexed so worker scheduling cannot matter.
  Eigen::MatrixXd sig(blocks, k_ues), fluct(blocks, k_ues), resid_norm(blocks, k_ues);
  std::vector<MatrixC> resid(k_ues, MatrixC(blocks, tau));

  parallel_for(blocks, [&](std::int64_t b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    SpBlock block = generate_block(scene, state, profile, sp, rng);
    LmmseEstimate est;
    est.despread = block.rx * sp.pilots / std::sqrt(double(tau));
    est.coeff = coeff;
    est.gain = gain;
    est.estimates = est.despread * coeff.asDiagonal();
    McDetection det = mrc_detect(block, est, sp, cascade);
    for (int k = 0; k < k_ues; ++k) {
      sig(b, k) = det.mean_signal.row(k).squaredNorm();
      fluct(b, k) = det.gain_fluctuation.row(k).squaredNorm();
      Eigen::RowVectorXcd r =
          det.detected.row(k) - det.mean_signal.row(k) - det.gain_fluctuation.row(k);
      resid_norm(b, k) = r.squaredNorm();
      resid[k].row(b) = r;
    }
  });

  McRate mc;
  mc.blocks = blocks;
  mc.sinr.resize(k_ues);
  mc.rate.resize(k_ues);
  mc.rate_se.resize(k_ues);
  const double n = blocks;
  for (int k = 0; k < k_ues; ++k) {
    const double s1 = sig.col(k).sum();
    const double s2 = fluct.col(k).sum();
    const double s3 = resid_norm.col(k).sum();
    const Eigen::RowVectorXcd mean_resid_sum = resid[k].colwise().sum();

    auto sinr_of = [&](double a1, double a2, double a3, double mean_resid2) {
      double den = a2 + a3 - mean_resid2;
      if (den <= 0.0 || a1 / den > kSinrCap) return kSinrCap;
      return a1 / den;
    };
    mc.sinr[k] = sinr_of(s1 / n, s2 / n, s3 / n, (mean_resid_sum / n).squaredNorm());
    mc.rate[k] = rate_from_sinr(mc.sinr[k]);

    if (blocks > 1) {
      // Leave-one-out replicates from the accumulated sums.
      double mean_rate = 0.0;
      Eigen::VectorXd rep(blocks);
      for (int b = 0; b < blocks; ++b) {
        double m = n - 1.0;
        Eigen::RowVectorXcd loo = (mean_resid_sum - resid[k].row(b)) / m;
        double gamma = sinr_of((s1 - sig(b, k)) / m, (s2 - fluct(b, k)) / m,
                               (s3 - resid_norm(b, k)) / m, loo.squaredNorm());
        rep[b] = rate_from_sinr(gamma);
        mean_rate += rep[b];
      }
      mean_rate /= n;
      double ss = (rep.array() - mean_rate).square().sum();
      mc.rate_se[k] = std::sqrt((n - 1.0) / n * ss);
    } else {
      mc.rate_se[k] = 0.0;
    }
  }
  return mc;
}

RateContext make_rate_context(const SceneConfig& scene, const ChannelState& state,
                              const SpConfig& sp) {
  const int k_ues = scene.ue_count();
  RateContext ctx;
  ctx.m_b = scene.bs_m_x * scene.bs_m_z;
  ctx.m_r = scene.ris_m_x * scene.ris_m_z;
  ctx.rician_bs_ris = scene.rician_bs_ris;
  ctx.rician_ris_ue = scene.rician_ris_ue;
  ctx.nlos_power = Eigen::Map<const Eigen::VectorXd>(
      state.gains.cascade_nlos_power.data(), k_ues);
  ctx.pair_basis.resize(ctx.m_r, k_ues);
  for (int k = 0; k < k_ues; ++k)
    ctx.pair_basis.col(k) = state.a_ris.full.conjugate().cwiseProduct(state.a_ue[k].full);
  ctx.los_gram.resize(k_ues, k_ues);
  for (int k = 0; k < k_ues; ++k)
    for (int i = 0; i < k_ues; ++i)
      ctx.los_gram(k, i) = state.a_ue[k].full.dot(state.a_ue[i].full);
  ctx.sp = sp;
  return ctx;
}

Moments moments(const RateContext& ctx, const PhaseProfile& profile) {
  VectorC pair = ctx.pair_basis.transpose() * profile.vec();
  return compute_moments(ctx.m_b, ctx.m_r, ctx.rician_bs_ris, ctx.rician_ris_ue,
                         ctx.nlos_power, pair, ctx.los_gram);
}

RateReport closed_form_rate(const RateContext& ctx, const PhaseProfile& profile) {
  return closed_form_core(ctx.m_b, ctx.sp, moments(ctx, profile));
}

double weighted_sum_rate(const RateContext& ctx, const PhaseProfile& profile) {
  try {
    return closed_form_rate(ctx, profile).weighted_sum;
  } catch (const std::runtime_error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

RateReport closed_form_rate(const SceneConfig& scene, const ChannelState& state,
                            const PhaseProfile& profile, const SpConfig& sp) {
  return closed_form_core(scene.bs_m_x * scene.bs_m_z, sp, moments(scene, state, profile));
}

double weighted_sum_rate(const SceneConfig& scene, const ChannelState& state,
                         const PhaseProfile& profile, const SpConfig& sp) {
  try {
    return closed_form_rate(scene, state, profile, sp).weighted_sum;
  } catch (const std::runtime_error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace risim
