#include "risim/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace risim {

namespace {

int round_to_int(double x, const char* what) {
  double r = std::round(x);
  if (std::abs(x - r) > 1e-6 * std::max(1.0, std::abs(x)))
    throw std::invalid_argument(std::string(what) + ": not an integral symbol count");
  return static_cast<int>(r);
}

}  // namespace

int SceneConfig::sensing_snapshots() const {
  return round_to_int(sensing_duration_s * bandwidth_hz, "sensing_snapshots");
}

int SceneConfig::block_symbols() const {
  return round_to_int(block_duration_s * bandwidth_hz, "block_symbols");
}

int SceneConfig::blocks_per_interval() const {
  return round_to_int((interval_duration_s - sensing_duration_s) / block_duration_s,
                      "blocks_per_interval");
}

void SceneConfig::validate() const {
  if (bs_power_w <= 0 || ue_power_w <= 0)
    throw std::invalid_argument("SceneConfig: transmit powers must be positive");
  if (rician_bs_ris < 0 || rician_ris_ue < 0)
    throw std::invalid_argument("SceneConfig: Rician factors must be nonnegative");
  if (carrier_hz <= 0 || bandwidth_hz <= 0)
    throw std::invalid_argument("SceneConfig: carrier and bandwidth must be positive");
  if (bs_m_x < 1 || bs_m_z < 1 || ris_m_x < 1 || ris_m_z < 1)
    throw std::invalid_argument("SceneConfig: array sizes must be >= 1");
  if ((bs_rotation.transpose() * bs_rotation - Matrix3::Identity()).norm() > 1e-12 ||
      (ris_rotation.transpose() * ris_rotation - Matrix3::Identity()).norm() > 1e-12)
    throw std::invalid_argument("SceneConfig: rotations must be orthonormal");
  if (ue_positions.empty())
    throw std::invalid_argument("SceneConfig: at least one UE required");
  int n_c = blocks_per_interval();
  if (n_c < 1) throw std::invalid_argument("SceneConfig: need at least one data block per interval");
  // Full protocol budget must tile the interval exactly.
  double budget = sensing_duration_s + n_c * block_duration_s;
  if (std::abs(budget - interval_duration_s) > 1e-9 * interval_duration_s)
    throw std::invalid_argument("SceneConfig: interval is not sensing + N_C blocks");
}

PhaseProfile PhaseProfile::from_phases(const Eigen::VectorXd& phases, int m_x, int m_z) {
  if (phases.size() != static_cast<Eigen::Index>(m_x) * m_z)
    throw std::invalid_argument("PhaseProfile: phase count mismatch");
  PhaseProfile p;
  p.profile.resize(m_x, m_z);
  for (int ix = 0; ix < m_x; ++ix)
    for (int iz = 0; iz < m_z; ++iz)
      p.profile(ix, iz) = std::polar(1.0, phases[ix * m_z + iz]);
  return p;
}

PhaseProfile PhaseProfile::random(int m_x, int m_z, Rng& rng) {
  Eigen::VectorXd phases(m_x * m_z);
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    phases[i] = rng.uniform(0.0, 2.0 * kPi);
  return from_phases(phases, m_x, m_z);
}

void PhaseProfile::validate() const {
  for (Eigen::Index i = 0; i < profile.size(); ++i)
    if (std::abs(std::abs(profile(i)) - 1.0) > 1e-12)
      throw std::invalid_argument("PhaseProfile: entries must have unit modulus");
}

std::vector<PhaseProfile> random_phase_sequence(int m_x, int m_z, int count,
                                                std::uint64_t seed) {
  std::vector<PhaseProfile> seq;
  seq.reserve(count);
  for (int t = 0; t < count; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    seq.push_back(PhaseProfile::random(m_x, m_z, rng));
  }
  return seq;
}

}  // namespace risim
