#pragma once

#include <cstdint>
#include <vector>

#include "risim/geometry.hpp"
#include "risim/rng.hpp"
#include "risim/types.hpp"

namespace risim {

// Static geometry, physics and protocol parameters for one deployment.
// Powers are stored in watts, durations in seconds, angles in radians;
// unit conversions happen only at the config/CLI boundary.
struct SceneConfig {
  Vector3 bs_position{5.0, 5.0, 9.0};
  Vector3 ris_position{0.0, 0.0, 10.0};
  Matrix3 bs_rotation = Matrix3::Identity();
  Matrix3 ris_rotation = Matrix3::Identity();

  int bs_m_x = 10, bs_m_z = 10;
  int ris_m_x = 10, ris_m_z = 10;
  double spacing_wavelengths = 0.5;  // element spacing as a fraction of lambda

  double carrier_hz = 28e9;
  double bs_power_w = 0.5;
  double ue_power_w = 0.2;
  double noise_density_w_hz = dbm_to_watt(-174.0);  // per Hz
  double noise_figure = db_to_linear(8.0);          // linear
  double bandwidth_hz = 1e5;
  double path_loss_exponent = 2.0;

  double rician_bs_ris = 50.0;  // LOS-to-NLOS power ratio on the BS-RIS link
  double rician_ris_ue = 50.0;  // same on every RIS-UE link
  bool pure_los = false;        // draw channels without any NLOS fluctuation

  double sensing_duration_s = 1e-3;   // pure-pilot slot per location interval
  double block_duration_s = 1e-3;     // one channel coherence block
  double interval_duration_s = 1.0;   // one location coherence interval

  std::vector<Vector3> ue_positions;
  double ue_height = 0.0;
  std::uint64_t sensing_phase_seed = 7001;

  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  double element_spacing() const { return spacing_wavelengths * wavelength(); }
  Upa bs_upa() const { return Upa::make(bs_m_x, bs_m_z, element_spacing()); }
  Upa ris_upa() const { return Upa::make(ris_m_x, ris_m_z, element_spacing()); }
  Frame bs_frame() const { return {bs_position, bs_rotation}; }
  Frame ris_frame() const { return {ris_position, ris_rotation}; }

  int ue_count() const { return static_cast<int>(ue_positions.size()); }
  int sensing_snapshots() const;       // symbols in the pure-pilot slot
  int block_symbols() const;           // symbols per coherence block
  int blocks_per_interval() const;     // data blocks per location interval
  double awgn_power_w() const { return noise_density_w_hz * bandwidth_hz * noise_figure; }

  // Checks invariants (positive powers, orthonormal rotations, integral
  // protocol budget). Throws std::invalid_argument on violation.
  void validate() const;
};

// RIS reflection profile: unit-modulus entries, x along rows, z along columns.
struct PhaseProfile {
  MatrixC profile;

  static PhaseProfile from_phases(const Eigen::VectorXd& phases, int m_x, int m_z);
  static PhaseProfile random(int m_x, int m_z, Rng& rng);

  VectorC vec() const { return vec_row_major(profile); }
  int m_x() const { return static_cast<int>(profile.rows()); }
  int m_z() const { return static_cast<int>(profile.cols()); }
  void validate() const;  // unit modulus within 1e-12
};

// Independent uniform phases per element per snapshot.
std::vector<PhaseProfile> random_phase_sequence(int m_x, int m_z, int count,
                                                std::uint64_t seed);

}  // namespace risim
