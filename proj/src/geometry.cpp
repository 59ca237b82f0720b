#include "risim/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace risim {

Upa Upa::make(int m_x, int m_z, double spacing) {
  if (m_x < 1 || m_z < 1) throw std::invalid_argument("Upa: element counts must be >= 1");
  if (spacing <= 0.0) throw std::invalid_argument("Upa: spacing must be positive");
  Upa upa;
  upa.m_x = m_x;
  upa.m_z = m_z;
  upa.spacing = spacing;
  upa.element_positions.resize(m_x * m_z, 3);
  const double cx = (m_x - 1) * spacing / 2.0;
  const double cz = (m_z - 1) * spacing / 2.0;
  for (int ix = 0; ix < m_x; ++ix) {
    for (int iz = 0; iz < m_z; ++iz) {
      int row = ix * m_z + iz;
      upa.element_positions(row, 0) = ix * spacing - cx;
      upa.element_positions(row, 1) = 0.0;
      upa.element_positions(row, 2) = iz * spacing - cz;
    }
  }
  return upa;
}

Vector3 direction_vector(const Angle& psi) {
  double se = std::sin(psi.elevation), ce = std::cos(psi.elevation);
  double sa = std::sin(psi.azimuth), ca = std::cos(psi.azimuth);
  return {se * ca, se * sa, ce};
}

Vector3 direction_vector_dazimuth(const Angle& psi) {
  double se = std::sin(psi.elevation);
  double sa = std::sin(psi.azimuth), ca = std::cos(psi.azimuth);
  return {-se * sa, se * ca, 0.0};
}

Vector3 direction_vector_delevation(const Angle& psi) {
  double se = std::sin(psi.elevation), ce = std::cos(psi.elevation);
  double sa = std::sin(psi.azimuth), ca = std::cos(psi.azimuth);
  return {ce * ca, ce * sa, -se};
}

Spherical cart_to_local_spherical(const Vector3& target, const Frame& frame) {
  Vector3 delta = frame.rotation * (target - frame.origin);
  double r = delta.norm();
  if (r < 1e-12) throw std::invalid_argument("cart_to_local_spherical: coincident points");
  double cos_el = std::clamp(delta.z() / r, -1.0, 1.0);
  return {r, std::atan2(delta.y(), delta.x()), std::acos(cos_el)};
}

Vector3 local_spherical_to_cart(double range, const Angle& psi, const Frame& frame) {
  if (range <= 0.0) throw std::invalid_argument("local_spherical_to_cart: range must be positive");
  return frame.origin + frame.rotation.transpose() * (range * direction_vector(psi));
}

namespace {

// One axis factor: exp(j zeta) * [1, exp(-j mu d), ..., exp(-j mu (M-1) d)]
// with the centering phase zeta = mu (M-1) d / 2.
VectorC axis_factor(int count, double mu, double spacing) {
  VectorC v(count);
  double zeta = mu * (count - 1) * spacing / 2.0;
  for (int i = 0; i < count; ++i) v[i] = std::polar(1.0, zeta - mu * i * spacing);
  return v;
}

}  // namespace

SteeringVector steering_vector(const Upa& upa, const Angle& psi, double wavelength) {
  Vector3 omega = direction_vector(psi);
  double k = 2.0 * kPi / wavelength;
  double mu_x = -k * omega.x();
  double mu_z = -k * omega.z();
  SteeringVector s;
  s.x = axis_factor(upa.m_x, mu_x, upa.spacing);
  s.z = axis_factor(upa.m_z, mu_z, upa.spacing);
  s.full.resize(upa.size());
  for (int ix = 0; ix < upa.m_x; ++ix)
    for (int iz = 0; iz < upa.m_z; ++iz) s.full[ix * upa.m_z + iz] = s.x[ix] * s.z[iz];
  return s;
}

SteeringDerivatives steering_derivatives(const Upa& upa, const Angle& psi,
                                         double wavelength) {
  SteeringVector s = steering_vector(upa, psi, wavelength);
  double k = 2.0 * kPi / wavelength;
  Vector3 dmu_az = -k * direction_vector_dazimuth(psi);
  Vector3 dmu_el = -k * direction_vector_delevation(psi);
  // Entry i of the response is exp(-j mu . n_i), so the partial is
  // -j (n_i . dmu) times the entry itself.
  Eigen::VectorXd w_az = upa.element_positions * dmu_az;
  Eigen::VectorXd w_el = upa.element_positions * dmu_el;
  SteeringDerivatives d;
  d.dazimuth = -kJ * s.full.cwiseProduct(w_az.cast<Complex>());
  d.delevation = -kJ * s.full.cwiseProduct(w_el.cast<Complex>());
  return d;
}

}  // namespace risim
