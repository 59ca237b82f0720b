#pragma once

#include "risim/types.hpp"

namespace risim {

// Azimuth/elevation pair in radians. For angles seen from the RIS both
// components stay in (0, pi); the math below works for any real values.
struct Angle {
  double azimuth = 0.0;
  double elevation = 0.0;
};

// Local coordinate frame: local = rotation * (global - origin).
struct Frame {
  Vector3 origin = Vector3::Zero();
  Matrix3 rotation = Matrix3::Identity();
};

// Uniform planar array in its local x-z plane, elements centered on the
// origin. Row (ix * m_z + iz) of element_positions holds the element at grid
// position (ix, iz); x is the outer index, z the inner one.
struct Upa {
  int m_x = 1;
  int m_z = 1;
  double spacing = 0.0;  // meters
  Eigen::Matrix<double, Eigen::Dynamic, 3> element_positions;

  static Upa make(int m_x, int m_z, double spacing);
  int size() const { return m_x * m_z; }
};

// Unit direction [sin(el)cos(az), sin(el)sin(az), cos(el)] and its partials.
Vector3 direction_vector(const Angle& psi);
Vector3 direction_vector_dazimuth(const Angle& psi);
Vector3 direction_vector_delevation(const Angle& psi);

struct Spherical {
  double range = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

// Range/azimuth/elevation of a global point seen from a local frame.
// Throws std::invalid_argument for coincident points.
Spherical cart_to_local_spherical(const Vector3& target, const Frame& frame);

// Inverse transform; range must be positive.
Vector3 local_spherical_to_cart(double range, const Angle& psi, const Frame& frame);

// Array response toward psi. full factors exactly as x (outer) Kronecker
// z (inner); every entry has unit modulus.
struct SteeringVector {
  VectorC full;
  VectorC x;
  VectorC z;
};
SteeringVector steering_vector(const Upa& upa, const Angle& psi, double wavelength);

// Analytic partials of the full response w.r.t. azimuth and elevation.
struct SteeringDerivatives {
  VectorC dazimuth;
  VectorC delevation;
};
SteeringDerivatives steering_derivatives(const Upa& upa, const Angle& psi,
                                         double wavelength);

}  // namespace risim
