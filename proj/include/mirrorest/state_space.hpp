#pragma once

// Linear state-space form of the nominal mirror driven by OU force, state
// (q, p, f):
//   dq/dt = p/m,  dp/dt = -m Omega^2 q - gamma p + f,  df/dt = -lambda f + w.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <sstream>

#include "mirrorest/errors.hpp"
#include "mirrorest/model.hpp"

namespace mirrorest {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using RowVec3 = Eigen::RowVector3d;

struct ContinuousModel {
  Mat3 drift;      // A
  Mat3 diffusion;  // B kappa B^T
};

inline ContinuousModel mirror_state_model(const MirrorParams& m, const ForceParams& f) {
  m.validate();
  f.validate();
  ContinuousModel c;
  c.drift << 0.0, 1.0 / m.mass, 0.0,       //
      -m.mass * m.omega * m.omega, -m.gamma, 1.0,  //
      0.0, 0.0, -f.lambda;
  c.diffusion.setZero();
  c.diffusion(2, 2) = f.kappa;
  return c;
}

/// Stationary covariance P solving A P + P A^T + Q = 0 (vectorised solve).
inline Mat3 stationary_covariance(const ContinuousModel& c) {
  Eigen::Matrix<double, 9, 9> k;
  const Mat3 I = Mat3::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          // column-major vec: (I kron A + A kron I) vec(P)
          k(3 * j + i, 3 * b + a) = I(j, b) * c.drift(i, a) + c.drift(j, b) * I(i, a);
  Eigen::Matrix<double, 9, 1> rhs;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) rhs(3 * j + i) = -c.diffusion(i, j);
  const Eigen::Matrix<double, 9, 1> v = k.fullPivLu().solve(rhs);
  Mat3 p;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) p(i, j) = v(3 * j + i);
  if (!(p.diagonal().array() > 0.0).all())
    throw DomainError("mirror model has no stationary state (undamped or unstable resonance)");
  return 0.5 * (p + p.transpose());
}

struct DiscreteModel {
  Mat3 transition;  // F = e^{A dt}
  Mat3 noise;       // Q_d = int_0^dt e^{As} B kappa B^T e^{A^T s} ds
};

/// Exact zero-order discretisation via Van Loan's block exponential.
inline DiscreteModel discretize(const ContinuousModel& c, double dt) {
  require(dt > 0.0, "time step must be positive");
  Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
  m.topLeftCorner<3, 3>() = -c.drift;
  m.topRightCorner<3, 3>() = c.diffusion;
  m.bottomRightCorner<3, 3>() = c.drift.transpose();
  const Eigen::Matrix<double, 6, 6> e = (m * dt).exp();
  DiscreteModel d;
  d.transition = e.bottomRightCorner<3, 3>().transpose();
  d.noise = d.transition * e.topRightCorner<3, 3>();
  d.noise = 0.5 * (d.noise + d.noise.transpose());
  return d;
}

struct RiccatiSolution {
  Mat3 prior;      // steady-state one-step prediction covariance P(k|k-1)
  Mat3 posterior;  // steady-state filtered covariance P(k|k)
  Vec3 gain;       // Kalman gain K = P H^T / (H P H^T + R)
  double closed_loop_radius;
  int iterations;
};

/// Steady-state covariance of a Kalman filter with scalar measurement
/// y = H x + v, var(v) = r, by iterating the Riccati recursion from the
/// stationary prior. The iteration runs in coordinates scaled by the prior
/// standard deviations to keep the 3x3 products well conditioned.
inline RiccatiSolution solve_filter_riccati(const DiscreteModel& d, const Mat3& stationary, const RowVec3& h,
                                            double r, int max_iterations = 5'000'000, double tol = 1e-13) {
  require(r >= 0.0, "measurement noise variance must be non-negative");
  const Vec3 scale = stationary.diagonal().cwiseSqrt();
  const Mat3 s = scale.asDiagonal();
  const Mat3 s_inv = scale.cwiseInverse().asDiagonal();
  const Mat3 f = s_inv * d.transition * s;
  const Mat3 q = s_inv * d.noise * s_inv;
  const RowVec3 hs = h * s;

  Mat3 p = s_inv * stationary * s_inv;
  int it = 0;
  for (; it < max_iterations; ++it) {
    const Vec3 ph = p * hs.transpose();
    const double innov = hs.dot(ph) + r;
    Mat3 post = p - ph * ph.transpose() / innov;
    Mat3 next = f * post * f.transpose() + q;
    next = 0.5 * (next + next.transpose());
    const double change = (next - p).norm();
    p = next;
    if (change <= tol * p.norm()) break;
    if (!p.allFinite()) throw ConvergenceError("Riccati iteration produced non-finite covariance");
  }
  if (it == max_iterations) throw ConvergenceError("Riccati iteration did not converge");

  const Vec3 ph = p * hs.transpose();
  const double innov = hs.dot(ph) + r;
  const Vec3 k_scaled = ph / innov;
  const Mat3 closed = f * (Mat3::Identity() - k_scaled * hs);
  const double radius = closed.eigenvalues().cwiseAbs().maxCoeff();
  if (!(radius < 1.0)) {
    std::ostringstream msg;
    msg << "Kalman closed loop is not stable (spectral radius " << radius << ")";
    throw ConvergenceError(msg.str());
  }
  RiccatiSolution out;
  out.prior = s * p * s;
  out.posterior = s * (p - ph * ph.transpose() / innov) * s;
  out.gain = s * k_scaled;
  out.closed_loop_radius = radius;
  out.iterations = it;
  return out;
}

}  // namespace mirrorest
