#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "qflux/lattice.hpp"

namespace qflux {

// A single-particle state sampled on a grid.
//
// bloch_k records quasi-periodicity: the samples are read as a function with
// psi(x + L) = exp(i * bloch_k * L) * psi(x). Plain ring states and dirichlet
// states use bloch_k = 0. The endpoint helpers below evaluate psi and its
// derivatives at the walls under that convention, which is what every
// boundary term in the library consumes.
struct WaveFunction {
  Grid1D grid;
  Eigen::VectorXcd samples;
  double time = 0.0;
  double bloch_k = 0.0;

  cplx seam_twist() const {
    if (!grid.is_periodic() || bloch_k == 0.0) return cplx(1.0, 0.0);
    return std::exp(cplx(0.0, bloch_k * grid.length));
  }

  cplx value0() const { return samples[0]; }

  cplx valueL() const {
    if (grid.is_periodic()) return seam_twist() * samples[0];
    return samples[grid.npoints - 1];
  }

  cplx slope0() const {
    const int n = grid.npoints;
    if (grid.is_periodic())
      return (samples[1] - samples[n - 1] / seam_twist()) / (2.0 * grid.h);
    return (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * grid.h);
  }

  cplx slopeL() const {
    const int n = grid.npoints;
    if (grid.is_periodic()) return seam_twist() * slope0();
    return (3.0 * samples[n - 1] - 4.0 * samples[n - 2] + samples[n - 3]) / (2.0 * grid.h);
  }

  cplx curve0() const {
    const int n = grid.npoints;
    const double h2 = grid.h * grid.h;
    if (grid.is_periodic())
      return (samples[1] - 2.0 * samples[0] + samples[n - 1] / seam_twist()) / h2;
    return (2.0 * samples[0] - 5.0 * samples[1] + 4.0 * samples[2] - samples[3]) / h2;
  }

  cplx curveL() const {
    const int n = grid.npoints;
    const double h2 = grid.h * grid.h;
    if (grid.is_periodic()) return seam_twist() * curve0();
    return (2.0 * samples[n - 1] - 5.0 * samples[n - 2] + 4.0 * samples[n - 3] -
            samples[n - 4]) / h2;
  }

  // L2 norm under the grid quadrature rule.
  double norm() const {
    return std::sqrt(std::abs(integrate(Eigen::VectorXd(samples.cwiseAbs2()), grid)));
  }

  void normalize() {
    const double nn = norm();
    if (!(nn > 0.0)) throw NumericalError("cannot normalize a zero state");
    samples /= nn;
  }

  Eigen::VectorXcd gradient() const { return derivative(samples, grid, seam_twist()); }
};

// Normalized plane wave exp(i * 2 pi mode x / L) / sqrt(L) on a ring. Its
// modulus is constant, so the rectangle-rule norm is exactly one.
//
// The phase at sample j is 2 pi (mode * j mod n) / n, reduced in exact
// integer arithmetic before any floating-point multiply. Without the
// reduction, samples near the seam carry phase arguments of order 2 pi mode
// whose representation rounding (~eps * mode) survives into difference
// quotients as eps * mode / h, which is exactly where seam-local boundary
// readings on fine grids are taken.
inline WaveFunction plane_wave(const Grid1D& g, int mode) {
  if (!g.is_periodic()) throw ParameterError("plane_wave needs a periodic grid");
  const int n = g.npoints;
  WaveFunction psi{g, Eigen::VectorXcd(n), 0.0, 0.0};
  const double amp = 1.0 / std::sqrt(g.length);
  for (int j = 0; j < n; ++j) {
    long long r = (static_cast<long long>(mode) * j) % n;
    if (r > n / 2) r -= n;
    if (r < -(n / 2)) r += n;
    const double theta = 2.0 * M_PI * static_cast<double>(r) / n;
    psi.samples[j] = amp * cplx(std::cos(theta), std::sin(theta));
  }
  return psi;
}

inline WaveFunction sample_state(const Grid1D& g, const std::function<cplx(double)>& f,
                                 double bloch_k = 0.0, double time = 0.0) {
  WaveFunction psi{g, Eigen::VectorXcd(g.npoints), time, bloch_k};
  for (int j = 0; j < g.npoints; ++j) psi.samples[j] = f(g.x(j));
  return psi;
}

// Snapshots of a propagated state at uniform spacing dt (the spacing between
// *stored* states, which may be a multiple of the integrator's step).
struct Trajectory {
  Grid1D grid;
  double dt = 0.0;
  double bloch_k = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXcd> states;

  int size() const { return static_cast<int>(states.size()); }

  WaveFunction state(int i) const {
    return WaveFunction{grid, states.at(i), times.at(i), bloch_k};
  }
};

} // namespace qflux
