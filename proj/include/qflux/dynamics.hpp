#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "qflux/quantum_ops.hpp"
#include "qflux/tridiag.hpp"
#include "qflux/wavefunction.hpp"

namespace qflux {

// ---------------------------------------------------------------------------
// Crank-Nicolson propagation
// ---------------------------------------------------------------------------

// One step solves (1 + i dt H/2) psi' = (1 - i dt H/2) psi. The step operator
// is a Cayley transform of the Hermitian H, hence exactly unitary and
// energy-conserving in exact arithmetic, unconditionally stable, and second
// order accurate in dt. The left-hand side is factored once at construction;
// each step costs one tridiagonal apply and one solve.
class Propagator {
public:
  Propagator(const HamiltonianSpec& spec, const Grid1D& g, double dt)
      : op_(make_operator(spec, g)), dt_(dt) {
    if (!(dt > 0.0)) throw ParameterError("Propagator: dt must be positive");
    const int m = op_.active_size();
    const int off = op_.active_offset();
    const cplx ihalf(0.0, dt / 2.0);

    Eigen::VectorXcd diag(m);
    for (int i = 0; i < m; ++i) diag[i] = 1.0 + ihalf * op_.diag[i + off];
    Eigen::VectorXcd sub = Eigen::VectorXcd::Constant(m - 1, ihalf * std::conj(op_.hop));
    Eigen::VectorXcd sup = Eigen::VectorXcd::Constant(m - 1, ihalf * op_.hop);
    const cplx ctr = op_.periodic ? ihalf * std::conj(op_.hop) : cplx(0.0, 0.0);
    const cplx cbl = op_.periodic ? ihalf * op_.hop : cplx(0.0, 0.0);
    solver_.emplace(std::move(sub), std::move(diag), std::move(sup), ctr, cbl);
    if (solver_->singular())
      throw NumericalError("Propagator: Cayley factor is singular (should be impossible)");
  }

  const HamiltonianOp& op() const { return op_; }
  double dt() const { return dt_; }

  void step(Eigen::VectorXcd& psi) const {
    const cplx ihalf(0.0, dt_ / 2.0);
    const Eigen::VectorXcd hpsi = op_.apply(psi);
    if (op_.periodic) {
      psi = solver_->solve(psi - ihalf * hpsi);
    } else {
      const int m = op_.active_size();
      Eigen::VectorXcd rhs =
          psi.segment(1, m) - ihalf * hpsi.segment(1, m);
      psi.segment(1, m) = solver_->solve(std::move(rhs));
      psi[0] = cplx(0.0, 0.0);
      psi[op_.grid.npoints - 1] = cplx(0.0, 0.0);
    }
  }

  // Propagate and record a snapshot every `stride` steps (including the
  // initial state), so the stored spacing is dt * stride.
  Trajectory run(const WaveFunction& psi0, int steps, int stride = 1) const {
    detail::check_size(psi0.samples.size(), op_.grid, "Propagator::run");
    if (steps < 1 || stride < 1 || steps % stride != 0)
      throw ParameterError("Propagator::run: steps must be a positive multiple of stride");

    Trajectory traj;
    traj.grid = op_.grid;
    traj.dt = dt_ * stride;
    traj.bloch_k = psi0.bloch_k;
    traj.times.reserve(steps / stride + 1);
    traj.states.reserve(steps / stride + 1);

    Eigen::VectorXcd psi = psi0.samples;
    traj.times.push_back(psi0.time);
    traj.states.push_back(psi);
    for (int s = 1; s <= steps; ++s) {
      step(psi);
      if (s % stride == 0) {
        traj.times.push_back(psi0.time + s * dt_);
        traj.states.push_back(psi);
      }
    }
    return traj;
  }

private:
  HamiltonianOp op_;
  double dt_;
  std::optional<CornerSolver> solver_;
};

// ---------------------------------------------------------------------------
// Infinite square well: closed forms
// ---------------------------------------------------------------------------

// Dipole matrix element <l|x|n> of the infinite well on [0, L] with
// unit-normalized sine states (quantum numbers from 1):
//   l = n:        L/2
//   l-n odd:     -8 L l n / (pi^2 (l^2 - n^2)^2)
//   l-n even:     0
inline double well_position_element(int l, int n, double L) {
  if (l < 1 || n < 1) throw ParameterError("well_position_element: indices start at 1");
  if (l == n) return L / 2.0;
  if ((l - n) % 2 == 0) return 0.0;
  const double d = static_cast<double>(l) * l - static_cast<double>(n) * n;
  return -8.0 * L * l * n / (M_PI * M_PI * d * d);
}

inline double well_energy(int n, double L) { return n * n * M_PI * M_PI / (2.0 * L * L); }

// d<x>/dt of the superposition sum_n c_n |n> exp(-i E_n t) with real
// coefficients (normalized internally) and continuum energies:
//   d<x>/dt = -2 sum_{l<n} c_l c_n (E_n - E_l) x_ln sin((E_n - E_l) t).
inline double well_velocity_series(const std::vector<double>& coeffs, double L, double t) {
  const int m = static_cast<int>(coeffs.size());
  if (m < 1) throw ParameterError("well_velocity_series: empty coefficient list");
  double norm2 = 0.0;
  for (double c : coeffs) norm2 += c * c;
  if (!(norm2 > 0.0)) throw ParameterError("well_velocity_series: zero coefficients");

  double sum = 0.0;
  for (int l = 1; l <= m; ++l)
    for (int n = l + 1; n <= m; ++n) {
      const double w = well_energy(n, L) - well_energy(l, L);
      sum += -2.0 * coeffs[l - 1] * coeffs[n - 1] / norm2 *
             w * well_position_element(l, n, L) * std::sin(w * t);
    }
  return sum;
}

// Off-diagonal position element from sampled states.
inline cplx position_matrix_element(const WaveFunction& a, const WaveFunction& b) {
  const SampledField xb = apply_observable(ObservableSpec::position(), b);
  SampledField dens;
  dens.samples = a.samples.conjugate().cwiseProduct(xb.samples);
  dens.v0 = std::conj(a.value0()) * xb.v0;
  dens.vL = std::conj(a.valueL()) * xb.vL;
  return integrate(dens, a.grid);
}

// ---------------------------------------------------------------------------
// Well superposition beat
// ---------------------------------------------------------------------------

// Propagate a real-coefficient superposition of the lowest well states with
// Crank-Nicolson and compare the measured d<x>/dt against the closed-form
// series, term by term:
//   measured  : centered difference of <x>(t)
//   formal    : <p>(t), the velocity theorem for a hard-walled box where the
//               position-current flux vanishes at both walls
//   series    : continuum sum over dipole elements
struct WellBeatResult {
  double beat_period = 0.0;      // 2 pi / (E_2 - E_1), continuum energies
  double peak_series = 0.0;      // max |series| over the beat
  double peak_measured = 0.0;    // max |centered d<x>/dt| over the beat
  double max_deviation = 0.0;    // max |measured - series| over the beat
  double max_formal_deviation = 0.0;  // max |measured - <p>| over the beat
  double norm_drift = 0.0;       // max |norm - 1| over the whole run
  double energy_drift = 0.0;     // max |<H> - <H>(0)| over the whole run
  double base_energy = 0.0;      // <H> at t = 0, the drift's reference scale
  int steps = 0;
  std::vector<double> times;     // interior snapshot times within the beat
  std::vector<double> measured;  // centered d<x>/dt at those times
  std::vector<double> series;    // closed-form series at those times
};

inline WellBeatResult well_beat_audit(double L, int npoints, double dt,
                                      const std::vector<double>& coeffs,
                                      int min_steps = 0) {
  const int m = static_cast<int>(coeffs.size());
  if (m < 2) throw ParameterError("well_beat_audit: need at least two coefficients");
  const Grid1D g = Grid1D::dirichlet(L, npoints);
  const auto spec = make_spec(g, Potential::zero());
  const auto sol = solve_states(spec, g, m);

  WaveFunction psi{g, Eigen::VectorXcd::Zero(g.npoints), 0.0, 0.0};
  for (int b = 0; b < m; ++b) psi.samples += coeffs[b] * sol.states[b].samples;
  psi.normalize();

  WellBeatResult out;
  out.beat_period = 2.0 * M_PI / (well_energy(2, L) - well_energy(1, L));
  const int beat_steps = static_cast<int>(std::ceil(out.beat_period / dt));
  out.steps = std::max(beat_steps, min_steps);

  Propagator prop(spec, g, dt);
  const double e0 = energy_expectation(prop.op(), psi.samples);
  out.base_energy = e0;

  // Scalar records per step: <x>, <p>, norm, <H>.
  std::vector<double> xs(out.steps + 1), ps(out.steps + 1);
  Eigen::VectorXcd cur = psi.samples;
  for (int s = 0; s <= out.steps; ++s) {
    if (s > 0) prop.step(cur);
    WaveFunction w{g, cur, s * dt, 0.0};
    xs[s] = std::real(expectation(ObservableSpec::position(), w));
    ps[s] = std::real(expectation(ObservableSpec::momentum(), w));
    out.norm_drift = std::max(out.norm_drift, std::abs(w.norm() - 1.0));
    out.energy_drift =
        std::max(out.energy_drift, std::abs(energy_expectation(prop.op(), cur) - e0));
  }

  for (int s = 1; s < out.steps; ++s) {
    const double t = s * dt;
    if (t > out.beat_period) break;
    const double vel = (xs[s + 1] - xs[s - 1]) / (2.0 * dt);
    const double ser = well_velocity_series(coeffs, L, t);
    out.times.push_back(t);
    out.measured.push_back(vel);
    out.series.push_back(ser);
    out.peak_series = std::max(out.peak_series, std::abs(ser));
    out.peak_measured = std::max(out.peak_measured, std::abs(vel));
    out.max_deviation = std::max(out.max_deviation, std::abs(vel - ser));
    out.max_formal_deviation = std::max(out.max_formal_deviation, std::abs(vel - ps[s]));
  }
  return out;
}

} // namespace qflux
