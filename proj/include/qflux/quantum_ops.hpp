#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qflux/errors.hpp"
#include "qflux/lattice.hpp"
#include "qflux/potentials.hpp"
#include "qflux/tridiag.hpp"
#include "qflux/wavefunction.hpp"

namespace qflux {

// ---------------------------------------------------------------------------
// Hamiltonian description
// ---------------------------------------------------------------------------

// H = (p + A + k)^2 / 2 + V(x) in units hbar = m = 1, with uniform vector
// potential A and an optional explicit crystal momentum label k. A and k
// enter the kinetic term identically; they are kept apart because only an
// engaged k makes the parameter-derivative observable dynamical.
struct HamiltonianSpec {
  Eigen::VectorXd potential;               // V sampled on the grid
  std::optional<Potential> form;           // analytic description when known
  double vector_potential = 0.0;           // uniform A
  std::optional<double> crystal_momentum;  // explicit k carried by H(k)

  double coupling() const { return vector_potential + crystal_momentum.value_or(0.0); }
};

inline HamiltonianSpec make_spec(const Grid1D& g, const Potential& v, double A = 0.0,
                                 std::optional<double> k = std::nullopt) {
  return HamiltonianSpec{v.sample(g), v, A, k};
}

// Slope of the potential: analytic when the spec knows its functional form,
// a centered difference of the samples otherwise.
inline Eigen::VectorXd potential_slope(const HamiltonianSpec& spec, const Grid1D& g) {
  detail::check_size(spec.potential.size(), g, "potential_slope");
  if (spec.form) return spec.form->sample_slope(g);
  return derivative(spec.potential, g);
}

// The kinetic coupling is discretized as a link phase: hopping
// -exp(i a h)/(2 h^2) between neighbours, 1/h^2 + V_j on the diagonal.
// Unlike adding the symmetrized cross term a * (-i d/dx) directly, the link
// phase keeps the lattice Hamiltonian exactly unitarily equivalent under
// a -> a + 2 pi/L (the gauge step a ring must not distinguish), so spectra
// shift modes one slot without any O(h^2) leakage.
inline cplx hop_value(const HamiltonianSpec& spec, const Grid1D& g) {
  const double theta = spec.coupling() * g.h;
  return -std::exp(cplx(0.0, theta)) / (2.0 * g.h * g.h);
}

// Dense Hermitian matrix, used for small grids and as the cross-check oracle
// for the structured path. Periodic grids produce the full n x n ring matrix
// including wrap corners; dirichlet grids produce the interior block with the
// walls eliminated, so its spectrum is exactly the constrained problem's.
inline Eigen::MatrixXcd build_hamiltonian(const HamiltonianSpec& spec, const Grid1D& g) {
  detail::check_size(spec.potential.size(), g, "build_hamiltonian");
  const int n = g.npoints;
  const cplx hop = hop_value(spec, g);
  const double kin = 1.0 / (g.h * g.h);

  if (g.is_periodic()) {
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      H(j, j) = kin + spec.potential[j];
      const int jn = (j + 1) % n;
      H(j, jn) = hop;
      H(jn, j) = std::conj(hop);
    }
    return H;
  }
  const int m = n - 2;
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    H(i, i) = kin + spec.potential[i + 1];
    if (i + 1 < m) {
      H(i, i + 1) = hop;
      H(i + 1, i) = std::conj(hop);
    }
  }
  return H;
}

// Tridiagonal-plus-corners form of the same operator; every scenario-scale
// path (eigensolve, propagation, expectation values) goes through this.
struct HamiltonianOp {
  Grid1D grid;
  Eigen::VectorXd diag;  // 1/h^2 + V_j over the full grid
  cplx hop;              // entry (j, j+1); conjugate below the diagonal
  bool periodic = true;

  int active_size() const { return periodic ? grid.npoints : grid.npoints - 2; }
  int active_offset() const { return periodic ? 0 : 1; }

  // Matrix-vector product in the active index space (interior only for
  // dirichlet walls, full ring with wrap otherwise).
  Eigen::VectorXcd apply_active(const Eigen::VectorXcd& x) const {
    const int m = active_size();
    if (x.size() != m) throw ParameterError("apply_active: size mismatch");
    const int off = active_offset();
    Eigen::VectorXcd y(m);
    const cplx hconj = std::conj(hop);
    for (int i = 0; i < m; ++i) {
      cplx acc = diag[i + off] * x[i];
      if (i + 1 < m) acc += hop * x[i + 1];
      else if (periodic) acc += hop * x[0];
      if (i > 0) acc += hconj * x[i - 1];
      else if (periodic) acc += hconj * x[m - 1];
      y[i] = acc;
    }
    return y;
  }

  // Product on full-grid samples; dirichlet walls stay pinned at zero.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const {
    detail::check_size(x.size(), grid, "HamiltonianOp::apply");
    if (periodic) return apply_active(x);
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(grid.npoints);
    y.segment(1, grid.npoints - 2) =
        apply_active(x.segment(1, grid.npoints - 2));
    return y;
  }

  // Infinity-norm bound, the scale for residual thresholds.
  double opnorm() const { return diag.cwiseAbs().maxCoeff() + 2.0 * std::abs(hop); }
};

inline HamiltonianOp make_operator(const HamiltonianSpec& spec, const Grid1D& g) {
  detail::check_size(spec.potential.size(), g, "make_operator");
  HamiltonianOp op{g, Eigen::VectorXd(g.npoints), hop_value(spec, g), g.is_periodic()};
  const double kin = 1.0 / (g.h * g.h);
  for (int j = 0; j < g.npoints; ++j) op.diag[j] = kin + spec.potential[j];
  return op;
}

// <H> for grid-normalized samples.
inline double energy_expectation(const HamiltonianOp& op, const Eigen::VectorXcd& samples) {
  const cplx e = samples.dot(op.apply(samples)) * op.grid.h;
  return e.real();
}

// ---------------------------------------------------------------------------
// Eigensolvers
// ---------------------------------------------------------------------------

struct EigenSolution {
  Eigen::VectorXd energies;
  std::vector<WaveFunction> states;
};

// Rotate a vector so its largest-magnitude component is real and positive.
// Symmetric profiles produce exact modulus ties (a mirror pair of lobes),
// which solver noise would break arbitrarily, so the winner is the first
// index whose modulus lies within a relative whisker of the maximum.
// Returns the phase that was removed.
inline cplx gauge_fix_phase(Eigen::VectorXcd& v) {
  double mag = 0.0;
  for (int j = 0; j < v.size(); ++j) mag = std::max(mag, std::abs(v[j]));
  if (mag == 0.0) throw GaugeError("cannot gauge-fix a zero vector");
  int best = 0;
  for (int j = 0; j < v.size(); ++j) {
    if (std::abs(v[j]) >= mag * (1.0 - 1e-6)) { best = j; break; }
  }
  const cplx phase = v[best] / std::abs(v[best]);
  v *= std::conj(phase);
  return phase;
}

namespace detail {

// Shared post-processing for both eigensolver routes. Input states are
// full-grid, unit in the plain l2 sense; output states are quadrature
// normalized, degeneracy-resolved and phase-fixed.
//
// Exactly degenerate levels (plane-wave pairs on a ring) come out of any
// eigensolver in an arbitrary unitary mixture. Within each near-degenerate
// group we diagonalize the momentum operator and order by ascending <p>,
// which makes the returned basis a deterministic function of the problem.
inline EigenSolution finalize_states(Eigen::VectorXd energies,
                                     std::vector<Eigen::VectorXcd> vecs,
                                     const Grid1D& g) {
  const int count = static_cast<int>(vecs.size());
  const double escale = std::max(1.0, energies.cwiseAbs().maxCoeff());
  const double sqh = std::sqrt(g.h);
  for (auto& v : vecs) v /= sqh;

  int lo = 0;
  while (lo < count) {
    int hi = lo + 1;
    while (hi < count && std::abs(energies[hi] - energies[hi - 1]) <= 1e-8 * escale) ++hi;
    const int m = hi - lo;
    if (m > 1) {
      Eigen::MatrixXcd P(m, m);
      std::vector<Eigen::VectorXcd> grads(m);
      for (int b = 0; b < m; ++b) grads[b] = derivative(vecs[lo + b], g);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          Eigen::VectorXcd integrand =
              vecs[lo + a].conjugate().cwiseProduct(cplx(0.0, -1.0) * grads[b]);
          P(a, b) = integrate(integrand, g);
        }
      P = ((P + P.adjoint()) / 2.0).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(P);
      std::vector<Eigen::VectorXcd> rotated(m);
      for (int b = 0; b < m; ++b) {
        Eigen::VectorXcd w = Eigen::VectorXcd::Zero(g.npoints);
        for (int a = 0; a < m; ++a) w += es.eigenvectors()(a, b) * vecs[lo + a];
        rotated[b] = std::move(w);
      }
      for (int b = 0; b < m; ++b) vecs[lo + b] = std::move(rotated[b]);
    }
    lo = hi;
  }

  EigenSolution sol;
  sol.energies = std::move(energies);
  sol.states.reserve(count);
  for (auto& v : vecs) {
    gauge_fix_phase(v);
    sol.states.push_back(WaveFunction{g, std::move(v), 0.0, 0.0});
  }
  return sol;
}

} // namespace detail

// Dense route: verify Hermiticity, diagonalize, keep the lowest `count`.
// The matrix must come from build_hamiltonian on the same grid (interior
// block for dirichlet); returned states live on the full grid.
inline EigenSolution solve_eigen(const Eigen::MatrixXcd& H, int count, const Grid1D& g) {
  const int expected = g.is_periodic() ? g.npoints : g.npoints - 2;
  if (H.rows() != expected || H.cols() != expected)
    throw ParameterError("solve_eigen: matrix size does not match grid");
  if (count < 1 || count > expected)
    throw ParameterError("solve_eigen: invalid state count");

  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  const double asym = (H - H.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale)
    throw IntegrityError("solve_eigen: matrix is not Hermitian within tolerance");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  if (es.info() != Eigen::Success)
    throw NumericalError("solve_eigen: dense diagonalization failed");

  Eigen::VectorXd energies = es.eigenvalues().head(count);
  std::vector<Eigen::VectorXcd> vecs(count);
  for (int i = 0; i < count; ++i) {
    if (g.is_periodic()) {
      vecs[i] = es.eigenvectors().col(i);
    } else {
      vecs[i] = Eigen::VectorXcd::Zero(g.npoints);
      vecs[i].segment(1, expected) = es.eigenvectors().col(i);
    }
  }
  return detail::finalize_states(std::move(energies), std::move(vecs), g);
}

// Structured route: shift-and-invert subspace iteration on the tridiagonal
// plus-corners form. The kinetic symbol is nonnegative, so any shift below
// min(V) keeps H - sigma positive definite; a handful of inverse iterations
// then resolves the low end of the spectrum at O(n) per pass.
inline EigenSolution solve_states(const HamiltonianSpec& spec, const Grid1D& g, int count) {
  const HamiltonianOp op = make_operator(spec, g);
  const int m = op.active_size();
  const int off = op.active_offset();
  if (count < 1 || count > m) throw ParameterError("solve_states: invalid state count");

  const double vmin = spec.potential.minCoeff();
  const double opnorm = op.opnorm();

  for (int attempt = 0; attempt < 5; ++attempt) {
    const double sigma = vmin - 1.0 - 0.37 * attempt;
    const int block = std::min(m, count + 4 + 4 * attempt);

    Eigen::VectorXcd dshift(m);
    for (int i = 0; i < m; ++i) dshift[i] = op.diag[i + off] - sigma;
    Eigen::VectorXcd sub = Eigen::VectorXcd::Constant(m - 1, std::conj(op.hop));
    Eigen::VectorXcd sup = Eigen::VectorXcd::Constant(m - 1, op.hop);
    const cplx ctr = op.periodic ? std::conj(op.hop) : cplx(0.0, 0.0);
    const cplx cbl = op.periodic ? op.hop : cplx(0.0, 0.0);
    CornerSolver solver(std::move(sub), std::move(dshift), std::move(sup), ctr, cbl);
    if (solver.singular()) continue;

    // Deterministic start block.
    std::mt19937_64 rng(0x5eed0f1uLL + 97uLL * static_cast<std::uint64_t>(attempt));
    auto unit = [&rng]() {
      return 2.0 * std::ldexp(static_cast<double>(rng() >> 11), -53) - 1.0;
    };
    Eigen::MatrixXcd X(m, block);
    for (int c = 0; c < block; ++c)
      for (int r = 0; r < m; ++r) X(r, c) = cplx(unit(), unit());

    Eigen::VectorXd theta;
    Eigen::MatrixXcd HX;
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    bool good = false;

    for (int iter = 0; iter < 400; ++iter) {
      for (int c = 0; c < block; ++c) X.col(c) = solver.solve(X.col(c));
      Eigen::HouseholderQR<Eigen::MatrixXcd> qr(X);
      Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(m, block);
      Eigen::MatrixXcd HQ(m, block);
      for (int c = 0; c < block; ++c) HQ.col(c) = op.apply_active(Q.col(c));
      Eigen::MatrixXcd B = Q.adjoint() * HQ;
      B = ((B + B.adjoint()) / 2.0).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> small(B);
      X = Q * small.eigenvectors();
      HX = HQ * small.eigenvectors();
      theta = small.eigenvalues();

      double res = 0.0;
      for (int i = 0; i < count; ++i)
        res = std::max(res, (HX.col(i) - theta[i] * X.col(i)).norm());

      if (res < 1e-14 * opnorm) { good = true; break; }
      if (res < best * 0.5) {
        best = res;
        stall = 0;
      } else {
        best = std::min(best, res);
        if (++stall >= 8) { good = (best < 1e-11 * opnorm); break; }
      }
    }
    if (!good) continue;

    Eigen::VectorXd energies = theta.head(count);
    std::vector<Eigen::VectorXcd> vecs(count);
    for (int i = 0; i < count; ++i) {
      if (op.periodic) {
        vecs[i] = X.col(i);
      } else {
        vecs[i] = Eigen::VectorXcd::Zero(g.npoints);
        vecs[i].segment(1, m) = X.col(i);
      }
    }
    return detail::finalize_states(std::move(energies), std::move(vecs), g);
  }
  throw NumericalError("solve_states: inverse iteration failed to converge");
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

// Catalog of observables the audit machinery understands. Each entry knows
// how to act on a state including the analytic extension of B psi at the
// walls, and has a matching entry in the closed-form commutator table below.
struct ObservableSpec {
  enum class Kind {
    identity,
    position,
    momentum,
    kinematic_momentum,
    function_of_x,
    parameter_derivative
  };

  // parameter_derivative carries the precomputed k-derivative of an
  // eigenstate family: the field itself plus its spatial derivative, each
  // member differentiated under its own Bloch twist.
  struct KDerivative {
    SampledField w;
    Eigen::VectorXcd w_prime;
  };

  Kind kind = Kind::identity;
  double momentum_offset = 0.0;  // kinematic momentum: -i d/dx + offset
  std::function<double(double)> f, fx, fxx;
  std::shared_ptr<const KDerivative> k_derivative;
  std::string label = "identity";

  static ObservableSpec identity() { return ObservableSpec{}; }

  static ObservableSpec position() {
    ObservableSpec b;
    b.kind = Kind::position;
    b.label = "position";
    return b;
  }

  static ObservableSpec momentum() {
    ObservableSpec b;
    b.kind = Kind::momentum;
    b.label = "momentum";
    return b;
  }

  static ObservableSpec kinematic_momentum(double offset) {
    ObservableSpec b;
    b.kind = Kind::kinematic_momentum;
    b.momentum_offset = offset;
    b.label = "kinematic_momentum";
    return b;
  }

  // f must be periodic on ring scenarios; fx, fxx are its derivatives.
  static ObservableSpec function_of_x(std::function<double(double)> f,
                                      std::function<double(double)> fx,
                                      std::function<double(double)> fxx,
                                      std::string label = "function_of_x") {
    ObservableSpec b;
    b.kind = Kind::function_of_x;
    b.f = std::move(f);
    b.fx = std::move(fx);
    b.fxx = std::move(fxx);
    b.label = std::move(label);
    return b;
  }

  static ObservableSpec parameter_derivative(SampledField w, Eigen::VectorXcd w_prime) {
    ObservableSpec b;
    b.kind = Kind::parameter_derivative;
    b.k_derivative = std::make_shared<KDerivative>(KDerivative{std::move(w), std::move(w_prime)});
    b.label = "k_derivative";
    return b;
  }
};

// B acting on psi, with endpoint extension.
inline SampledField apply_observable(const ObservableSpec& B, const WaveFunction& psi) {
  const Grid1D& g = psi.grid;
  const int n = g.npoints;
  SampledField out;
  using K = ObservableSpec::Kind;

  switch (B.kind) {
    case K::identity: {
      out.samples = psi.samples;
      out.v0 = psi.value0(); out.vL = psi.valueL();
      out.d0 = psi.slope0(); out.dL = psi.slopeL();
      return out;
    }
    case K::position: {
      out.samples.resize(n);
      for (int j = 0; j < n; ++j) out.samples[j] = g.x(j) * psi.samples[j];
      out.v0 = 0.0;
      out.vL = g.length * psi.valueL();
      out.d0 = psi.value0();
      out.dL = psi.valueL() + g.length * psi.slopeL();
      return out;
    }
    case K::momentum:
    case K::kinematic_momentum: {
      const cplx mi(0.0, -1.0);
      out.samples = mi * psi.gradient();
      out.v0 = mi * psi.slope0(); out.vL = mi * psi.slopeL();
      out.d0 = mi * psi.curve0(); out.dL = mi * psi.curveL();
      if (B.kind == K::kinematic_momentum) {
        const double a = B.momentum_offset;
        out.samples += a * psi.samples;
        out.v0 += a * psi.value0(); out.vL += a * psi.valueL();
        out.d0 += a * psi.slope0(); out.dL += a * psi.slopeL();
      }
      return out;
    }
    case K::function_of_x: {
      if (!B.f || !B.fx) throw ParameterError("function_of_x observable lacks derivatives");
      out.samples.resize(n);
      for (int j = 0; j < n; ++j) out.samples[j] = B.f(g.x(j)) * psi.samples[j];
      out.v0 = B.f(0.0) * psi.value0();
      out.vL = B.f(g.length) * psi.valueL();
      out.d0 = B.fx(0.0) * psi.value0() + B.f(0.0) * psi.slope0();
      out.dL = B.fx(g.length) * psi.valueL() + B.f(g.length) * psi.slopeL();
      return out;
    }
    case K::parameter_derivative: {
      if (!B.k_derivative) throw ParameterError("parameter_derivative observable is empty");
      detail::check_size(B.k_derivative->w.samples.size(), g, "parameter_derivative");
      return B.k_derivative->w;
    }
  }
  throw IntegrityError("apply_observable: unhandled observable kind");
}

// <B> under the endpoint-corrected quadrature.
inline cplx expectation(const ObservableSpec& B, const WaveFunction& psi) {
  const SampledField bp = apply_observable(B, psi);
  SampledField dens;
  dens.samples = psi.samples.conjugate().cwiseProduct(bp.samples);
  dens.v0 = std::conj(psi.value0()) * bp.v0;
  dens.vL = std::conj(psi.valueL()) * bp.vL;
  return integrate(dens, psi.grid);
}

// Closed-form commutator table: samples and wall extension of [H, B] psi.
//
//   [H, x]    psi = -i Pi psi                      Pi = -i d/dx + a
//   [H, p]    psi =  i V' psi                      (same for p + a)
//   [H, f(x)] psi = -f' psi' - f'' psi / 2 - i a f' psi
//   [H, d/dk] psi = -Pi psi    when H carries k explicitly, else 0
//
// Evaluating these analytically instead of multiplying discrete matrices
// keeps the formal side of the balance free of avoidable stencil noise.
inline SampledField formal_commutator_apply(const HamiltonianSpec& spec,
                                            const ObservableSpec& B,
                                            const WaveFunction& psi) {
  const Grid1D& g = psi.grid;
  const int n = g.npoints;
  const double a = spec.coupling();
  const cplx ia(0.0, a);
  SampledField out;
  using K = ObservableSpec::Kind;

  switch (B.kind) {
    case K::identity: {
      out.samples = Eigen::VectorXcd::Zero(n);
      return out;
    }
    case K::position: {
      const Eigen::VectorXcd grad = psi.gradient();
      out.samples = -grad - ia * psi.samples;
      out.v0 = -psi.slope0() - ia * psi.value0();
      out.vL = -psi.slopeL() - ia * psi.valueL();
      out.d0 = -psi.curve0() - ia * psi.slope0();
      out.dL = -psi.curveL() - ia * psi.slopeL();
      return out;
    }
    case K::momentum:
    case K::kinematic_momentum: {
      const Eigen::VectorXd vp = potential_slope(spec, g);
      const cplx i1(0.0, 1.0);
      out.samples = i1 * vp.cast<cplx>().cwiseProduct(psi.samples);
      const double vp0 = spec.form ? spec.form->slope(0.0, g.length) : vp[0];
      const double vpL = spec.form ? spec.form->slope(g.length, g.length)
                                   : (g.is_periodic() ? vp[0] : vp[n - 1]);
      out.v0 = i1 * vp0 * psi.value0();
      out.vL = i1 * vpL * psi.valueL();
      return out;
    }
    case K::function_of_x: {
      if (!B.f || !B.fx || !B.fxx)
        throw ParameterError("function_of_x commutator needs f, f', f''");
      const Eigen::VectorXcd grad = psi.gradient();
      out.samples.resize(n);
      for (int j = 0; j < n; ++j) {
        const double x = g.x(j);
        out.samples[j] = -B.fx(x) * grad[j] - 0.5 * B.fxx(x) * psi.samples[j] -
                         ia * B.fx(x) * psi.samples[j];
      }
      out.v0 = -B.fx(0.0) * psi.slope0() - 0.5 * B.fxx(0.0) * psi.value0() -
               ia * B.fx(0.0) * psi.value0();
      out.vL = -B.fx(g.length) * psi.slopeL() - 0.5 * B.fxx(g.length) * psi.valueL() -
               ia * B.fx(g.length) * psi.valueL();
      return out;
    }
    case K::parameter_derivative: {
      if (!spec.crystal_momentum) {
        out.samples = Eigen::VectorXcd::Zero(n);
        return out;
      }
      // -Pi psi with Pi = -i d/dx + a
      const cplx i1(0.0, 1.0);
      const Eigen::VectorXcd grad = psi.gradient();
      out.samples = i1 * grad - a * psi.samples;
      out.v0 = i1 * psi.slope0() - a * psi.value0();
      out.vL = i1 * psi.slopeL() - a * psi.valueL();
      return out;
    }
  }
  throw IntegrityError("formal_commutator_apply: unhandled observable kind");
}

// ---------------------------------------------------------------------------
// Bloch families and the k-derivative observable
// ---------------------------------------------------------------------------

// Band eigenstates at k - delta, k, k + delta, assembled as full Bloch waves
// psi = exp(i kappa x) u_kappa with the periodic factors solved per member
// and the outer members phase-aligned to the central one (parallel
// transport: <psi_c | psi_pm> made real positive).
struct BlochFamily {
  double k = 0.0, delta = 0.0;
  int band = 0;
  WaveFunction minus, center, plus;
  Eigen::Vector3d energies;  // E(k-delta), E(k), E(k+delta)
};

inline BlochFamily bloch_family(const Potential& v, const Grid1D& g, double k,
                                double delta, int band) {
  if (!g.is_periodic()) throw ParameterError("bloch_family needs a periodic grid");
  if (delta <= 0.0) throw ParameterError("bloch_family: delta must be positive");
  if (band < 0) throw ParameterError("bloch_family: band must be nonnegative");

  BlochFamily fam;
  fam.k = k;
  fam.delta = delta;
  fam.band = band;

  const std::array<double, 3> ks{{k - delta, k, k + delta}};
  std::array<WaveFunction, 3> members;
  for (int i = 0; i < 3; ++i) {
    const auto spec = make_spec(g, v, 0.0, ks[i]);
    const auto sol = solve_states(spec, g, band + 2);
    const double escale = std::max(1.0, sol.energies.cwiseAbs().maxCoeff());
    const double gap_up = sol.energies[band + 1] - sol.energies[band];
    const double gap_dn = band > 0 ? sol.energies[band] - sol.energies[band - 1]
                                   : std::numeric_limits<double>::infinity();
    if (std::min(gap_up, gap_dn) < 1e-8 * escale)
      throw DegeneracyError("bloch_family: band gap below resolvable threshold");

    WaveFunction u = sol.states[band];
    WaveFunction psi{g, Eigen::VectorXcd(g.npoints), 0.0, ks[i]};
    for (int j = 0; j < g.npoints; ++j)
      psi.samples[j] = std::exp(cplx(0.0, ks[i] * g.x(j))) * u.samples[j];
    members[i] = std::move(psi);
    fam.energies[i] = sol.energies[band];
  }

  for (int i : {0, 2}) {
    Eigen::VectorXcd integrand =
        members[1].samples.conjugate().cwiseProduct(members[i].samples);
    const cplx overlap = integrate(integrand, g);
    if (std::abs(overlap) < 0.5)
      throw GaugeError("bloch_family: members nearly orthogonal; reduce delta");
    members[i].samples *= std::conj(overlap) / std::abs(overlap);
  }

  fam.minus = std::move(members[0]);
  fam.center = std::move(members[1]);
  fam.plus = std::move(members[2]);
  return fam;
}

// Centered difference of the family in k: the k-derivative of the eigenstate
// in the transported gauge, as a field with wall extensions. The spatial
// derivative is formed member by member, each under its own twist, because
// the difference itself has no single Bloch twist.
inline ObservableSpec eigenstate_k_derivative(const BlochFamily& fam) {
  const double tdk = 2.0 * fam.delta;
  SampledField w;
  w.samples = (fam.plus.samples - fam.minus.samples) / tdk;
  w.v0 = (fam.plus.value0() - fam.minus.value0()) / tdk;
  w.vL = (fam.plus.valueL() - fam.minus.valueL()) / tdk;
  w.d0 = (fam.plus.slope0() - fam.minus.slope0()) / tdk;
  w.dL = (fam.plus.slopeL() - fam.minus.slopeL()) / tdk;
  Eigen::VectorXcd wp = (fam.plus.gradient() - fam.minus.gradient()) / tdk;
  return ObservableSpec::parameter_derivative(std::move(w), std::move(wp));
}

} // namespace qflux
