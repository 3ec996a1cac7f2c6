#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qflux/currents.hpp"
#include "qflux/quantum_ops.hpp"
#include "qflux/wavefunction.hpp"

namespace qflux {

// ---------------------------------------------------------------------------
// Closed-form ring basis
// ---------------------------------------------------------------------------

// Exact eigenbasis of the empty ring (V = 0, uniform vector potential).
// Plane waves are exact eigenvectors of the discrete Hamiltonian, so this
// basis carries none of the O(eps ||H|| / gap) impurity a numerical solver
// leaves in its vectors; identity checks at machine precision need it.
// Ordering and phase follow the solver convention: energies ascending,
// near-degenerate groups by ascending canonical momentum, first-sample
// real-positive gauge (plane waves already satisfy it).
inline EigenSolution ring_mode_basis(const Grid1D& g, int count,
                                     double vector_potential = 0.0) {
  if (!g.is_periodic()) throw ParameterError("ring_mode_basis needs a periodic grid");
  const int n = g.npoints;
  const double L = g.length, h = g.h, a = vector_potential;

  // Window of mode numbers around the dispersion minimum, wide enough to
  // contain the `count` lowest levels but short of the aliasing scale.
  const int center = static_cast<int>(std::lround(-a * L / (2.0 * M_PI)));
  int window = count + 4;
  if (2 * window + 1 > n) window = (n - 1) / 2;
  if (count < 1 || count > 2 * window + 1)
    throw ParameterError("ring_mode_basis: invalid state count for this grid");

  struct Mode {
    double e, p;
    int m;
  };
  std::vector<Mode> modes;
  modes.reserve(2 * window + 1);
  for (int m = center - window; m <= center + window; ++m) {
    const double kappa = 2.0 * M_PI * m / L;
    modes.push_back({(1.0 - std::cos((kappa + a) * h)) / (h * h),
                     std::sin(kappa * h) / h, m});
  }
  std::stable_sort(modes.begin(), modes.end(),
                   [](const Mode& x, const Mode& y) { return x.e < y.e; });
  modes.resize(count);

  double escale = 1.0;
  for (const Mode& md : modes) escale = std::max(escale, std::abs(md.e));
  int lo = 0;
  while (lo < count) {
    int hi = lo + 1;
    while (hi < count && std::abs(modes[hi].e - modes[hi - 1].e) <= 1e-8 * escale) ++hi;
    std::stable_sort(modes.begin() + lo, modes.begin() + hi,
                     [](const Mode& x, const Mode& y) { return x.p < y.p; });
    lo = hi;
  }

  EigenSolution sol;
  sol.energies.resize(count);
  sol.states.reserve(count);
  for (int b = 0; b < count; ++b) {
    sol.energies[b] = modes[b].e;
    sol.states.push_back(plane_wave(g, modes[b].m));
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Ehrenfest audit
// ---------------------------------------------------------------------------

// One row of the rate balance
//
//   d<B>/dt = <dB/dt> + i<[H, B]> - (surface flux of the generalized current)
//
// stored term by term with the residual arranged as
//
//   residual = observed - explicit_time - formal + boundary.
//
// A theorem that holds shows up as a residual at the discretization floor;
// dropping the boundary term moves the flux into the residual instead.
struct AuditReport {
  std::string observable;
  double time = 0.0;
  cplx observed{0.0, 0.0};       // measured d<B>/dt
  cplx explicit_time{0.0, 0.0};  // <dB/dt>, zero for static observables
  cplx formal{0.0, 0.0};         // i <[H, B]>
  cplx boundary{0.0, 0.0};       // flux of the generalized current
  cplx residual{0.0, 0.0};

  cplx naive_residual() const { return observed - explicit_time - formal; }
};

namespace detail {

inline AuditReport audit_terms(const HamiltonianSpec& spec, const ObservableSpec& B,
                               const WaveFunction& psi) {
  AuditReport r;
  r.observable = B.label;
  r.time = psi.time;
  const SampledField comm = formal_commutator_apply(spec, B, psi);
  r.formal = cplx(0.0, 1.0) *
             integrate(Eigen::VectorXcd(psi.samples.conjugate().cwiseProduct(comm.samples)),
                       psi.grid);
  r.boundary = boundary_flux(generalized_current(B, psi, spec.coupling()));
  return r;
}

} // namespace detail

// Stationary-state audit: the observed rate is zero by assumption, so the
// balance reduces to boundary - formal.
inline AuditReport ehrenfest_audit(const HamiltonianSpec& spec, const ObservableSpec& B,
                                   const WaveFunction& psi) {
  AuditReport r = detail::audit_terms(spec, B, psi);
  r.observed = cplx(0.0, 0.0);
  r.explicit_time = cplx(0.0, 0.0);
  r.residual = r.observed - r.explicit_time - r.formal + r.boundary;
  return r;
}

// Trajectory audit at snapshot `index`: the observed rate is the centered
// difference of the corrected expectation value, the other terms are
// evaluated on the middle snapshot.
inline AuditReport ehrenfest_audit(const HamiltonianSpec& spec, const ObservableSpec& B,
                                   const Trajectory& traj, int index) {
  if (traj.size() < 3) throw ParameterError("ehrenfest_audit: need at least three snapshots");
  if (index < 1 || index + 1 >= static_cast<int>(traj.size()))
    throw ParameterError("ehrenfest_audit: index needs neighbors on both sides");

  AuditReport r = detail::audit_terms(spec, B, traj.state(index));
  const cplx before = expectation(B, traj.state(index - 1));
  const cplx after = expectation(B, traj.state(index + 1));
  r.observed = (after - before) / (2.0 * traj.dt);
  r.explicit_time = cplx(0.0, 0.0);
  r.residual = r.observed - r.explicit_time - r.formal + r.boundary;
  return r;
}

// ---------------------------------------------------------------------------
// Hypervirial combination on a ring
// ---------------------------------------------------------------------------

// For any eigenstate on a ring the position audit condenses, via integration
// by parts, into a single gauge-covariant number
//
//   I = -(i/2) Int_0^L x (psi psi*'' - psi* psi'') dx + a (1 - L |psi(0)|^2)
//
// which vanishes in the continuum and decays as h^2 on the lattice. The
// integrand is evaluated with the seam-twisted second derivative; the x
// weight makes it multivalued on the ring, so the endpoint extension rides
// in a SampledField.
inline double hypervirial_check(const HamiltonianSpec& spec, const WaveFunction& psi) {
  const Grid1D& g = psi.grid;
  if (!g.is_periodic()) throw ParameterError("hypervirial_check needs a periodic grid");
  const double a = spec.coupling();
  const cplx seam = psi.seam_twist();
  const Eigen::VectorXcd curve = second_derivative(psi.samples, g, seam);

  SampledField f;
  f.samples.resize(g.npoints);
  for (int j = 0; j < g.npoints; ++j) {
    const cplx z = psi.samples[j] * std::conj(curve[j]);
    f.samples[j] = cplx(0.0, -0.5) * (z - std::conj(z)) * g.x(j);
  }
  const cplx z0 = psi.value0() * std::conj(psi.curve0());
  f.v0 = cplx(0.0, 0.0);
  f.vL = cplx(0.0, -0.5) * (z0 - std::conj(z0)) * g.length;

  return std::real(integrate(f, g)) + a * (1.0 - g.length * std::norm(psi.value0()));
}

// ---------------------------------------------------------------------------
// Flux-threaded degenerate pair
// ---------------------------------------------------------------------------

// Position audit of the two lowest states of an empty ring threaded by a
// total flux (vector potential = flux / L). At half a flux quantum the pair
// is exactly degenerate and the boundary terms split symmetrically; they
// carry the whole balance, since <x> is stationary for eigenstates.
struct FluxPairResult {
  double total_flux = 0.0;
  std::array<double, 2> energies{};
  std::array<double, 2> momenta{};          // kinematic <Pi> per member
  std::array<AuditReport, 2> reports{};
  std::array<double, 2> boundary_terms{};   // real part of each flux term
};

inline FluxPairResult flux_pair_audit(const Grid1D& g, double total_flux) {
  const double a = total_flux / g.length;
  const auto spec = make_spec(g, Potential::zero(), a);
  const auto basis = ring_mode_basis(g, 2, a);

  FluxPairResult out;
  out.total_flux = total_flux;
  const ObservableSpec x = ObservableSpec::position();
  for (int b = 0; b < 2; ++b) {
    out.energies[b] = basis.energies[b];
    out.momenta[b] =
        std::real(expectation(ObservableSpec::kinematic_momentum(a), basis.states[b]));
    out.reports[b] = ehrenfest_audit(spec, x, basis.states[b]);
    out.boundary_terms[b] = std::real(out.reports[b].boundary);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Band-slope routes
// ---------------------------------------------------------------------------

// dE/dk of a Bloch band computed three ways that must agree, plus the
// whole-ring naive reading that cannot:
//
//   spectral  : (E(k+delta) - E(k-delta)) / (2 delta)
//   corrected : -(1/2) Re [conj(Psi) W' - W conj(Psi)']_0^L  with W = dPsi/dk,
//               the boundary bracket of the parameter-derivative current
//   momentum  : <p> of the Bloch wave, the Hellmann-Feynman value once the
//               k-dependence is rotated into the boundary condition
//   naive     : <dH/dk> on the ring, identically zero because the ring
//               Hamiltonian carries no k at all; the gap to the spectral
//               route is what the boundary bracket restores
struct BandSlopes {
  double k = 0.0, delta = 0.0;
  int band = 0;
  double energy = 0.0;
  double spectral = 0.0;
  double corrected = 0.0;
  double momentum = 0.0;
  double naive = 0.0;
};

inline BandSlopes band_slopes(const Potential& v, const Grid1D& g, double k,
                              double delta, int band) {
  const BlochFamily fam = bloch_family(v, g, k, delta, band);
  const ObservableSpec dk = eigenstate_k_derivative(fam);
  const WaveFunction& psi = fam.center;

  BandSlopes out;
  out.k = k;
  out.delta = delta;
  out.band = band;
  out.energy = fam.energies[1];
  out.spectral = (fam.energies[2] - fam.energies[0]) / (2.0 * delta);

  const SampledField& w = dk.k_derivative->w;
  const cplx br0 = std::conj(psi.value0()) * w.d0 - w.v0 * std::conj(psi.slope0());
  const cplx brL = std::conj(psi.valueL()) * w.dL - w.vL * std::conj(psi.slopeL());
  out.corrected = -0.5 * std::real(brL - br0);

  out.momentum = std::real(expectation(ObservableSpec::momentum(), psi));
  out.naive = 0.0;
  return out;
}

// The two readings of <dH/dk> that frame the band-slope correction:
//
//   ring    : H = p^2/2 + V carries no k at all (k lives in the twisted
//             boundary condition of Psi = e^{ikx} u), so the operator's
//             k-derivative is the zero operator and the unamended slope
//             theorem would flatten every band;
//   minimal : H_k = (p + k)^2/2 + V on periodic u carries all of k, and
//             <dH_k/dk> = <p + k>_u is the actual slope.
//
// What reconciles the two pictures is the boundary bracket of the
// k-derivative current. In the minimal picture that bracket is assembled
// here term by term,
//
//   (1/2) [ u*' w  -  u* w'  +  2ik u* w ]_0^L,   w = du/dk,
//
// and every term cancels between the walls because u, u', w, w' are all
// L-periodic; in the ring picture the same bracket is nonzero and carries
// the entire slope (see band_slopes).
struct SlopeParadoxReport {
  double k = 0.0, delta = 0.0;
  int band = 0;
  double ring_mean = 0.0;         // <dH/dk> with the ring operator
  double minimal_mean = 0.0;      // <p + k>_u in the substituted picture
  double spectral = 0.0;          // centered dE/dk for comparison
  std::array<cplx, 3> display{};  // wall-to-wall bracket, term by term
};

inline SlopeParadoxReport hf_naive_check(const Potential& v, const Grid1D& g, double k,
                                         double delta, int band) {
  if (!g.is_periodic()) throw ParameterError("hf_naive_check needs a periodic grid");
  if (delta <= 0.0) throw ParameterError("hf_naive_check: delta must be positive");
  if (band < 0) throw ParameterError("hf_naive_check: band must be nonnegative");

  SlopeParadoxReport out;
  out.k = k;
  out.delta = delta;
  out.band = band;

  // Periodic cell problem at k and k +/- delta, outer members phase-aligned
  // to the center so the k-difference differentiates one smooth family.
  std::array<WaveFunction, 3> u;
  std::array<double, 3> e{};
  const std::array<double, 3> ks{{k - delta, k, k + delta}};
  for (int i = 0; i < 3; ++i) {
    const auto spec = make_spec(g, v, 0.0, ks[i]);
    const auto sol = solve_states(spec, g, band + 2);
    const double escale = std::max(1.0, sol.energies.cwiseAbs().maxCoeff());
    const double gap_up = sol.energies[band + 1] - sol.energies[band];
    const double gap_dn = band > 0 ? sol.energies[band] - sol.energies[band - 1]
                                   : std::numeric_limits<double>::infinity();
    if (std::min(gap_up, gap_dn) < 1e-8 * escale)
      throw DegeneracyError("hf_naive_check: band gap below resolvable threshold");
    u[i] = sol.states[band];
    e[i] = sol.energies[band];
  }
  for (int i : {0, 2}) {
    Eigen::VectorXcd integrand = u[1].samples.conjugate().cwiseProduct(u[i].samples);
    const cplx overlap = integrate(integrand, g);
    if (std::abs(overlap) < 0.5)
      throw GaugeError("hf_naive_check: cell functions nearly orthogonal; reduce delta");
    u[i].samples *= std::conj(overlap) / std::abs(overlap);
  }

  out.spectral = (e[2] - e[0]) / (2.0 * delta);
  out.minimal_mean = std::real(expectation(ObservableSpec::kinematic_momentum(k), u[1]));

  // The ring operator takes no k argument; assembling it at both offsets and
  // differencing keeps "the k-derivative is the zero operator" a computation
  // rather than an assertion.
  WaveFunction psi{g, Eigen::VectorXcd(g.npoints), 0.0, k};
  for (int j = 0; j < g.npoints; ++j)
    psi.samples[j] = std::exp(cplx(0.0, k * g.x(j))) * u[1].samples[j];
  const auto ring_lo = make_operator(make_spec(g, v), g);
  const auto ring_hi = make_operator(make_spec(g, v), g);
  const Eigen::VectorXcd dh =
      ring_hi.apply(psi.samples) - ring_lo.apply(psi.samples);
  out.ring_mean = std::real(psi.samples.dot(dh) * g.h) / (2.0 * delta);

  const double tdk = 2.0 * delta;
  const cplx w0 = (u[2].value0() - u[0].value0()) / tdk;
  const cplx wL = (u[2].valueL() - u[0].valueL()) / tdk;
  const cplx wd0 = (u[2].slope0() - u[0].slope0()) / tdk;
  const cplx wdL = (u[2].slopeL() - u[0].slopeL()) / tdk;
  const WaveFunction& uc = u[1];
  out.display[0] = 0.5 * (std::conj(uc.slopeL()) * wL - std::conj(uc.slope0()) * w0);
  out.display[1] = -0.5 * (std::conj(uc.valueL()) * wdL - std::conj(uc.value0()) * wd0);
  out.display[2] = cplx(0.0, 1.0) * k *
                   (std::conj(uc.valueL()) * wL - std::conj(uc.value0()) * w0);
  return out;
}

} // namespace qflux
