#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qflux/auditor.hpp"
#include "qflux/dynamics.hpp"

using namespace qflux;
using Catch::Approx;

TEST_CASE("Ring mode basis matches the numerical solver") {
  const Grid1D g = Grid1D::periodic(1.5, 128);
  const double a = 0.37;
  const auto spec = make_spec(g, Potential::zero(), a);
  const auto exact = ring_mode_basis(g, 4, a);
  const auto solved = solve_states(spec, g, 4);

  for (int b = 0; b < 4; ++b) {
    CHECK(exact.energies[b] == Approx(solved.energies[b]).margin(1e-9));
    const cplx ov = integrate(
        Eigen::VectorXcd(exact.states[b].samples.conjugate().cwiseProduct(
            solved.states[b].samples)),
        g);
    CHECK(std::abs(ov) == Approx(1.0).margin(1e-8));
  }

  // Plane waves are exact discrete eigenvectors: H psi - E psi vanishes.
  const auto op = make_operator(spec, g);
  for (int b = 0; b < 4; ++b) {
    const Eigen::VectorXcd res =
        op.apply(exact.states[b].samples) - exact.energies[b] * exact.states[b].samples;
    CHECK(res.cwiseAbs().maxCoeff() < 1e-9 * op.opnorm());
  }
}

TEST_CASE("Ring mode basis orders degenerate pairs by momentum") {
  const Grid1D g = Grid1D::periodic(1.0, 64);
  const auto basis = ring_mode_basis(g, 5);
  const ObservableSpec p = ObservableSpec::momentum();
  CHECK(std::real(expectation(p, basis.states[0])) == Approx(0.0).margin(1e-13));
  CHECK(std::real(expectation(p, basis.states[1])) < 0.0);
  CHECK(std::real(expectation(p, basis.states[2])) > 0.0);
  CHECK(basis.energies[1] == Approx(basis.energies[2]).margin(1e-13));
  CHECK(basis.energies[3] == Approx(basis.energies[4]).margin(1e-13));
  CHECK(basis.energies[2] < basis.energies[3]);
}

TEST_CASE("Free-ring position audit balances through the boundary term") {
  const Grid1D g = Grid1D::periodic(1.0, 4096);
  const auto spec = make_spec(g, Potential::zero());
  const auto basis = ring_mode_basis(g, 3);

  // Mode +1 sits in band 2 after momentum ordering.
  const auto r = ehrenfest_audit(spec, ObservableSpec::position(), basis.states[2]);
  const double kappa = 2.0 * M_PI;
  const double lattice_momentum = std::sin(kappa * g.h) / g.h;

  CHECK(std::real(r.formal) == Approx(lattice_momentum).margin(1e-12));
  CHECK(std::real(r.boundary) == Approx(lattice_momentum).margin(1e-12));
  CHECK(std::abs(r.residual) < 1e-13);

  // Each term sits below the continuum value by the k^3 h^2 / 6 dispersion
  // offset; without the boundary term the balance misses by the whole flux.
  const double offset = kappa * kappa * kappa * g.h * g.h / 6.0;
  CHECK(kappa - std::real(r.formal) == Approx(offset).epsilon(1e-4));
  CHECK(std::abs(r.naive_residual()) == Approx(lattice_momentum).margin(1e-10));
}

TEST_CASE("Identity audit is exactly neutral") {
  const Grid1D g = Grid1D::periodic(1.0, 512);
  const auto spec = make_spec(g, Potential::zero(), 0.9);
  const auto basis = ring_mode_basis(g, 2, 0.9);
  const auto r = ehrenfest_audit(spec, ObservableSpec::identity(), basis.states[1]);
  CHECK(std::abs(r.formal) < 1e-14);
  CHECK(std::abs(r.boundary) < 1e-13);
  CHECK(std::abs(r.residual) < 1e-13);
}

TEST_CASE("Hypervirial combination vanishes exactly on plane waves") {
  const Grid1D g = Grid1D::periodic(2.0, 256);
  const auto spec = make_spec(g, Potential::zero(), 0.7);
  const auto basis = ring_mode_basis(g, 3, 0.7);
  for (int b = 0; b < 3; ++b)
    CHECK(std::abs(hypervirial_check(spec, basis.states[b])) < 1e-12);
}

TEST_CASE("Hypervirial residue decays quadratically with the spacing") {
  const Potential v = Potential::random_smooth(1.0, 11);
  const double a = 0.7;
  auto residue = [&](int n) {
    const Grid1D g = Grid1D::periodic(2.0, n);
    const auto spec = make_spec(g, v, a);
    const auto sol = solve_states(spec, g, 3);
    return hypervirial_check(spec, sol.states[1]);
  };
  const double coarse = residue(512);
  const double fine = residue(1024);
  CHECK(std::abs(coarse) > 1e-7);
  CHECK(coarse / fine == Approx(4.0).epsilon(0.1));
}

TEST_CASE("Half-quantum flux splits the boundary terms symmetrically") {
  const Grid1D g = Grid1D::periodic(1.0, 2048);
  const auto fp = flux_pair_audit(g, M_PI);

  CHECK(fp.energies[0] == Approx(fp.energies[1]).margin(1e-10));
  CHECK(fp.momenta[0] < fp.momenta[1]);

  // The m = 0 member reads +pi exactly (zero stencil error); its partner
  // carries the (2 pi)^3 h^2 / 6 dispersion offset of mode -1.
  const double offset = std::pow(2.0 * M_PI, 3) * g.h * g.h / 6.0;
  CHECK(fp.boundary_terms[1] == Approx(M_PI).margin(1e-12));
  CHECK(fp.boundary_terms[0] == Approx(-M_PI + offset).margin(1e-9));

  for (int b = 0; b < 2; ++b) {
    CHECK(std::abs(fp.reports[b].residual) < 1e-12);
    // Boundary term and kinematic momentum are the same lattice number.
    CHECK(fp.boundary_terms[b] == Approx(fp.momenta[b]).margin(1e-12));
  }
}

TEST_CASE("Generic flux keeps the audit exact without degeneracy") {
  const Grid1D g = Grid1D::periodic(1.0, 512);
  const auto fp = flux_pair_audit(g, 0.3);
  CHECK(std::abs(fp.energies[0] - fp.energies[1]) > 1e-3);
  for (int b = 0; b < 2; ++b) {
    CHECK(std::abs(fp.reports[b].residual) < 1e-12);
    CHECK(fp.boundary_terms[b] == Approx(fp.momenta[b]).margin(1e-12));
  }
}

TEST_CASE("Band slope routes agree on the empty lattice") {
  const Grid1D g = Grid1D::periodic(1.0, 512);
  const auto s = band_slopes(Potential::zero(), g, 1.3, 1e-3, 0);

  const double lattice_slope = std::sin(1.3 * g.h) / g.h;
  CHECK(s.momentum == Approx(lattice_slope).margin(1e-10));
  CHECK(std::abs(s.spectral - s.momentum) < 1e-6);
  CHECK(std::abs(s.corrected - s.momentum) < 1e-6);
  CHECK(s.naive == 0.0);
  CHECK(std::abs(s.spectral - s.naive) > 0.9);
}

TEST_CASE("Band slope routes agree for a cosine lattice") {
  const Grid1D g = Grid1D::periodic(1.0, 256);
  const Potential v = Potential::cosine(0.5);
  for (int band : {0, 1}) {
    const auto s = band_slopes(v, g, 1.7, 1e-4, band);
    CHECK(std::abs(s.spectral - s.corrected) < 1e-6);
    CHECK(std::abs(s.spectral - s.momentum) < 1e-6);
    CHECK(std::abs(s.corrected - s.momentum) < 1e-6);
    CHECK(std::abs(s.spectral - s.naive) > 1.0);
  }
}

TEST_CASE("Trajectory audit residual shrinks with snapshot spacing") {
  const Grid1D g = Grid1D::periodic(1.0, 128);
  const auto spec = make_spec(g, Potential::zero());
  const double e0 = 0.0;
  const double e1 = (1.0 - std::cos(2.0 * M_PI * g.h)) / (g.h * g.h);

  // Exact discrete evolution of an equal two-mode superposition.
  auto exact_trajectory = [&](double dt, int count) {
    Trajectory traj;
    traj.grid = g;
    traj.dt = dt;
    const WaveFunction m0 = plane_wave(g, 0), m1 = plane_wave(g, 1);
    for (int i = 0; i < count; ++i) {
      const double t = i * dt;
      WaveFunction w{g,
                     (m0.samples * std::exp(cplx(0.0, -e0 * t)) +
                      m1.samples * std::exp(cplx(0.0, -e1 * t))) /
                         std::sqrt(2.0),
                     t, 0.0};
      traj.times.push_back(t);
      traj.states.push_back(w.samples);
    }
    return traj;
  };

  const ObservableSpec x = ObservableSpec::position();
  const auto coarse = ehrenfest_audit(spec, x, exact_trajectory(1e-3, 5), 2);
  const auto fine = ehrenfest_audit(spec, x, exact_trajectory(5e-4, 5), 2);

  CHECK(std::abs(coarse.residual) < 5e-4);
  CHECK(std::abs(coarse.residual) / std::abs(fine.residual) == Approx(4.0).epsilon(0.1));

  // The audited rate itself is genuinely nonzero here.
  CHECK(std::abs(coarse.observed) > 0.05);
}
