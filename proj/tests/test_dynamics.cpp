#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qflux/dynamics.hpp"

using namespace qflux;
using Catch::Approx;

namespace {
double discrete_ring_energy(double kappa, const Grid1D& g) {
  return (1.0 - std::cos(kappa * g.h)) / (g.h * g.h);
}
} // namespace

TEST_CASE("Cayley step conserves norm and energy to roundoff") {
  const Grid1D g = Grid1D::dirichlet(1.0, 128);
  const auto spec = make_spec(g, Potential::cosine(2.0));
  const auto sol = solve_states(spec, g, 2);

  WaveFunction psi{g, (sol.states[0].samples + sol.states[1].samples) / std::sqrt(2.0),
                   0.0, 0.0};
  psi.normalize();

  Propagator prop(spec, g, 1e-3);
  const double e0 = energy_expectation(prop.op(), psi.samples);

  Eigen::VectorXcd cur = psi.samples;
  double norm_drift = 0.0, energy_drift = 0.0;
  for (int s = 0; s < 500; ++s) {
    prop.step(cur);
    WaveFunction w{g, cur, 0.0, 0.0};
    norm_drift = std::max(norm_drift, std::abs(w.norm() - 1.0));
    energy_drift =
        std::max(energy_drift, std::abs(energy_expectation(prop.op(), cur) - e0));
  }
  CHECK(norm_drift < 1e-13);
  CHECK(energy_drift < 1e-11);

  // Hard walls stay exactly pinned.
  CHECK(std::abs(cur[0]) == 0.0);
  CHECK(std::abs(cur[g.npoints - 1]) == 0.0);
}

TEST_CASE("Cayley phase error matches its leading dt^2 coefficient") {
  const Grid1D g = Grid1D::periodic(1.0, 64);
  const auto spec = make_spec(g, Potential::zero());
  const WaveFunction psi0 = plane_wave(g, 1);
  const double lam = discrete_ring_energy(2.0 * M_PI, g);

  auto phase_error = [&](double dt, int steps) {
    Propagator prop(spec, g, dt);
    Eigen::VectorXcd cur = psi0.samples;
    for (int s = 0; s < steps; ++s) prop.step(cur);
    const cplx overlap = integrate(psi0.samples.conjugate().cwiseProduct(cur).eval(), g);
    // Exact evolution would give phase -lam * t; the Cayley phase lags by
    // t * lam^3 dt^2 / 12 to leading order.
    return std::arg(overlap) + lam * dt * steps;
  };

  const double t_total = 0.1;
  const double err_coarse = phase_error(1e-3, 100);
  const double err_fine = phase_error(5e-4, 200);
  const double predicted = t_total * lam * lam * lam * 1e-6 / 12.0;

  CHECK(err_coarse == Approx(predicted).epsilon(0.01));
  CHECK(err_coarse / err_fine == Approx(4.0).epsilon(0.01));
}

TEST_CASE("Cayley step is a pure phase on an eigenmode") {
  const Grid1D g = Grid1D::periodic(1.0, 48);
  const auto spec = make_spec(g, Potential::zero(), 0.7);
  const WaveFunction psi0 = plane_wave(g, 2);

  Propagator prop(spec, g, 2e-3);
  Eigen::VectorXcd cur = psi0.samples;
  for (int s = 0; s < 25; ++s) prop.step(cur);

  // The mode is an exact eigenvector of the discrete Hamiltonian, so the
  // modulus profile must stay flat to roundoff.
  const double want = 1.0; // |psi|^2 = 1/L with L = 1
  for (int j = 0; j < g.npoints; j += 7)
    CHECK(std::norm(cur[j]) == Approx(want).margin(1e-13));
}

TEST_CASE("Trajectory snapshots follow the requested stride") {
  const Grid1D g = Grid1D::periodic(1.0, 32);
  const auto spec = make_spec(g, Potential::zero());
  Propagator prop(spec, g, 1e-3);

  const auto traj = prop.run(plane_wave(g, 1), 40, 10);
  REQUIRE(traj.size() == 5);
  CHECK(traj.dt == Approx(1e-2));
  for (int i = 0; i < 5; ++i) CHECK(traj.times[i] == Approx(i * 1e-2).margin(1e-15));
  CHECK(traj.state(3).norm() == Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(prop.run(plane_wave(g, 1), 41, 10), ParameterError);
}

TEST_CASE("Well dipole elements: closed form and discrete quadrature agree") {
  CHECK(well_position_element(1, 2, 1.0) == Approx(-16.0 / (9.0 * M_PI * M_PI)).margin(1e-15));
  CHECK(well_position_element(2, 1, 1.0) == Approx(well_position_element(1, 2, 1.0)));
  CHECK(well_position_element(1, 3, 1.0) == 0.0);
  CHECK(well_position_element(3, 3, 2.0) == Approx(1.0));

  const Grid1D g = Grid1D::dirichlet(1.0, 256);
  const auto spec = make_spec(g, Potential::zero());
  const auto sol = solve_states(spec, g, 3);

  const cplx x12 = position_matrix_element(sol.states[0], sol.states[1]);
  const cplx x13 = position_matrix_element(sol.states[0], sol.states[2]);
  CHECK(std::abs(x12 - cplx(-16.0 / (9.0 * M_PI * M_PI), 0.0)) < 1e-8);
  CHECK(std::abs(x13) < 1e-9);

  const double x11 = std::real(expectation(ObservableSpec::position(), sol.states[0]));
  CHECK(x11 == Approx(0.5).margin(1e-9));
}

TEST_CASE("Velocity series reduces to a single beat for two equal states") {
  const double w21 = well_energy(2, 1.0) - well_energy(1, 1.0);
  CHECK(w21 == Approx(1.5 * M_PI * M_PI).margin(1e-13));
  for (double t : {0.0, 0.05, 0.13, 0.3}) {
    const double expect = (8.0 / 3.0) * std::sin(w21 * t);
    CHECK(well_velocity_series({1.0, 1.0}, 1.0, t) == Approx(expect).margin(1e-13));
  }
}

TEST_CASE("Two-state beat: measured velocity tracks series and momentum") {
  const auto res = well_beat_audit(1.0, 256, 2e-4, {1.0, 1.0});

  CHECK(res.beat_period == Approx(2.0 * M_PI / (1.5 * M_PI * M_PI)).margin(1e-12));
  CHECK(res.steps >= 2000);
  REQUIRE(res.times.size() > 100);

  // Peak of the sampled series misses the true extremum only through the
  // sampling grid, so 8/3 must be reproduced very closely.
  CHECK(std::abs(res.peak_series - 8.0 / 3.0) < 5e-6);
  CHECK(std::abs(res.peak_measured - 8.0 / 3.0) < 3e-3);

  // Grid-dispersion error dominates at 256 points; it shrinks as h^2.
  CHECK(res.max_deviation < 3e-3);

  // The velocity theorem route shares the grid, so it agrees much tighter.
  CHECK(res.max_formal_deviation < 5e-5);

  CHECK(res.norm_drift < 1e-12);
  CHECK(res.energy_drift < 1e-10);
}
