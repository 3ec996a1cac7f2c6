#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qflux/berry.hpp"

using namespace qflux;
using Catch::Approx;

namespace {

const Eigen::Vector3d kPoint(0.3, -0.2, 0.8);

}  // namespace

TEST_CASE("Shift family covers the curl stencil exactly once") {
  const auto d3 = shift_family(3);
  const auto d2 = shift_family(2);
  CHECK(d3.size() == 25);
  CHECK(d2.size() == 13);

  for (const auto& fam : {d3, d2}) {
    for (std::size_t i = 0; i < fam.size(); ++i)
      for (std::size_t j = i + 1; j < fam.size(); ++j) CHECK(fam[i] != fam[j]);
    CHECK(std::count(fam.begin(), fam.end(), std::array<int, 3>{0, 0, 0}) == 1);
  }

  CHECK_THROWS_AS(shift_family(1), ParameterError);
  CHECK_THROWS_AS(shift_family(4), ParameterError);
}

TEST_CASE("Two-level bands carry half the field strength") {
  const auto model = FiniteModel::two_level_monopole();
  const double r = kPoint.norm();
  CHECK(band_energy(model, kPoint, 0) == Approx(-r / 2.0).margin(1e-12));
  CHECK(band_energy(model, kPoint, 1) == Approx(r / 2.0).margin(1e-12));

  const auto [e0, v0] = band_state(model, kPoint, 0);
  CHECK(e0 == Approx(-r / 2.0).margin(1e-12));
  CHECK(v0.norm() == Approx(1.0).margin(1e-12));
}

TEST_CASE("A degenerate point on the path is rejected") {
  const auto model = FiniteModel::two_level_monopole();
  const auto origin = ParameterPath::static_point(Eigen::Vector3d::Zero(), 1.0);
  CHECK_THROWS_AS(berry_fields(model, origin, 0, {0.5}, 1e-4, 1e-3), DegeneracyError);
}

TEST_CASE("Pinned point reproduces the stationary force balance") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::static_point(kPoint, 3.0);
  const auto pts = berry_fields(model, path, 0, {1.0}, 1e-4, 1e-3);
  const auto& p = pts[0];

  CHECK(p.balance_residual.norm() < 1e-8);
  CHECK((p.grad_energy - p.mean_grad_h).norm() < 1e-8);
  CHECK(p.energy == Approx(-kPoint.norm() / 2.0).margin(1e-10));

  // With the dynamical phase stripped the scalar potential vanishes; the
  // unstripped reading equals the mean energy, which pins down the sign of
  // the E/V bookkeeping (the two conventions differ by 2E here).
  CHECK(std::abs(p.v_pot) < 1e-8);
  CHECK(p.v_pot_raw == Approx(p.energy).margin(1e-7));
  CHECK(std::abs(p.v_pot_raw + p.energy) > 0.5);
}

TEST_CASE("Pinned-point connection is steady and real") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::static_point(kPoint, 12.0);
  const auto pts = berry_fields(model, path, 0, {2.0, 10.0}, 2e-4, 1e-3);

  CHECK((pts[1].a_conn - pts[0].a_conn).norm() < 1e-8);
  CHECK(pts[0].reality_defect < 1e-8);
  CHECK(pts[1].reality_defect < 1e-8);
}

TEST_CASE("Static curvature matches the radial monopole field") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::static_point(kPoint, 3.0);
  const auto pts = berry_fields(model, path, 0, {1.0}, 1e-3, 1e-3);
  const auto& p = pts[0];

  const Eigen::Vector3d expected = kPoint.normalized() / (2.0 * kPoint.squaredNorm());
  CHECK((p.b_field - expected).norm() / expected.norm() < 1e-4);
  CHECK(p.b_field.normalized().dot(kPoint.normalized()) == Approx(1.0).margin(1e-9));
}

TEST_CASE("Loop holonomy around a small plaquette integrates the curvature") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::static_point(kPoint, 3.0);
  const auto pts = berry_fields(model, path, 0, {1.0}, 1e-3, 1e-3);

  // Stokes cross-check: overlap-product phase around a square over area.
  const double wz = wilson_curl_estimate(model, kPoint, 0, 0, 1, 1e-3);
  CHECK(wz == Approx(pts[0].b_field[2]).epsilon(1e-2));

  CHECK_THROWS_AS(wilson_curl_estimate(model, kPoint, 0, 0, 0, 1e-3), ParameterError);
}

TEST_CASE("Parameter-gradient error falls fourfold when delta halves") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::static_point(kPoint, 3.0);
  const Eigen::Vector3d exact = -kPoint / (2.0 * kPoint.norm());

  double err[2];
  int i = 0;
  for (double delta : {2e-3, 1e-3}) {
    const auto pts = berry_fields(model, path, 0, {1.0}, delta, 1e-3);
    err[i++] = (pts[0].grad_energy - exact).norm();
  }
  CHECK(err[0] / err[1] == Approx(4.0).margin(0.2));
}

TEST_CASE("Slow circular drive closes the gradient balance") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::circle(1.0, M_PI / 3.0, 2000.0);

  const auto coarse = berry_fields(model, path, 0, {50.0}, 1e-3, 1e-2);
  const double scale = coarse[0].mean_grad_h.norm();
  CHECK(coarse[0].balance_residual.norm() / scale < 1e-5);
  CHECK(coarse[0].reality_defect < 1e-6);

  // The residual is pure discretization: halving delta and dt together
  // should cut it by about four.
  const auto fine = berry_fields(model, path, 0, {50.0}, 5e-4, 5e-3);
  CHECK(fine[0].balance_residual.norm() < coarse[0].balance_residual.norm() / 2.5);

  // Adiabatic regime: the measured curvature stays near the band value.
  CHECK(std::abs(coarse[0].b_field.norm() - 0.5) < 0.025);
}

TEST_CASE("Fast drive still closes the balance with the family curvature") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::circle(1.0, M_PI / 3.0, 200.0);
  const auto pts = berry_fields(model, path, 0, {50.0, 100.0}, 1e-3, 1e-2);

  for (const auto& p : pts)
    CHECK(p.balance_residual.norm() / p.mean_grad_h.norm() < 1e-4);

  // Far from the adiabatic regime the family curvature departs visibly
  // from the band curvature while the balance keeps closing.
  CHECK(std::abs(pts[0].b_field.norm() - 0.5) > 0.1);
}

TEST_CASE("A common gauge twist moves only the scalar potential") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::circle(1.0, M_PI / 3.0, 2000.0);

  const auto plain = berry_fields(model, path, 0, {50.0}, 1e-3, 1e-2);
  const auto twisted = berry_fields(model, path, 0, {50.0}, 1e-3, 1e-2, 0.37);

  CHECK(twisted[0].v_pot - plain[0].v_pot == Approx(-0.37).margin(1e-5));
  CHECK((twisted[0].a_conn - plain[0].a_conn).norm() < 1e-10);
  CHECK((twisted[0].b_field - plain[0].b_field).norm() < 1e-10);
  CHECK(std::abs(twisted[0].balance_residual.norm() - plain[0].balance_residual.norm()) <
        1e-6);
}

TEST_CASE("Drive-induced potential and admixture scale linearly with speed") {
  const auto model = FiniteModel::two_level_monopole();

  double vmax[2];
  int i = 0;
  for (double period : {1000.0, 2000.0}) {
    const auto path = ParameterPath::circle(1.0, M_PI / 3.0, period);
    const auto pts = berry_fields(model, path, 0, {0.2 * period, 0.35 * period}, 1e-3, 1e-2);
    vmax[i++] = std::max(std::abs(pts[0].v_pot), std::abs(pts[1].v_pot));
  }
  CHECK(vmax[0] / vmax[1] == Approx(2.0).margin(0.2));

  double dev[2];
  i = 0;
  for (double period : {400.0, 800.0}) {
    const auto path = ParameterPath::circle(1.0, M_PI / 3.0, period);
    dev[i++] = connection_deviation(model, path, 0, 1e-2, 24);
  }
  CHECK(dev[0] / dev[1] == Approx(2.0).margin(0.2));

  // A pinned path transports with no admixture at all.
  const auto still = ParameterPath::static_point(kPoint, 4.0);
  CHECK(connection_deviation(model, still, 0, 1e-3, 16) < 1e-5);
}

TEST_CASE("Loop phase follows the enclosed solid angle") {
  const auto model = FiniteModel::two_level_monopole();

  const auto cone = ParameterPath::circle(1.0, M_PI / 3.0, 800.0);
  const double ph = berry_phase_loop(model, cone, 0, 1e-2);
  CHECK(ph > 0.0);
  CHECK(ph == Approx(M_PI * (1.0 - std::cos(M_PI / 3.0))).margin(2e-2));

  const auto equator = ParameterPath::circle(1.0, M_PI / 2.0, 800.0);
  CHECK(std::abs(berry_phase_loop(model, equator, 0, 1e-2)) ==
        Approx(M_PI).margin(2e-2));
}

TEST_CASE("Real two-level model: quantized loop phase, closed balance") {
  const auto model = FiniteModel::two_level_planar();

  const auto loop = ParameterPath::planar_circle(0.9, 900.0);
  CHECK(std::abs(berry_phase_loop(model, loop, 0, 1e-2)) == Approx(M_PI).margin(2e-2));

  const auto drive = ParameterPath::planar_circle(0.9, 300.0);
  const auto coarse = berry_fields(model, drive, 0, {60.0}, 1e-3, 1e-2);
  CHECK(coarse[0].balance_residual.norm() / coarse[0].mean_grad_h.norm() < 1e-4);
  CHECK(coarse[0].b_field[0] == 0.0);
  CHECK(coarse[0].b_field[1] == 0.0);

  const auto fine = berry_fields(model, drive, 0, {60.0}, 5e-4, 5e-3);
  CHECK(fine[0].balance_residual.norm() < coarse[0].balance_residual.norm() / 2.5);
}

TEST_CASE("Field evaluation rejects out-of-range requests") {
  const auto model = FiniteModel::two_level_monopole();
  const auto path = ParameterPath::static_point(kPoint, 2.0);

  CHECK_THROWS_AS(berry_fields(model, path, 0, {0.0001}, 1e-4, 1e-3), ParameterError);
  CHECK_THROWS_AS(berry_fields(model, path, 0, {1.0}, 0.0, 1e-3), ParameterError);
  CHECK_THROWS_AS(berry_fields(model, path, 0, {1.0}, 1e-4, -1.0), ParameterError);

  // Requested times snap to the integration grid.
  const auto pts = berry_fields(model, path, 0, {0.5031}, 1e-3, 1e-2);
  CHECK(pts[0].time == Approx(0.5).margin(1e-12));
}
