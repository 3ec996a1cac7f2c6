#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qflux/lattice.hpp"
#include "qflux/wavefunction.hpp"

using namespace qflux;
using namespace std::complex_literals;

namespace {

double max_abs(const Eigen::VectorXcd& v) { return v.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("grid construction rejects unusable parameters") {
  REQUIRE_THROWS_AS(Grid1D::periodic(0.0, 64), ParameterError);
  REQUIRE_THROWS_AS(Grid1D::periodic(-1.0, 64), ParameterError);
  REQUIRE_THROWS_AS(Grid1D::dirichlet(1.0, 4), ParameterError);

  auto ring = Grid1D::periodic(2.0, 100);
  REQUIRE(ring.h == Catch::Approx(0.02));
  REQUIRE(ring.x(99) == Catch::Approx(2.0 - 0.02));

  auto box = Grid1D::dirichlet(2.0, 101);
  REQUIRE(box.h == Catch::Approx(0.02));
  REQUIRE(box.x(100) == Catch::Approx(2.0));
}

TEST_CASE("mismatched sample counts are rejected") {
  auto g = Grid1D::periodic(1.0, 64);
  Eigen::VectorXcd f = Eigen::VectorXcd::Zero(63);
  REQUIRE_THROWS_AS(integrate(f, g), ParameterError);
  REQUIRE_THROWS_AS(derivative(f, g), ParameterError);
}

TEST_CASE("rectangle rule is exact for low harmonics on a ring") {
  // sin^2(2 pi x) = 1/2 - cos(4 pi x)/2; the cosine is a pure lattice
  // harmonic well below Nyquist, so the rectangle rule integrates it to
  // machine zero and the result is exactly 1/2.
  auto g = Grid1D::periodic(1.0, 64);
  Eigen::VectorXd f(g.npoints);
  for (int j = 0; j < g.npoints; ++j) f[j] = std::pow(std::sin(2.0 * M_PI * g.x(j)), 2);
  REQUIRE(integrate(f, g) == Catch::Approx(0.5).margin(1e-14));
}

TEST_CASE("dirichlet trapezoid converges at second order") {
  const double exact = std::exp(1.0) - 1.0;
  auto err = [&](int n) {
    auto g = Grid1D::dirichlet(1.0, n);
    Eigen::VectorXd f(n);
    for (int j = 0; j < n; ++j) f[j] = std::exp(g.x(j));
    return std::abs(integrate(f, g) - exact);
  };
  const double e1 = err(101), e2 = err(201);
  REQUIRE(e1 < 2e-5);
  REQUIRE(e1 / e2 > 3.5);
  REQUIRE(e1 / e2 < 4.5);
}

TEST_CASE("centered derivative of a plane wave reproduces the discrete dispersion") {
  // For f = exp(i k x) the centered difference is exactly i sin(k h)/h * f.
  // Freezing that identity pins the stencil itself, not just its order.
  auto g = Grid1D::periodic(1.0, 64);
  const double k = 2.0 * M_PI * 3.0;
  Eigen::VectorXcd f(g.npoints);
  for (int j = 0; j < g.npoints; ++j) f[j] = std::exp(1i * k * g.x(j));
  auto d = derivative(f, g);
  const cplx symbol = 1i * std::sin(k * g.h) / g.h;
  REQUIRE(max_abs(d - symbol * f) < 1e-12 * std::abs(symbol));

  auto d2 = second_derivative(f, g);
  const double symbol2 = -2.0 * (1.0 - std::cos(k * g.h)) / (g.h * g.h);
  REQUIRE(max_abs(d2 - symbol2 * f) < 1e-12 * std::abs(symbol2));
}

TEST_CASE("derivative converges at second order toward the true wavenumber") {
  const double k = 2.0 * M_PI * 2.0;
  auto err = [&](int n) {
    auto g = Grid1D::periodic(1.0, n);
    Eigen::VectorXcd f(n);
    for (int j = 0; j < n; ++j) f[j] = std::exp(1i * k * g.x(j));
    return max_abs(derivative(f, g) - 1i * k * f);
  };
  const double ratio = err(64) / err(128);
  REQUIRE(ratio > 3.8);
  REQUIRE(ratio < 4.2);
}

TEST_CASE("seam twist differentiates Bloch states cleanly across the wrap") {
  // psi(x) = exp(i kappa x) with kappa not a lattice harmonic is only
  // quasi-periodic: psi(x+L) = exp(i kappa L) psi(x). Handing that twist to
  // the stencil restores the exact discrete symbol at the seam rows too.
  auto g = Grid1D::periodic(1.0, 64);
  const double kappa = 2.9;
  Eigen::VectorXcd f(g.npoints);
  for (int j = 0; j < g.npoints; ++j) f[j] = std::exp(1i * kappa * g.x(j));
  const cplx twist = std::exp(1i * kappa * g.length);

  auto d = derivative(f, g, twist);
  const cplx symbol = 1i * std::sin(kappa * g.h) / g.h;
  REQUIRE(max_abs(d - symbol * f) < 1e-12);

  // Without the twist the seam rows read a discontinuous function.
  auto d_plain = derivative(f, g);
  REQUIRE(std::abs(d_plain[0] - symbol * f[0]) > 0.1);

  auto d2 = second_derivative(f, g, twist);
  const double symbol2 = -2.0 * (1.0 - std::cos(kappa * g.h)) / (g.h * g.h);
  REQUIRE(max_abs(d2 - symbol2 * f) < 1e-11);
}

TEST_CASE("one-sided wall stencils are exact on low-degree polynomials") {
  auto g = Grid1D::dirichlet(2.0, 81);
  Eigen::VectorXcd f2(g.npoints), f3(g.npoints);
  for (int j = 0; j < g.npoints; ++j) {
    f2[j] = g.x(j) * g.x(j);
    f3[j] = std::pow(g.x(j), 3);
  }
  // Three point one-sided first derivative is exact through quadratics.
  auto d = derivative(f2, g);
  for (int j = 0; j < g.npoints; ++j)
    REQUIRE(std::abs(d[j] - 2.0 * g.x(j)) < 1e-10);
  // Four point one-sided second derivative is exact through cubics.
  auto d2 = second_derivative(f3, g);
  for (int j = 0; j < g.npoints; ++j)
    REQUIRE(std::abs(d2[j] - 6.0 * g.x(j)) < 1e-9);
}

TEST_CASE("wall derivative error shrinks at second order including the one-sided rows") {
  auto err = [&](int n) {
    auto g = Grid1D::dirichlet(2.0, n);
    Eigen::VectorXcd f(n);
    for (int j = 0; j < n; ++j) f[j] = std::sin(3.0 * g.x(j));
    Eigen::VectorXcd exact(n);
    for (int j = 0; j < n; ++j) exact[j] = 3.0 * std::cos(3.0 * g.x(j));
    return max_abs(derivative(f, g) - exact);
  };
  const double ratio = err(101) / err(201);
  REQUIRE(ratio > 3.5);
  REQUIRE(ratio < 4.5);
}

TEST_CASE("boundary difference of plain samples") {
  auto box = Grid1D::dirichlet(1.0, 64);
  Eigen::VectorXcd f(box.npoints);
  for (int j = 0; j < box.npoints; ++j) f[j] = box.x(j);
  REQUIRE(std::abs(boundary_difference(f, box) - 1.0) < 1e-14);

  // Single-valued ring functions have identical wrap readings at 0 and L.
  auto ring = Grid1D::periodic(1.0, 64);
  Eigen::VectorXcd u(ring.npoints);
  for (int j = 0; j < ring.npoints; ++j) u[j] = std::exp(1i * 2.0 * M_PI * ring.x(j));
  REQUIRE(std::abs(boundary_difference(u, ring)) < 1e-15);
}

TEST_CASE("sawtooth weights carry their endpoint extension through a field") {
  // x |psi|^2 for a normalized plane wave: |psi|^2 = 1/L, so the extension
  // reads L * |psi(0)|^2 = 1 at the far wall while the stored samples wrap.
  auto g = Grid1D::periodic(1.0, 64);
  auto psi = plane_wave(g, 1);
  SampledField f;
  f.samples.resize(g.npoints);
  for (int j = 0; j < g.npoints; ++j) f.samples[j] = g.x(j) * std::norm(psi.samples[j]);
  f.v0 = 0.0;
  f.vL = g.length * std::norm(psi.samples[0]);
  REQUIRE(std::abs(boundary_difference(f) - 1.0) < 1e-12);

  // The endpoint-corrected trapezoid hits the exact first moment L/2: the
  // rectangle sum misses it by exactly h/2 and the jump correction restores
  // it to machine precision.
  REQUIRE(std::abs(integrate(f, g) - 0.5) < 1e-13);
}

TEST_CASE("field quadrature with consistent endpoints matches the rectangle rule") {
  auto g = Grid1D::periodic(1.0, 64);
  SampledField f;
  f.samples.resize(g.npoints);
  for (int j = 0; j < g.npoints; ++j) f.samples[j] = std::sin(2.0 * M_PI * g.x(j));
  f.v0 = f.samples[0];
  f.vL = f.samples[0];
  REQUIRE(std::abs(integrate(f, g) - integrate(f.samples, g)) < 1e-15);
}

TEST_CASE("endpoint-corrected quadrature of a jump integrand converges at second order") {
  // f(x) = x g(x) with smooth periodic g jumps across the seam; the corrected
  // trapezoid sees the analytic extension and retains its h^2 law.
  auto exact = 0.5 - 0.3 / (2.0 * M_PI);
  auto err = [&](int n) {
    auto g = Grid1D::periodic(1.0, n);
    SampledField f;
    f.samples.resize(n);
    auto weight = [](double x) { return 1.0 + 0.3 * std::sin(2.0 * M_PI * x); };
    for (int j = 0; j < n; ++j) f.samples[j] = g.x(j) * weight(g.x(j));
    f.v0 = 0.0;
    f.vL = g.length * weight(0.0);
    return std::abs(integrate(f, g) - exact);
  };
  const double ratio = err(64) / err(128);
  REQUIRE(err(64) < 1e-4);
  REQUIRE(ratio > 3.9);
  REQUIRE(ratio < 4.1);
}

TEST_CASE("wavefunction endpoint helpers agree with analytic values") {
  auto g = Grid1D::periodic(1.0, 256);
  const double kappa = 2.9;
  auto psi = sample_state(g, [&](double x) { return std::exp(1i * kappa * x); }, kappa);

  REQUIRE(std::abs(psi.value0() - 1.0) < 1e-14);
  REQUIRE(std::abs(psi.valueL() - std::exp(1i * kappa)) < 1e-14);
  // Slopes inherit the second order stencil error ~ kappa^3 h^2 / 6.
  const double tol = std::pow(kappa, 3) * g.h * g.h;
  REQUIRE(std::abs(psi.slope0() - 1i * kappa) < tol);
  REQUIRE(std::abs(psi.slopeL() - 1i * kappa * std::exp(1i * kappa)) < tol);
  REQUIRE(std::abs(psi.curve0() + kappa * kappa) < kappa * kappa * kappa * kappa * g.h * g.h);

  auto box = Grid1D::dirichlet(1.0, 257);
  auto chi = sample_state(box, [](double x) { return cplx(std::sin(M_PI * x), 0.0); });
  REQUIRE(std::abs(chi.value0()) < 1e-14);
  REQUIRE(std::abs(chi.slope0() - M_PI) < 1e-3);
  REQUIRE(std::abs(chi.slopeL() + M_PI) < 1e-3);
}

TEST_CASE("plane waves are exactly normalized and norm helpers agree") {
  auto g = Grid1D::periodic(3.0, 128);
  auto psi = plane_wave(g, 2);
  REQUIRE(psi.norm() == Catch::Approx(1.0).margin(1e-14));

  auto chi = sample_state(g, [](double x) { return cplx(1.0 + x, 0.0); });
  chi.normalize();
  REQUIRE(chi.norm() == Catch::Approx(1.0).margin(1e-13));
}
