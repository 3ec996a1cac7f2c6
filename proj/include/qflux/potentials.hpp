#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "qflux/lattice.hpp"

namespace qflux {

// Smooth periodic scalar potential built from the first three ring
// harmonics. Three presets cover every built-in scenario:
//
//   zero            flat potential
//   cosine          amplitude * cos(2 pi x / L)
//   random_smooth   seeded blend of harmonics 1..3, |V| <= amplitude
//
// The random preset maps raw mt19937_64 output through ldexp rather than
// std::uniform_real_distribution, whose results may differ between standard
// library implementations; sampled values must be bit-identical everywhere.
struct Potential {
  std::string name = "zero";
  double amplitude = 0.0;
  std::uint64_t seed = 0;
  std::array<double, 3> cos_coef{{0.0, 0.0, 0.0}};
  std::array<double, 3> sin_coef{{0.0, 0.0, 0.0}};

  static Potential zero() { return Potential{}; }

  static Potential cosine(double amplitude) {
    Potential v;
    v.name = "cosine";
    v.amplitude = amplitude;
    v.cos_coef = {{1.0, 0.0, 0.0}};
    return v;
  }

  static Potential random_smooth(double amplitude, std::uint64_t seed) {
    Potential v;
    v.name = "random_smooth";
    v.amplitude = amplitude;
    v.seed = seed;
    std::mt19937_64 rng(seed);
    auto unit = [&rng]() {
      return 2.0 * std::ldexp(static_cast<double>(rng() >> 11), -53) - 1.0;
    };
    double weight = 0.0;
    for (int m = 0; m < 3; ++m) {
      v.cos_coef[m] = unit();
      v.sin_coef[m] = unit();
      weight += std::abs(v.cos_coef[m]) + std::abs(v.sin_coef[m]);
    }
    for (int m = 0; m < 3; ++m) {
      v.cos_coef[m] /= weight;
      v.sin_coef[m] /= weight;
    }
    return v;
  }

  double value(double x, double length) const {
    double sum = 0.0;
    for (int m = 0; m < 3; ++m) {
      const double q = 2.0 * M_PI * (m + 1) * x / length;
      sum += cos_coef[m] * std::cos(q) + sin_coef[m] * std::sin(q);
    }
    return amplitude * sum;
  }

  double slope(double x, double length) const {
    double sum = 0.0;
    for (int m = 0; m < 3; ++m) {
      const double w = 2.0 * M_PI * (m + 1) / length;
      sum += w * (-cos_coef[m] * std::sin(w * x) + sin_coef[m] * std::cos(w * x));
    }
    return amplitude * sum;
  }

  Eigen::VectorXd sample(const Grid1D& g) const {
    Eigen::VectorXd v(g.npoints);
    for (int j = 0; j < g.npoints; ++j) v[j] = value(g.x(j), g.length);
    return v;
  }

  Eigen::VectorXd sample_slope(const Grid1D& g) const {
    Eigen::VectorXd v(g.npoints);
    for (int j = 0; j < g.npoints; ++j) v[j] = slope(g.x(j), g.length);
    return v;
  }
};

} // namespace qflux
