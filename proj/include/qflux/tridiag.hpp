#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "qflux/errors.hpp"
#include "qflux/lattice.hpp"

namespace qflux {

// LU factorization of a complex tridiagonal matrix with partial pivoting,
// in the style of LAPACK's gttrf/gtts2. Pivoting between adjacent rows
// introduces a second superdiagonal. Singularity is reported through a flag
// instead of an exception so shift-and-retry loops stay cheap.
class TridiagLU {
public:
  TridiagLU(Eigen::VectorXcd sub, Eigen::VectorXcd diag, Eigen::VectorXcd sup)
      : dl_(std::move(sub)), d_(std::move(diag)), du_(std::move(sup)) {
    const Eigen::Index n = d_.size();
    if (dl_.size() != n - 1 || du_.size() != n - 1)
      throw ParameterError("tridiagonal bands have inconsistent lengths");
    du2_.setZero(n >= 2 ? n - 2 : 0);
    ipiv_.resize(n);

    const double tiny = 1e-300;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (std::abs(d_[i]) >= std::abs(dl_[i])) {
        ipiv_[i] = static_cast<int>(i);
        if (std::abs(d_[i]) < tiny) { singular_ = true; return; }
        const cplx fact = dl_[i] / d_[i];
        dl_[i] = fact;
        d_[i + 1] -= fact * du_[i];
      } else {
        ipiv_[i] = static_cast<int>(i + 1);
        const cplx fact = d_[i] / dl_[i];
        d_[i] = dl_[i];
        dl_[i] = fact;
        const cplx tmp = du_[i];
        du_[i] = d_[i + 1];
        d_[i + 1] = tmp - fact * d_[i + 1];
        if (i + 2 < n) {
          du2_[i] = du_[i + 1];
          du_[i + 1] *= -fact;
        }
      }
    }
    ipiv_[n - 1] = static_cast<int>(n - 1);
    if (std::abs(d_[n - 1]) < tiny) singular_ = true;
  }

  bool singular() const { return singular_; }

  Eigen::VectorXcd solve(Eigen::VectorXcd b) const {
    if (singular_) throw NumericalError("tridiagonal solve on a singular factorization");
    const Eigen::Index n = d_.size();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (ipiv_[i] == i) {
        b[i + 1] -= dl_[i] * b[i];
      } else {
        const cplx tmp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = tmp - dl_[i] * b[i];
      }
    }
    b[n - 1] /= d_[n - 1];
    if (n >= 2) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
    for (Eigen::Index i = n - 3; i >= 0; --i)
      b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
    return b;
  }

private:
  Eigen::VectorXcd dl_, d_, du_, du2_;
  Eigen::VectorXi ipiv_;
  bool singular_ = false;
};

// Solver for a tridiagonal matrix plus the two corner entries a periodic
// wrap adds:  M = T + c_tr e_0 e_{n-1}^T + c_bl e_{n-1} e_0^T.
//
// Writing the corners as M = T + U V^T with U = [c_tr e_0, c_bl e_{n-1}] and
// V = [e_{n-1}, e_0], Woodbury gives
//   M^{-1} b = y - W (I + V^T W)^{-1} V^T y,   y = T^{-1} b,  W = T^{-1} U,
// so a factorization costs two extra tridiagonal solves and each application
// one 2x2 solve. Corner-free input degrades gracefully to a plain solve.
class CornerSolver {
public:
  CornerSolver(Eigen::VectorXcd sub, Eigen::VectorXcd diag, Eigen::VectorXcd sup,
               cplx corner_tr, cplx corner_bl)
      : n_(diag.size()), lu_(std::move(sub), std::move(diag), std::move(sup)) {
    if (lu_.singular()) { singular_ = true; return; }
    has_corners_ = (corner_tr != cplx(0.0, 0.0)) || (corner_bl != cplx(0.0, 0.0));
    if (!has_corners_) return;

    Eigen::VectorXcd u0 = Eigen::VectorXcd::Zero(n_);
    Eigen::VectorXcd u1 = Eigen::VectorXcd::Zero(n_);
    u0[0] = corner_tr;
    u1[n_ - 1] = corner_bl;
    w0_ = lu_.solve(std::move(u0));
    w1_ = lu_.solve(std::move(u1));

    // K = I + V^T W with V = [e_{n-1}, e_0]
    k00_ = 1.0 + w0_[n_ - 1];
    k01_ = w1_[n_ - 1];
    k10_ = w0_[0];
    k11_ = 1.0 + w1_[0];
    det_ = k00_ * k11_ - k01_ * k10_;
    if (std::abs(det_) < 1e-280) singular_ = true;
  }

  bool singular() const { return singular_; }

  Eigen::VectorXcd solve(Eigen::VectorXcd b) const {
    if (singular_) throw NumericalError("corner solve on a singular factorization");
    Eigen::VectorXcd y = lu_.solve(std::move(b));
    if (!has_corners_) return y;
    const cplx r0 = y[n_ - 1];
    const cplx r1 = y[0];
    const cplx t0 = (k11_ * r0 - k01_ * r1) / det_;
    const cplx t1 = (k00_ * r1 - k10_ * r0) / det_;
    y -= t0 * w0_ + t1 * w1_;
    return y;
  }

private:
  Eigen::Index n_;
  TridiagLU lu_;
  bool has_corners_ = false;
  bool singular_ = false;
  Eigen::VectorXcd w0_, w1_;
  cplx k00_{}, k01_{}, k10_{}, k11_{}, det_{1.0, 0.0};
};

} // namespace qflux
