#pragma once

// Least squares with linear inequality constraints, by the Lawson-Hanson
// reduction: LSI -> least-distance programming -> non-negative least squares.

#include <nfseer/error.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace nfseer::lsi {

/// min ||A x - b|| subject to x >= 0 (Lawson-Hanson active set).
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::Index n = A.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(A.rows(), n));

  // Least squares on the passive columns; zero elsewhere.
  const auto passive_solve = [&]() {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    const Eigen::VectorXd zs = sub.colPivHouseholderQr().solve(b);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) z(cols[k]) = zs(static_cast<Eigen::Index>(k));
    return z;
  };

  const int max_outer = static_cast<int>(3 * n + 10);
  for (int outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner <= n; ++inner) {
      const Eigen::VectorXd z = passive_solve();
      bool feasible = true;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= tol) {
          feasible = false;
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      if (feasible) {
        x = z;
        break;
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  return x;
}

/// min ||z|| subject to G z >= h.
inline Eigen::VectorXd least_distance(const Eigen::MatrixXd& G, const Eigen::VectorXd& h) {
  const Eigen::Index m = G.rows(), n = G.cols();
  if (m == 0) return Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd E(n + 1, m);
  E.topRows(n) = G.transpose();
  E.row(n) = h.transpose();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n + 1);
  f(n) = 1.0;
  const Eigen::VectorXd u = nnls(E, f);
  const Eigen::VectorXd r = E * u - f;
  if (!(std::abs(r(n)) > 1e-14)) throw DomainError("inequality constraints are infeasible");
  return -r.head(n) / r(n);
}

/// min ||E x - f|| subject to G x >= h. E must have full column rank.
inline Eigen::VectorXd solve(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, const Eigen::MatrixXd& G,
                             const Eigen::VectorXd& h) {
  const Eigen::Index n = E.cols();
  if (E.rows() < n) throw ArgumentError("constrained least squares needs at least as many rows as unknowns");
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(E);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  const Eigen::VectorXd qtf = (qr.householderQ().transpose() * f).head(n);
  // x = R^{-1} (z + qtf); G x >= h  <=>  (G R^{-1}) z >= h - G R^{-1} qtf
  const Eigen::MatrixXd g_hat =
      R.transpose().triangularView<Eigen::Lower>().solve(G.transpose()).transpose();
  const Eigen::VectorXd h_hat = h - g_hat * qtf;
  const Eigen::VectorXd z = least_distance(g_hat, h_hat);
  return R.triangularView<Eigen::Upper>().solve(z + qtf);
}

}  // namespace nfseer::lsi
