// Copyright 2026 The gnnprop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense symmetric eigensolver by cyclic Jacobi rotations.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gnnprop/errors.hpp"

namespace gnnprop {

struct JacobiOptions {
  // Converged when the off-diagonal Frobenius norm is at most
  // `tolerance * ||A||_F`.
  double tolerance = 1e-12;
  int max_sweeps = 100;
  // Relative symmetry tolerance on entry, against max |A_ij|.
  double symmetry_tolerance = 1e-12;
};

struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // column j pairs with values(j)
  int sweeps = 0;
  double off_diagonal = 0.0;  // final off-diagonal Frobenius norm
  double max_residual = 0.0;  // max_j ||A v_j - lambda_j v_j||
};

namespace detail {

inline double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double sum = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index q = 0; q < n; ++q) {
    const double* col = a.col(q).data();
    for (Eigen::Index p = 0; p < q; ++p) sum += col[p] * col[p];
  }
  return std::sqrt(2.0 * sum);
}

// One cyclic sweep of plane rotations over every pair p < q of `a`, applied
// on the right of `v`. Pairs with |a(p,q)| <= skip are left alone. Returns
// the number of rotations performed.
inline long jacobi_sweep(Eigen::MatrixXd& a, Eigen::MatrixXd& v, double skip) {
  const Eigen::Index n = a.rows();
  const Eigen::Index nv = v.rows();
  long rotations = 0;
  for (Eigen::Index p = 0; p + 1 < n; ++p) {
    for (Eigen::Index q = p + 1; q < n; ++q) {
      const double apq = a(p, q);
      if (std::abs(apq) <= skip) continue;
      const double app = a(p, p);
      const double aqq = a(q, q);
      const double theta = (aqq - app) / (2.0 * apq);
      const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                       (std::abs(theta) + std::sqrt(theta * theta + 1.0));
      const double c = 1.0 / std::sqrt(t * t + 1.0);
      const double s = t * c;

      double* cp = a.col(p).data();
      double* cq = a.col(q).data();
      for (Eigen::Index k = 0; k < n; ++k) {
        const double xp = cp[k];
        const double xq = cq[k];
        cp[k] = c * xp - s * xq;
        cq[k] = s * xp + c * xq;
      }
      // Rows p and q mirror the rotated columns.
      for (Eigen::Index k = 0; k < n; ++k) {
        a(p, k) = cp[k];
        a(q, k) = cq[k];
      }
      a(p, p) = app - t * apq;
      a(q, q) = aqq + t * apq;
      a(p, q) = 0.0;
      a(q, p) = 0.0;

      double* vp = v.col(p).data();
      double* vq = v.col(q).data();
      for (Eigen::Index k = 0; k < nv; ++k) {
        const double xp = vp[k];
        const double xq = vq[k];
        vp[k] = c * xp - s * xq;
        vq[k] = s * xp + c * xq;
      }
      ++rotations;
    }
  }
  return rotations;
}

// Diagonalizes a small symmetric block in place; `q` accumulates the
// rotations starting from the identity.
inline void diagonalize_block(Eigen::MatrixXd& a, Eigen::MatrixXd& q,
                              double skip, int max_sweeps) {
  q.setIdentity(a.rows(), a.rows());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (jacobi_sweep(a, q, skip) == 0) return;
  }
}

// Block-cyclic sweep: for every pair of index blocks (I, J) the principal
// submatrix on I u J is diagonalized by scalar rotations, and the
// accumulated rotation is applied to the remaining rows and columns with
// matrix products.
inline void block_jacobi_sweep(Eigen::MatrixXd& a, Eigen::MatrixXd& v,
                               Eigen::Index block, double skip) {
  const Eigen::Index n = a.rows();
  const Eigen::Index nb = (n + block - 1) / block;
  Eigen::MatrixXd sub, q, cols, rotated;
  for (Eigen::Index bi = 0; bi + 1 < nb; ++bi) {
    const Eigen::Index i0 = bi * block;
    const Eigen::Index si = std::min(block, n - i0);
    for (Eigen::Index bj = bi + 1; bj < nb; ++bj) {
      const Eigen::Index j0 = bj * block;
      const Eigen::Index sj = std::min(block, n - j0);
      if (a.block(i0, j0, si, sj).cwiseAbs().maxCoeff() <= skip) continue;
      const Eigen::Index m = si + sj;

      sub.resize(m, m);
      sub.topLeftCorner(si, si) = a.block(i0, i0, si, si);
      sub.topRightCorner(si, sj) = a.block(i0, j0, si, sj);
      sub.bottomLeftCorner(sj, si) = a.block(j0, i0, sj, si);
      sub.bottomRightCorner(sj, sj) = a.block(j0, j0, sj, sj);
      diagonalize_block(sub, q, skip, 100);

      cols.resize(n, m);
      cols.leftCols(si) = a.middleCols(i0, si);
      cols.rightCols(sj) = a.middleCols(j0, sj);
      rotated.noalias() = cols * q;
      a.middleCols(i0, si) = rotated.leftCols(si);
      a.middleCols(j0, sj) = rotated.rightCols(sj);
      a.middleRows(i0, si) = rotated.leftCols(si).transpose();
      a.middleRows(j0, sj) = rotated.rightCols(sj).transpose();
      a.block(i0, i0, si, si) = sub.topLeftCorner(si, si);
      a.block(i0, j0, si, sj) = sub.topRightCorner(si, sj);
      a.block(j0, i0, sj, si) = sub.bottomLeftCorner(sj, si);
      a.block(j0, j0, sj, sj) = sub.bottomRightCorner(sj, sj);

      cols.leftCols(si) = v.middleCols(i0, si);
      cols.rightCols(sj) = v.middleCols(j0, sj);
      rotated.noalias() = cols * q;
      v.middleCols(i0, si) = rotated.leftCols(si);
      v.middleCols(j0, sj) = rotated.rightCols(sj);
    }
  }
}

}  // namespace detail

// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
// Small matrices sweep every pair p < q in row order. Above
// `kJacobiBlockThreshold` rows the same rotations are organized by index
// blocks so that their action on the rest of the matrix becomes a matrix
// product. Throws NumericError if the off-diagonal mass has not dropped
// below the tolerance after `max_sweeps` sweeps.
inline constexpr Eigen::Index kJacobiBlockThreshold = 128;
inline constexpr Eigen::Index kJacobiBlockSize = 32;

inline SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input,
                                   const JacobiOptions& options = {}) {
  const Eigen::Index n = input.rows();
  if (input.cols() != n) {
    throw ContractError("jacobi_eigen: matrix must be square");
  }
  if (!input.allFinite()) {
    throw ParameterError("jacobi_eigen: matrix has non-finite entries");
  }
  const double max_abs = n > 0 ? input.cwiseAbs().maxCoeff() : 0.0;
  if (n > 0 && (input - input.transpose()).cwiseAbs().maxCoeff() >
                   options.symmetry_tolerance * std::max(max_abs, 1e-300)) {
    throw ParameterError("jacobi_eigen: matrix is not symmetric");
  }

  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();
  // Entries this small cannot keep the off-diagonal norm above tolerance.
  const double skip =
      0.1 * options.tolerance * scale / std::max<double>(static_cast<double>(n), 1.0);

  SymmetricEigen result;
  double off = detail::off_diagonal_norm(a);
  int sweep = 0;
  while (off > options.tolerance * scale && scale > 0.0) {
    if (sweep == options.max_sweeps) {
      throw NumericError("jacobi_eigen: no convergence after " +
                         std::to_string(options.max_sweeps) +
                         " sweeps; off-diagonal norm " + std::to_string(off) +
                         " vs ||A||_F " + std::to_string(scale));
    }
    ++sweep;
    if (n > kJacobiBlockThreshold) {
      detail::block_jacobi_sweep(a, v, kJacobiBlockSize, skip);
    } else {
      detail::jacobi_sweep(a, v, skip);
    }
    off = detail::off_diagonal_norm(a);
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) {
                     return a(i, i) > a(j, j);
                   });
  result.values.resize(n);
  result.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    result.values(j) = a(order[j], order[j]);
    result.vectors.col(j) = v.col(order[j]);
  }
  result.sweeps = sweep;
  result.off_diagonal = off;
  if (n > 0) {
    const Eigen::MatrixXd residual =
        input * result.vectors - result.vectors * result.values.asDiagonal();
    result.max_residual = residual.colwise().norm().maxCoeff();
  }
  return result;
}

}  // namespace gnnprop
