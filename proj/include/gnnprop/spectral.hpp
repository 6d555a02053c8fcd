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

// Aggregation operators: symmetric nonnegative |V| x |V| matrices together
// with their eigendecomposition and the projector onto the top eigenspace.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gnnprop/errors.hpp"
#include "gnnprop/graph.hpp"
#include "gnnprop/jacobi.hpp"

namespace gnnprop {

// Eigenvalues within group_tol * max(1, |lambda_1|) of lambda_1 belong to the
// top eigenspace.
inline constexpr double kGroupTolerance = 1e-8;

class AggregationOperator {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  // Validates and decomposes `matrix`. Symmetry is required to
  // 1e-12 * max|P_ij| and entries must be >= -1e-14.
  static std::shared_ptr<const AggregationOperator> from_matrix(
      const Eigen::MatrixXd& matrix, double group_tol = kGroupTolerance) {
    check_entries(matrix);
    auto op = std::shared_ptr<AggregationOperator>(new AggregationOperator);
    op->matrix_ = 0.5 * (matrix + matrix.transpose());
    op->eigen_ = jacobi_eigen(op->matrix_);
    op->finish(group_tol);
    return op;
  }

  // Operator with a known decomposition; used where the spectrum follows
  // from another operator's by an exact map.
  static std::shared_ptr<const AggregationOperator> from_parts(
      Eigen::MatrixXd matrix, SymmetricEigen eigen, double group_tol,
      std::optional<double> residual_strength) {
    auto op = std::shared_ptr<AggregationOperator>(new AggregationOperator);
    op->matrix_ = std::move(matrix);
    op->eigen_ = std::move(eigen);
    op->residual_strength_ = residual_strength;
    op->finish(group_tol);
    return op;
  }

  int size() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const SparseMatrix& sparse() const { return sparse_; }
  const Eigen::VectorXd& eigenvalues() const { return eigen_.values; }
  const Eigen::MatrixXd& eigenvectors() const { return eigen_.vectors; }
  const SymmetricEigen& decomposition() const { return eigen_; }

  int top_multiplicity() const { return top_multiplicity_; }
  double lambda1() const { return eigen_.values(0); }
  // Second eigenvalue counted with multiplicity; equals lambda1 when the top
  // eigenspace is degenerate.
  double lambda2() const {
    return size() > 1 ? eigen_.values(1) : eigen_.values(0);
  }
  double lambda_min() const { return eigen_.values(size() - 1); }
  double max_abs_eigenvalue() const {
    return eigen_.values.cwiseAbs().maxCoeff();
  }
  double min_abs_eigenvalue() const {
    return eigen_.values.cwiseAbs().minCoeff();
  }

  // Orthonormal basis of the top eigenspace (|V| x d1) and its projector.
  const Eigen::MatrixXd& top_basis() const { return top_basis_; }
  const Eigen::MatrixXd& projector() const { return projector_; }

  // Set when the operator is (1 - t) I + t P for some base P.
  std::optional<double> residual_strength() const {
    return residual_strength_;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const { return sparse_ * x; }

 private:
  AggregationOperator() = default;

  static void check_entries(const Eigen::MatrixXd& m) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
      throw ParameterError("aggregation operator must be a nonempty square "
                           "matrix");
    }
    if (!m.allFinite()) {
      throw ParameterError("aggregation operator has non-finite entries");
    }
    const double max_abs = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * max_abs) {
      throw ParameterError("aggregation operator is not symmetric");
    }
    if (m.minCoeff() < -1e-14) {
      throw ParameterError("aggregation operator has a negative entry");
    }
  }

  void finish(double group_tol) {
    sparse_ = matrix_.sparseView(0.0, 0.0);
    sparse_.makeCompressed();
    const double l1 = eigen_.values(0);
    const double cut = group_tol * std::max(1.0, std::abs(l1));
    top_multiplicity_ = 0;
    while (top_multiplicity_ < size() &&
           l1 - eigen_.values(top_multiplicity_) <= cut) {
      ++top_multiplicity_;
    }
    top_basis_ = eigen_.vectors.leftCols(top_multiplicity_);
    projector_ = top_basis_ * top_basis_.transpose();
  }

  Eigen::MatrixXd matrix_;
  SparseMatrix sparse_;
  SymmetricEigen eigen_;
  int top_multiplicity_ = 0;
  Eigen::MatrixXd top_basis_;
  Eigen::MatrixXd projector_;
  std::optional<double> residual_strength_;
};

using OperatorPtr = std::shared_ptr<const AggregationOperator>;

// D^{-1/2} (A + s I) D^{-1/2} with D the row sums of A + s I. A vertex with
// zero row sum gets a zero row and column, or a DegenerateError in strict
// mode.
inline Eigen::MatrixXd normalized_adjacency_matrix(const Graph& graph,
                                                   bool self_loops,
                                                   bool strict = false) {
  const int n = graph.num_vertices;
  if (n <= 0) throw ParameterError("normalized_adjacency: empty graph");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [u, v] : graph.edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  if (self_loops) a.diagonal().array() += 1.0;
  const Eigen::VectorXd degree = a.rowwise().sum();
  Eigen::VectorXd scale(n);
  for (int v = 0; v < n; ++v) {
    if (degree(v) > 0.0) {
      scale(v) = 1.0 / std::sqrt(degree(v));
    } else if (strict) {
      throw DegenerateError("normalized_adjacency: vertex " +
                            std::to_string(v) + " has degree zero");
    } else {
      scale(v) = 0.0;
    }
  }
  return scale.asDiagonal() * a * scale.asDiagonal();
}

inline OperatorPtr normalized_adjacency(const Graph& graph, bool self_loops,
                                        bool strict = false) {
  return AggregationOperator::from_matrix(
      normalized_adjacency_matrix(graph, self_loops, strict));
}

inline SymmetricEigen eigendecompose(const Eigen::MatrixXd& p,
                                     double tol = 1e-12) {
  JacobiOptions options;
  options.tolerance = tol;
  return jacobi_eigen(p, options);
}

inline Eigen::MatrixXd top_projector(const SymmetricEigen& eigen,
                                     double group_tol = kGroupTolerance) {
  const Eigen::Index n = eigen.values.size();
  if (n == 0) return {};
  const double l1 = eigen.values(0);
  const double cut = group_tol * std::max(1.0, std::abs(l1));
  Eigen::Index d = 0;
  while (d < n && l1 - eigen.values(d) <= cut) ++d;
  const auto basis = eigen.vectors.leftCols(d);
  return basis * basis.transpose();
}

// (1 - t) I + t P. The eigenvectors of P are reused and every eigenvalue is
// mapped to 1 + t (lambda - 1); the map is increasing for t > 0, so the
// ordering is preserved.
inline OperatorPtr residual_operator(const AggregationOperator& p, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ParameterError("residual_operator: t must lie in [0, 1], got " +
                         std::to_string(t));
  }
  const int n = p.size();
  Eigen::MatrixXd m = t * p.matrix();
  m.diagonal().array() += 1.0 - t;
  SymmetricEigen eigen = p.decomposition();
  eigen.values = (1.0 + t * (eigen.values.array() - 1.0)).matrix();
  if (t == 0.0) {
    eigen.vectors = Eigen::MatrixXd::Identity(n, n);
    eigen.values.setOnes();
  }
  eigen.max_residual =
      (m * eigen.vectors - eigen.vectors * eigen.values.asDiagonal())
          .colwise()
          .norm()
          .maxCoeff();
  return AggregationOperator::from_parts(std::move(m), std::move(eigen),
                                         kGroupTolerance, t);
}

// Connected components of the positivity pattern {P_uv > 0}.
inline std::vector<int> positivity_components(const Eigen::MatrixXd& p,
                                              int* count = nullptr) {
  const int n = static_cast<int>(p.rows());
  std::vector<int> comp(n, -1);
  int c = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = c;
    stack.push_back(s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        if (comp[v] < 0 && p(u, v) > 0.0) {
          comp[v] = c;
          stack.push_back(v);
        }
      }
    }
    ++c;
  }
  if (count != nullptr) *count = c;
  return comp;
}

// Nonnegative orthonormal basis of the top eigenspace, one vector per
// positivity component whose largest eigenvalue is lambda_1. Each vector is
// read off the projector: on a component attaining lambda_1 the projector is
// phi phi^T, so a column through the component's heaviest diagonal entry is
// +-phi up to scale.
inline Eigen::MatrixXd perron_basis(const AggregationOperator& p) {
  const int n = p.size();
  int num_components = 0;
  const std::vector<int> comp =
      positivity_components(p.matrix(), &num_components);
  const Eigen::MatrixXd& proj = p.projector();
  std::vector<Eigen::VectorXd> vectors;
  for (int c = 0; c < num_components; ++c) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (comp[v] == c && (best < 0 || proj(v, v) > proj(best, best))) best = v;
    }
    if (proj(best, best) <= 0.5 / n) continue;  // component misses lambda_1
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
    for (int v = 0; v < n; ++v) {
      if (comp[v] == c) phi(v) = proj(v, best);
    }
    phi /= phi.norm();
    if (phi.sum() < 0.0) phi = -phi;
    const double worst = phi.minCoeff();
    if (worst < -1e-10) {
      throw NumericError("perron_basis: component " + std::to_string(c) +
                         " has entry " + std::to_string(worst) +
                         " after sign normalization");
    }
    vectors.push_back(std::move(phi));
  }
  if (static_cast<int>(vectors.size()) != p.top_multiplicity()) {
    throw NumericError("perron_basis: found " +
                       std::to_string(vectors.size()) +
                       " Perron vectors for a top eigenspace of dimension " +
                       std::to_string(p.top_multiplicity()));
  }
  Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t j = 0; j < vectors.size(); ++j) basis.col(j) = vectors[j];
  return basis;
}

struct InterferenceResult {
  double max_off_diagonal = 0.0;  // max_{v1 != v2} (sum_{j>=2} pi_j pi_j^T)
  double delta = 0.0;             // min_v (pi_1)_v^2
};

// Entrywise check of sum_{j>=2} pi_j pi_j^T <= -min_v (pi_1)_v^2 off the
// diagonal. The sum is formed from the computed eigenvectors.
inline InterferenceResult interference_bound(const AggregationOperator& p) {
  if (p.top_multiplicity() != 1) {
    throw ParameterError(
        "interference_bound: needs a one-dimensional top eigenspace, got "
        "dimension " + std::to_string(p.top_multiplicity()));
  }
  const int n = p.size();
  const Eigen::VectorXd pi1 = perron_basis(p).col(0);
  const auto rest = p.eigenvectors().rightCols(n - 1);
  const Eigen::MatrixXd sum = rest * rest.transpose();
  InterferenceResult out;
  out.delta = pi1.array().square().minCoeff();
  out.max_off_diagonal = -std::numeric_limits<double>::infinity();
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u != v) out.max_off_diagonal = std::max(out.max_off_diagonal, sum(u, v));
    }
  }
  if (n > 1 && out.max_off_diagonal > -out.delta + 1e-10) {
    throw NumericError("interference_bound: off-diagonal maximum " +
                       std::to_string(out.max_off_diagonal) +
                       " exceeds -delta = " + std::to_string(-out.delta));
  }
  return out;
}

struct AssumptionReport {
  bool symmetric = true;
  bool nonnegative = true;
  bool shared_top_eigenspace = true;
  double max_projector_gap = 0.0;
  // Layers (1-based) whose operator is the identity obtained from t = 0; its
  // top eigenspace is the whole space.
  std::vector<int> zero_strength_layers;
  bool ok() const {
    return symmetric && nonnegative && shared_top_eigenspace &&
           zero_strength_layers.empty();
  }
};

inline AssumptionReport assert_assumptions(
    const std::vector<OperatorPtr>& operators) {
  if (operators.empty()) {
    throw ParameterError("assert_assumptions: empty operator list");
  }
  AssumptionReport report;
  const Eigen::MatrixXd& first = operators.front()->projector();
  for (std::size_t l = 0; l < operators.size(); ++l) {
    const auto& m = operators[l]->matrix();
    const double max_abs = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * max_abs) {
      report.symmetric = false;
    }
    if (m.minCoeff() < -1e-14) report.nonnegative = false;
    const auto t = operators[l]->residual_strength();
    if (t && *t == 0.0) {
      report.zero_strength_layers.push_back(static_cast<int>(l) + 1);
    }
    if (operators[l]->size() != operators.front()->size()) {
      report.shared_top_eigenspace = false;
      report.max_projector_gap = std::numeric_limits<double>::infinity();
      continue;
    }
    const double gap =
        (operators[l]->projector() - first).cwiseAbs().maxCoeff();
    report.max_projector_gap = std::max(report.max_projector_gap, gap);
    if (gap > 1e-8) report.shared_top_eigenspace = false;
  }
  return report;
}

}  // namespace gnnprop
