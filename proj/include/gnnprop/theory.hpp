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

// Closed-form bounds for random ReLU graph networks and Monte-Carlo checks of
// the Gaussian facts they rest on.
//
// Trace corridor. With a_l = C_W(l+1) n_l lambda_1(P(l))^2 / 2 and
// A_l = a_1 ... a_l,
//
//   A_l tr(K(1) Pi_1) <= tr K(l+1) <= A_l tr K(1),
//
// and the same with the Jacobian covariance G in place of K.
//
// Oversmoothing corridor for r(l+1) = tr(K(l+1) Pi_1) / tr K(l+1):
//
//   r >= 1 / (1 + (1/r(1) - 1) prod (lambda_2 / lambda_1)^2)
//   r <= min(1, prod (lambda_1 / lambda_|V|)^2 r(1))
//
// For P(l) = (1 - t_l) I + t_l P, with T = sum t_l:
//
//   r >= 1 / (1 + exp[(lambda_2 - lambda_1) / max(1, lambda_1) T])
//   r <= min(1, exp[(lambda_1 - lambda_|V|) / min(1, lambda_|V|) T]
//               (1 - 1/r(1))^{-1})

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gnnprop/diagnostics.hpp"
#include "gnnprop/errors.hpp"
#include "gnnprop/network.hpp"
#include "gnnprop/rng.hpp"
#include "gnnprop/stats.hpp"

namespace gnnprop {

inline double he_variance(int fan_in, double lambda1) {
  if (fan_in < 1) throw ParameterError("he_variance: fan_in must be >= 1");
  if (!(lambda1 > 0.0)) {
    throw ParameterError("he_variance: lambda_1 must be positive");
  }
  return 2.0 / (fan_in * lambda1 * lambda1);
}

struct TraceCorridor {
  std::vector<double> a;      // a[l], l = 1..L; a[0] unused
  std::vector<double> A;      // A[l] = a_1 ... a_l, A[0] = 1
  std::vector<double> lower;  // bounds on tr K(l), l = 1..L+1; index 0 unused
  std::vector<double> upper;
};

// Per-layer multipliers for a vanilla network with variances `c` (indexed
// like NetworkState::variances).
inline std::vector<double> trace_multipliers(const Architecture& arch,
                                             const std::vector<double>& c) {
  if (arch.residual()) {
    throw ParameterError("trace corridor applies to vanilla networks");
  }
  if (static_cast<int>(c.size()) != arch.depth + 2) {
    throw ContractError("trace_multipliers: one variance per layer expected");
  }
  std::vector<double> a(arch.depth + 1, 0.0);
  for (int l = 1; l <= arch.depth; ++l) {
    const double lam = arch.op(l).lambda1();
    a[l] = 0.5 * c[l + 1] * arch.widths[l] * lam * lam;
  }
  return a;
}

// Corridor for tr K(l) (or tr G(l)) given tr K(1) and tr(K(1) Pi_1).
inline TraceCorridor trace_corridor(const Architecture& arch,
                                    const std::vector<double>& variances,
                                    double trace_first, double top_first) {
  TraceCorridor out;
  out.a = trace_multipliers(arch, variances);
  const int L = arch.depth;
  out.A.assign(L + 1, 1.0);
  for (int l = 1; l <= L; ++l) out.A[l] = out.A[l - 1] * out.a[l];
  out.lower.assign(L + 2, 0.0);
  out.upper.assign(L + 2, 0.0);
  for (int l = 0; l <= L; ++l) {
    out.lower[l + 1] = out.A[l] * top_first;
    out.upper[l + 1] = out.A[l] * trace_first;
  }
  return out;
}

inline TraceCorridor trace_corridor(const Architecture& arch,
                                    const std::vector<double>& variances,
                                    const Eigen::MatrixXd& k1,
                                    const Eigen::MatrixXd& pi1) {
  return trace_corridor(arch, variances, k1.trace(), (k1 * pi1).trace());
}

struct TraceRatioBounds {
  double lower = 0.0;  // conservative: the wider of the two readings
  double upper = 0.0;
  double positional_lower = 0.0;  // from lambda_|V| and lambda_1
  double positional_upper = 0.0;
  double magnitude_lower = 0.0;   // from min |lambda| and max |lambda|
  double magnitude_upper = 0.0;
  bool readings_differ = false;
};

// Bounds on tr K(l+1) / tr K(l) for l = 1..L. "Smallest" and "largest"
// eigenvalue can be read by position in the ordered spectrum or by
// magnitude; both are evaluated and the wider corridor is reported.
inline TraceRatioBounds per_layer_trace_ratio_bounds(
    const Architecture& arch, const std::vector<double>& variances, int l) {
  if (l < 1 || l > arch.depth) {
    throw ParameterError("per_layer_trace_ratio_bounds: layer out of range");
  }
  const auto& p = arch.op(l);
  const double k = 0.5 * variances[l + 1] * arch.widths[l];
  TraceRatioBounds b;
  b.positional_lower = k * p.lambda_min() * p.lambda_min();
  b.positional_upper = k * p.lambda1() * p.lambda1();
  b.magnitude_lower = k * p.min_abs_eigenvalue() * p.min_abs_eigenvalue();
  b.magnitude_upper = k * p.max_abs_eigenvalue() * p.max_abs_eigenvalue();
  b.lower = std::min(b.positional_lower, b.magnitude_lower);
  b.upper = std::max(b.positional_upper, b.magnitude_upper);
  b.readings_differ = b.positional_lower != b.magnitude_lower ||
                      b.positional_upper != b.magnitude_upper;
  return b;
}

struct LayerSpectrum {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda_min = 1.0;
};

inline LayerSpectrum spectrum_of(const AggregationOperator& p) {
  return {p.lambda1(), p.lambda2(), p.lambda_min()};
}

inline std::vector<LayerSpectrum> spectra_of(const Architecture& arch) {
  std::vector<LayerSpectrum> out;
  for (int l = 1; l <= arch.depth; ++l) out.push_back(spectrum_of(arch.op(l)));
  return out;
}

struct RatioBounds {
  double lower = 0.0;
  double upper = 1.0;
  bool upper_vacuous = false;  // some lambda_|V| <= 0
};

namespace detail {

inline void check_r1(double r1, const char* where) {
  if (r1 == 0.0) {
    throw DegenerateError(std::string(where) + ": r(1) = 0");
  }
  if (!(r1 > 0.0 && r1 <= 1.0)) {
    throw ParameterError(std::string(where) + ": r(1) must lie in (0, 1]");
  }
}

}  // namespace detail

// Corridor for r(l+1), l = 0..spectra.size(); element l of the result bounds
// r(l+1), so element 0 is the trivial [r(1), r(1)].
inline std::vector<RatioBounds> os_ratio_corridor(
    const std::vector<LayerSpectrum>& spectra, double r1) {
  detail::check_r1(r1, "os_ratio_corridor");
  std::vector<RatioBounds> out(spectra.size() + 1);
  out[0] = {r1, r1, false};
  double gap = 1.0;     // prod (lambda_2 / lambda_1)^2
  double spread = 1.0;  // prod (lambda_1 / lambda_|V|)^2
  bool vacuous = false;
  for (std::size_t l = 0; l < spectra.size(); ++l) {
    const auto& s = spectra[l];
    if (!(s.lambda1 > 0.0)) {
      throw ParameterError("os_ratio_corridor: lambda_1 must be positive");
    }
    const double q = s.lambda2 / s.lambda1;
    gap *= q * q;
    if (s.lambda_min <= 0.0) {
      vacuous = true;
    } else {
      const double w = s.lambda1 / s.lambda_min;
      spread *= w * w;
    }
    RatioBounds& b = out[l + 1];
    b.lower = 1.0 / (1.0 + (1.0 / r1 - 1.0) * gap);
    b.upper_vacuous = vacuous;
    b.upper = vacuous ? 1.0 : std::min(1.0, spread * r1);
  }
  return out;
}

inline double residual_os_lower_bound(double lambda1, double lambda2,
                                      double sum_t) {
  return 1.0 /
         (1.0 + std::exp((lambda2 - lambda1) / std::max(1.0, lambda1) * sum_t));
}

struct ResidualCorridor {
  double lower = 0.0;
  // Upper bound exactly as the corollary states it. The factor
  // (1 - 1/r(1))^{-1} is negative for r(1) < 1.
  double upper_literal = 0.0;
  // The fixed-operator upper bound evaluated on the mapped eigenvalues
  // 1 + t (lambda - 1).
  double upper_mapped = 0.0;
  // The fixed-operator lower bound on the mapped eigenvalues.
  double lower_mapped = 0.0;
  bool upper_discrepancy = false;
};

inline ResidualCorridor residual_os_corridor(double lambda1, double lambda2,
                                             double lambda_min,
                                             const std::vector<double>& t,
                                             double r1) {
  if (!(lambda_min > 0.0)) {
    throw HypothesisError(
        "residual_os_corridor: P must be positive definite, lambda_|V| = " +
        std::to_string(lambda_min));
  }
  detail::check_r1(r1, "residual_os_corridor");
  double sum_t = 0.0;
  std::vector<LayerSpectrum> mapped;
  for (double tl : t) {
    if (!(tl >= 0.0 && tl <= 1.0)) {
      throw ParameterError("residual_os_corridor: t must lie in [0, 1]");
    }
    sum_t += tl;
    mapped.push_back({1.0 + tl * (lambda1 - 1.0), 1.0 + tl * (lambda2 - 1.0),
                      1.0 + tl * (lambda_min - 1.0)});
  }
  ResidualCorridor c;
  c.lower = residual_os_lower_bound(lambda1, lambda2, sum_t);
  const double expo =
      std::exp((lambda1 - lambda_min) / std::min(1.0, lambda_min) * sum_t);
  const double factor = r1 == 1.0 ? std::numeric_limits<double>::infinity()
                                  : 1.0 / (1.0 - 1.0 / r1);
  c.upper_literal = std::min(1.0, expo * factor);
  const auto fixed = os_ratio_corridor(mapped, r1);
  c.upper_mapped = fixed.back().upper;
  c.lower_mapped = fixed.back().lower;
  c.upper_discrepancy = std::abs(c.upper_literal - c.upper_mapped) > 1e-12;
  return c;
}

enum class CheckStatus { kPass, kFail, kInconclusive };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass:
      return "pass";
    case CheckStatus::kFail:
      return "fail";
    case CheckStatus::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

// Below this many independent samples a 3-SE verdict is not attempted.
inline constexpr int kMinConclusiveSamples = 30;

struct CheckResult {
  std::string name;
  double value = 0.0;
  double se = 0.0;
  double expected = 0.0;
  CheckStatus status = CheckStatus::kInconclusive;
  std::string detail;
};

enum class InjectedBug { kNone, kDoubleRelu };

struct LemmaHalfOptions {
  int vertices = 10;
  int depth = 4;
  int width = 8;
  int layer = 4;  // layer at which the value form is checked
  int derivative_layer = 2;
  InjectedBug bug = InjectedBug::kNone;
  int workers = 1;
};

// E[relu(z)^2] / E[z^2] and E[(d relu(z))^2] / E[(dz)^2] on random graph
// networks; both should equal 1/2. One network per sample; all neurons of the
// chosen vertex enter the per-sample sums.
inline std::vector<CheckResult> check_lemma_half(int m, std::uint64_t seed,
                                                 const LemmaHalfOptions& o = {}) {
  if (m < 1) throw ParameterError("check_lemma_half: m must be >= 1");
  // Random graph: each pair joined with probability 0.4, then a path so the
  // graph is connected; self-loops are added by normalization.
  Philox4x32 grng = make_stream(seed, StreamPurpose::kGraph, 0);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < o.vertices; ++u) {
    for (int v = u + 1; v < o.vertices; ++v) {
      if (v == u + 1 || uniform01(grng) < 0.4) edges.emplace_back(u, v);
    }
  }
  const Graph g = make_graph(o.vertices, edges);
  const OperatorPtr p = normalized_adjacency(g, true);
  const Architecture arch = Architecture::vanilla(
      o.depth, 3, o.width, o.width, repeat_operator(p, o.depth));
  Eigen::MatrixXd x(o.vertices, 3);
  Philox4x32 xrng = make_stream(seed, StreamPurpose::kFeatures, 0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(xrng);

  const int v = 0;
  std::vector<double> num(m), den(m), dnum(m), dden(m);
  parallel_for(static_cast<std::size_t>(m), o.workers, [&](std::size_t d) {
    const NetworkState state =
        init_weights(arch, InitScheme::he_gnn(), draw_seed(seed, d));
    ForwardTrace trace = forward(state, arch, x);
    Eigen::MatrixXd z = trace.z[o.layer];
    if (o.bug == InjectedBug::kDoubleRelu) z = relu(z);
    const Eigen::RowVectorXd zv = z.row(v);
    num[d] = zv.cwiseMax(0.0).squaredNorm();
    den[d] = zv.squaredNorm();
    const auto dz = input_jacobian_rows(state, arch, trace, 1, 0);
    Eigen::RowVectorXd dzv = dz[o.derivative_layer].row(v);
    Eigen::RowVectorXd zl = trace.z[o.derivative_layer].row(v);
    if (o.bug == InjectedBug::kDoubleRelu) {
      dzv = dzv.cwiseProduct((zl.array() > 0.0).cast<double>().matrix());
    }
    dnum[d] = dzv.cwiseProduct((zl.array() > 0.0).cast<double>().matrix())
                  .squaredNorm();
    dden[d] = dzv.squaredNorm();
  });

  const auto verdict = [&](const char* name, const std::vector<double>& a,
                           const std::vector<double>& b) {
    CheckResult r;
    r.name = name;
    r.expected = 0.5;
    const RatioEstimate e = ratio_of_means(a, b);
    r.value = e.value;
    r.se = e.se;
    if (m < kMinConclusiveSamples) {
      r.status = CheckStatus::kInconclusive;
      r.detail = "fewer than " + std::to_string(kMinConclusiveSamples) +
                 " samples";
    } else {
      r.status = std::abs(e.value - 0.5) <= 3.0 * e.se ? CheckStatus::kPass
                                                       : CheckStatus::kFail;
    }
    return r;
  };
  return {verdict("lemma_half_value", num, den),
          verdict("lemma_half_derivative", dnum, dden)};
}

// E[relu(z1) relu(z2)] >= K12 / 2 - 3 SE for centered Gaussians with
// covariance K.
inline CheckResult check_sigma_trick(const Eigen::Matrix2d& k, int m,
                                     std::uint64_t seed) {
  if (m < 1) throw ParameterError("check_sigma_trick: m must be >= 1");
  if (!k.allFinite() || std::abs(k(0, 1) - k(1, 0)) > 1e-12 * k.cwiseAbs().maxCoeff()) {
    throw ParameterError("check_sigma_trick: covariance must be symmetric");
  }
  const double det = k(0, 0) * k(1, 1) - k(0, 1) * k(0, 1);
  const double tol = 1e-12 * std::max(1.0, k.cwiseAbs().maxCoeff());
  if (k(0, 0) < -tol || k(1, 1) < -tol || det < -tol * std::max(1.0, k.trace())) {
    throw ParameterError("check_sigma_trick: covariance is not PSD");
  }
  // Cholesky-like factor that tolerates singular K.
  const double a = std::sqrt(std::max(0.0, k(0, 0)));
  const double b = a > 0.0 ? k(0, 1) / a : 0.0;
  const double c = std::sqrt(std::max(0.0, k(1, 1) - b * b));
  Philox4x32 rng = make_stream(seed, StreamPurpose::kSampling, 0);
  std::vector<double> prod(m);
  for (int i = 0; i < m; ++i) {
    const double g1 = standard_normal(rng);
    const double g2 = standard_normal(rng);
    const double z1 = a * g1;
    const double z2 = b * g1 + c * g2;
    prod[i] = std::max(z1, 0.0) * std::max(z2, 0.0);
  }
  CheckResult r;
  r.name = "sigma_trick";
  r.expected = 0.5 * k(0, 1);
  r.value = mean_of(prod);
  r.se = m >= 2 ? standard_error(prod) : std::numeric_limits<double>::infinity();
  if (m < kMinConclusiveSamples) {
    r.status = CheckStatus::kInconclusive;
  } else {
    r.status = r.value >= r.expected - 3.0 * r.se ? CheckStatus::kPass
                                                  : CheckStatus::kFail;
  }
  return r;
}

}  // namespace gnnprop
