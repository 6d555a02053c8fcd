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

// Monte-Carlo estimates over the weight prior: per-neuron covariances
// K(l) = E[z_i(l) z_i(l)^T], Jacobian traces tr G(l), output distortion,
// oversmoothing ratio and class condition number.
//
// Every ensemble member d draws its weights from derive_seed(seed, kDrawTag,
// d). Per-draw results are stored by index and reduced in index order.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gnnprop/errors.hpp"
#include "gnnprop/network.hpp"
#include "gnnprop/parallel.hpp"
#include "gnnprop/rng.hpp"
#include "gnnprop/stats.hpp"

namespace gnnprop {

inline constexpr std::uint64_t kDrawTag = 0x64726177;  // "draw"

inline std::uint64_t draw_seed(std::uint64_t seed, std::uint64_t draw) {
  return derive_seed(seed, kDrawTag, draw);
}

// K(1) in closed form. Vanilla: C_W(1) x x^T. Residual:
// C_W(0) (x x^T + beta_1^2 C_W(1) n_1 P x x^T P).
inline Eigen::MatrixXd exact_first_layer_cov(const Architecture& arch,
                                             const InitScheme& scheme,
                                             const Eigen::MatrixXd& x) {
  arch.validate();
  const std::vector<double> c = weight_variances(arch, scheme);
  const Eigen::MatrixXd gram = x * x.transpose();
  if (!arch.residual()) return c[1] * gram;
  const Eigen::MatrixXd& p = arch.op(1).matrix();
  const double b = arch.beta[0];
  return c[0] * (gram + b * b * c[1] * arch.widths[1] * (p * gram * p));
}

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

inline Estimate estimate_of(const std::vector<double>& xs) {
  return {mean_of(xs), xs.size() >= 2 ? standard_error(xs)
                                      : std::numeric_limits<double>::infinity()};
}

struct CovarianceEstimate {
  int layer = 0;
  int samples = 0;
  Estimate trace;             // tr K
  Estimate top_trace;         // tr (K Pi_1)
  Estimate complement_trace;  // tr (K (I - Pi_1))
  RatioEstimate ratio;        // r = tr(K Pi_1) / tr K
  RatioEstimate complement;   // 1 - r, computed from the complement directly
  Eigen::MatrixXd matrix;     // K-hat, empty unless requested
};

struct CovarianceOptions {
  bool full_matrix = false;
  int workers = 1;
};

namespace detail {

struct LayerSample {
  double total = 0.0;
  double top = 0.0;
  double complement = 0.0;
};

// Per-neuron second moments of z against the top eigenspace basis `u`.
inline LayerSample layer_sample(const Eigen::MatrixXd& z,
                                const Eigen::MatrixXd& u) {
  const double width = static_cast<double>(z.cols());
  const Eigen::MatrixXd coeff = u.transpose() * z;
  const Eigen::MatrixXd rest = z - u * coeff;
  return {z.squaredNorm() / width, coeff.squaredNorm() / width,
          rest.squaredNorm() / width};
}

inline constexpr int kMatrixChunk = 8;

}  // namespace detail

inline std::vector<CovarianceEstimate> estimate_covariances(
    const Architecture& arch, const InitScheme& scheme,
    const Eigen::MatrixXd& x, const std::vector<int>& layers, int m,
    std::uint64_t seed, const CovarianceOptions& options = {}) {
  arch.validate();
  if (m < 1) throw ParameterError("estimate_covariances: m must be >= 1");
  for (int l : layers) {
    if (l < 1 || l > arch.depth + 1) {
      throw ParameterError("estimate_covariances: layer " + std::to_string(l) +
                           " outside 1..L+1");
    }
  }
  const Eigen::MatrixXd& u = arch.op(1).top_basis();
  const std::size_t nl = layers.size();
  std::vector<std::vector<detail::LayerSample>> samples(
      m, std::vector<detail::LayerSample>(nl));
  const int chunks = (m + detail::kMatrixChunk - 1) / detail::kMatrixChunk;
  std::vector<std::vector<Eigen::MatrixXd>> partial;
  if (options.full_matrix) partial.resize(chunks);

  parallel_for(static_cast<std::size_t>(chunks), options.workers,
               [&](std::size_t chunk) {
    const int begin = static_cast<int>(chunk) * detail::kMatrixChunk;
    const int end = std::min(m, begin + detail::kMatrixChunk);
    if (options.full_matrix) {
      partial[chunk].assign(nl, Eigen::MatrixXd::Zero(x.rows(), x.rows()));
    }
    for (int d = begin; d < end; ++d) {
      const NetworkState state = init_weights(arch, scheme, draw_seed(seed, d));
      const ForwardTrace trace = forward(state, arch, x);
      for (std::size_t k = 0; k < nl; ++k) {
        const Eigen::MatrixXd& z = trace.z[layers[k]];
        samples[d][k] = detail::layer_sample(z, u);
        if (options.full_matrix) {
          partial[chunk][k].noalias() +=
              z * z.transpose() / static_cast<double>(z.cols());
        }
      }
    }
  });

  std::vector<CovarianceEstimate> out(nl);
  for (std::size_t k = 0; k < nl; ++k) {
    std::vector<double> total(m), top(m), comp(m);
    for (int d = 0; d < m; ++d) {
      total[d] = samples[d][k].total;
      top[d] = samples[d][k].top;
      comp[d] = samples[d][k].complement;
    }
    CovarianceEstimate& e = out[k];
    e.layer = layers[k];
    e.samples = m;
    e.trace = estimate_of(total);
    e.top_trace = estimate_of(top);
    e.complement_trace = estimate_of(comp);
    e.ratio = ratio_of_means(top, total);
    e.complement = ratio_of_means(comp, total);
    if (options.full_matrix) {
      e.matrix = Eigen::MatrixXd::Zero(x.rows(), x.rows());
      for (int c = 0; c < chunks; ++c) e.matrix += partial[c][k];
      e.matrix /= static_cast<double>(m);
    }
  }
  return out;
}

struct OversmoothingRatio {
  double value = 0.0;
  bool clamped = false;  // raw value left [0, 1] by more than 1e-6
};

inline OversmoothingRatio oversmoothing_ratio(const Eigen::MatrixXd& k,
                                              const Eigen::MatrixXd& pi1) {
  if (k.rows() != k.cols() || pi1.rows() != k.rows() ||
      pi1.cols() != k.cols()) {
    throw ContractError("oversmoothing_ratio: shapes do not match");
  }
  const double tr = k.trace();
  if (!(tr > 0.0)) {
    throw DegenerateError("oversmoothing_ratio: tr K must be positive");
  }
  double r = (k * pi1).trace() / tr;
  OversmoothingRatio out;
  if (r < -1e-6 || r > 1.0 + 1e-6) {
    out.clamped = true;
    r = std::clamp(r, 0.0, 1.0);
  }
  out.value = r;
  return out;
}

inline double oversmoothing_rate(double r) {
  if (r >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::log1p(-r);
}

// (||z_v(L)||^2 / n_L) / (||x_v||^2 / n_0) at the last hidden layer.
inline double output_distortion(const ForwardTrace& trace, int v) {
  const int L = trace.depth();
  const Eigen::MatrixXd& x = trace.input;
  const Eigen::MatrixXd& z = trace.z[L];
  if (v < 0 || v >= x.rows()) {
    throw ParameterError("output_distortion: vertex out of range");
  }
  const double xin = x.row(v).squaredNorm() / static_cast<double>(x.cols());
  if (!(xin > 0.0)) {
    throw DegenerateError("output_distortion: input row " + std::to_string(v) +
                          " is zero");
  }
  return (z.row(v).squaredNorm() / static_cast<double>(z.cols())) / xin;
}

// Condition number of the k x n matrix of class-averaged rows of `features`,
// from the eigenvalues of its k x k Gram matrix. +inf when
// sigma_min <= 1e-12 sigma_max.
inline double class_condition_number(const Eigen::MatrixXd& features,
                                     const std::vector<int>& labels,
                                     int num_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw ContractError("class_condition_number: one label per row expected");
  }
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(num_classes, features.cols());
  std::vector<int> count(num_classes, 0);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    const int c = labels[v];
    if (c < 0 || c >= num_classes) {
      throw ParameterError("class_condition_number: label out of range");
    }
    avg.row(c) += features.row(static_cast<Eigen::Index>(v));
    ++count[c];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (count[c] == 0) {
      throw ParameterError("class_condition_number: class " +
                           std::to_string(c) + " is empty");
    }
    avg.row(c) /= count[c];
  }
  const Eigen::MatrixXd gram = avg * avg.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram,
                                                    Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  const double smax = std::sqrt(ev.maxCoeff());
  const double smin = std::sqrt(ev.minCoeff());
  if (!(smax > 0.0) || smin <= 1e-12 * smax) {
    return std::numeric_limits<double>::infinity();
  }
  return smax / smin;
}

inline double class_condition_number(const ForwardTrace& trace,
                                     const std::vector<int>& labels,
                                     int num_classes, int layer) {
  if (layer < 1 || layer >= static_cast<int>(trace.z.size())) {
    throw ParameterError("class_condition_number: layer out of range");
  }
  return class_condition_number(trace.z[layer], labels, num_classes);
}

struct GradientTraceEstimate {
  int layer = 0;
  int samples = 0;
  int coordinates = 0;  // input coordinates used per draw
  Estimate trace;       // tr G
  Estimate top_trace;   // tr (G Pi_1) on the vertex index
};

struct GradientTraceOptions {
  // Use every input coordinate when |V| n_0 is at most this; otherwise a
  // uniform sample of this many per draw, rescaled to the full count.
  int max_coordinates = 256;
  int workers = 1;
};

// tr G(l) = sum over input coordinates (v0, i0) of the per-neuron mean of
// ||dz_i(l) / dx_{v0, i0}||^2.
inline std::vector<GradientTraceEstimate> gradient_covariance_trace(
    const Architecture& arch, const InitScheme& scheme,
    const Eigen::MatrixXd& x, const std::vector<int>& layers, int m,
    std::uint64_t seed, const GradientTraceOptions& options = {}) {
  arch.validate();
  if (m < 1) throw ParameterError("gradient_covariance_trace: m must be >= 1");
  const int n = arch.num_vertices();
  const int n0 = arch.input_width();
  const long total_coords = static_cast<long>(n) * n0;
  const bool all = total_coords <= options.max_coordinates;
  const int used = all ? static_cast<int>(total_coords) : options.max_coordinates;
  const double scale = static_cast<double>(total_coords) / used;
  const Eigen::MatrixXd& u = arch.op(1).top_basis();
  const std::size_t nl = layers.size();
  std::vector<std::vector<double>> tot(nl, std::vector<double>(m));
  std::vector<std::vector<double>> top(nl, std::vector<double>(m));

  parallel_for(static_cast<std::size_t>(m), options.workers, [&](std::size_t d) {
    const std::uint64_t s = draw_seed(seed, d);
    const NetworkState state = init_weights(arch, scheme, s);
    const ForwardTrace trace = forward(state, arch, x);
    Philox4x32 rng = make_stream(s, StreamPurpose::kSampling, 0);
    std::vector<CompensatedSum> acc_tot(nl), acc_top(nl);
    for (int c = 0; c < used; ++c) {
      const long coord = all ? c : static_cast<long>(uniform_index(rng, total_coords));
      const int v0 = static_cast<int>(coord / n0);
      const int i0 = static_cast<int>(coord % n0);
      const auto dz = input_jacobian_rows(state, arch, trace, v0, i0);
      for (std::size_t k = 0; k < nl; ++k) {
        const detail::LayerSample ls = detail::layer_sample(dz[layers[k]], u);
        acc_tot[k].add(ls.total);
        acc_top[k].add(ls.top);
      }
    }
    for (std::size_t k = 0; k < nl; ++k) {
      tot[k][d] = scale * acc_tot[k].value();
      top[k][d] = scale * acc_top[k].value();
    }
  });

  std::vector<GradientTraceEstimate> out(nl);
  for (std::size_t k = 0; k < nl; ++k) {
    out[k].layer = layers[k];
    out[k].samples = m;
    out[k].coordinates = used;
    out[k].trace = estimate_of(tot[k]);
    out[k].top_trace = estimate_of(top[k]);
  }
  return out;
}

struct SummaryStats {
  double mean = 0.0;
  double se = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  int seed_count = 0;
};

// Statistics of values pooled over draws: the SE is taken over per-draw
// means, the quantiles over all pooled values.
inline SummaryStats summarize_pooled(const std::vector<std::vector<double>>& per_draw) {
  SummaryStats s;
  std::vector<double> means, pooled;
  for (const auto& v : per_draw) {
    means.push_back(mean_of(v));
    pooled.insert(pooled.end(), v.begin(), v.end());
  }
  s.seed_count = static_cast<int>(per_draw.size());
  s.mean = mean_of(pooled);
  s.se = means.size() >= 2 ? standard_error(means)
                           : std::numeric_limits<double>::infinity();
  s.q10 = quantile(pooled, 0.1);
  s.q90 = quantile(pooled, 0.9);
  return s;
}

struct DiagnosticsReport {
  int depth = 0;
  SummaryStats distortion;              // over vertices x draws
  std::vector<CovarianceEstimate> layers;  // l = 1..L+1
  SummaryStats condition;               // last hidden layer, over draws
  double input_condition = 0.0;         // class condition number of x
};

struct DiagnosticsOptions {
  bool condition_number = true;
  int workers = 1;
};

// One ensemble pass computing distortion, per-layer covariance traces and
// the class condition number of the last hidden layer.
inline DiagnosticsReport run_diagnostics(const Architecture& arch,
                                         const InitScheme& scheme,
                                         const Eigen::MatrixXd& x,
                                         const std::vector<int>& labels,
                                         int num_classes, int m,
                                         std::uint64_t seed,
                                         const DiagnosticsOptions& options = {}) {
  arch.validate();
  if (m < 1) throw ParameterError("run_diagnostics: m must be >= 1");
  const int L = arch.depth;
  const int n = arch.num_vertices();
  const Eigen::MatrixXd& u = arch.op(1).top_basis();
  std::vector<std::vector<double>> distortion(m, std::vector<double>(n));
  std::vector<std::vector<detail::LayerSample>> samples(
      m, std::vector<detail::LayerSample>(L + 1));
  std::vector<std::vector<double>> condition(m, std::vector<double>(1));

  parallel_for(static_cast<std::size_t>(m), options.workers, [&](std::size_t d) {
    const NetworkState state = init_weights(arch, scheme, draw_seed(seed, d));
    const ForwardTrace trace = forward(state, arch, x);
    for (int v = 0; v < n; ++v) distortion[d][v] = output_distortion(trace, v);
    for (int l = 1; l <= L + 1; ++l) {
      samples[d][l - 1] = detail::layer_sample(trace.z[l], u);
    }
    if (options.condition_number) {
      condition[d][0] = class_condition_number(trace, labels, num_classes, L);
    }
  });

  DiagnosticsReport report;
  report.depth = L;
  report.distortion = summarize_pooled(distortion);
  for (int l = 1; l <= L + 1; ++l) {
    std::vector<double> total(m), top(m), comp(m);
    for (int d = 0; d < m; ++d) {
      total[d] = samples[d][l - 1].total;
      top[d] = samples[d][l - 1].top;
      comp[d] = samples[d][l - 1].complement;
    }
    CovarianceEstimate e;
    e.layer = l;
    e.samples = m;
    e.trace = estimate_of(total);
    e.top_trace = estimate_of(top);
    e.complement_trace = estimate_of(comp);
    e.ratio = ratio_of_means(top, total);
    e.complement = ratio_of_means(comp, total);
    report.layers.push_back(std::move(e));
  }
  if (options.condition_number) {
    report.condition = summarize_pooled(condition);
    report.input_condition = class_condition_number(x, labels, num_classes);
  }
  return report;
}

}  // namespace gnnprop
