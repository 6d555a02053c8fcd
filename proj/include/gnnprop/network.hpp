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

// Finite-width ReLU graph networks.
//
// Vanilla mode, L hidden layers:
//
//   z(1)     = x W(1)
//   z(l+1)   = P(l) relu(z(l)) W(l+1),                l = 1..L
//
// Residual mode embeds the input first, e = x W(0), then
//
//   z(1)     = e + beta_1 P(1) e W(1)
//   z(l+1)   = z(l) + beta_l P(l) relu(z(l)) W(l+1),  l = 1..L-1
//   z(L+1)   = P(L) relu(z(L)) W(L+1)                 (readout)
//
// so all hidden weights are square. W(l) has shape n_{l-1} x n_l. Biases are
// zero. relu'(0) is taken as 0.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gnnprop/errors.hpp"
#include "gnnprop/rng.hpp"
#include "gnnprop/spectral.hpp"

namespace gnnprop {

enum class InitKind { kHeGnn, kExplicit, kUniformBaseline };

struct InitScheme {
  InitKind kind = InitKind::kHeGnn;
  double scale = 2.0;  // numerator c of c / (fan_in lambda_1^2)

  static InitScheme he_gnn() { return {InitKind::kHeGnn, 2.0}; }
  static InitScheme explicit_scale(double c) { return {InitKind::kExplicit, c}; }
  static InitScheme uniform_baseline() {
    return {InitKind::kUniformBaseline, 0.0};
  }

  std::string name() const {
    switch (kind) {
      case InitKind::kHeGnn:
        return "he_gnn";
      case InitKind::kExplicit:
        return "explicit(" + std::to_string(scale) + ")";
      case InitKind::kUniformBaseline:
        return "uniform_baseline";
    }
    return "?";
  }
};

struct Architecture {
  int depth = 1;                       // L
  std::vector<int> widths;             // n_0 .. n_{L+1}
  std::vector<OperatorPtr> operators;  // P(1) .. P(L)
  std::vector<double> beta;            // beta_1 .. beta_L; empty in vanilla

  bool residual() const { return !beta.empty(); }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  int num_vertices() const { return operators.front()->size(); }
  const AggregationOperator& op(int l) const { return *operators[l - 1]; }

  void validate() const {
    if (depth < 1) throw ParameterError("architecture: depth must be >= 1");
    if (static_cast<int>(widths.size()) != depth + 2) {
      throw ParameterError("architecture: expected depth + 2 widths");
    }
    for (int w : widths) {
      if (w < 1) throw ParameterError("architecture: widths must be >= 1");
    }
    if (static_cast<int>(operators.size()) != depth) {
      throw ParameterError("architecture: expected one operator per layer");
    }
    for (const auto& p : operators) {
      if (!p) throw ParameterError("architecture: null operator");
      if (p->size() != operators.front()->size()) {
        throw ParameterError("architecture: operators differ in size");
      }
    }
    if (residual()) {
      if (static_cast<int>(beta.size()) != depth) {
        throw ParameterError("architecture: expected one beta per layer");
      }
      for (double b : beta) {
        if (!(b >= 0.0)) throw ParameterError("architecture: beta must be >= 0");
      }
      for (int l = 2; l <= depth; ++l) {
        if (widths[l] != widths[1]) {
          throw ParameterError(
              "architecture: residual mode needs equal hidden widths");
        }
      }
    }
  }

  static Architecture vanilla(int depth, int n0, int hidden, int out,
                              std::vector<OperatorPtr> ops) {
    Architecture a;
    a.depth = depth;
    a.widths.assign(depth + 2, hidden);
    a.widths.front() = n0;
    a.widths.back() = out;
    a.operators = std::move(ops);
    a.validate();
    return a;
  }

  static Architecture residual_net(int depth, int n0, int hidden, int out,
                                   std::vector<OperatorPtr> ops,
                                   std::vector<double> beta) {
    Architecture a = vanilla(depth, n0, hidden, out, std::move(ops));
    a.beta = std::move(beta);
    a.validate();
    return a;
  }
};

inline std::vector<OperatorPtr> repeat_operator(const OperatorPtr& p,
                                                int depth) {
  return std::vector<OperatorPtr>(depth, p);
}

struct NetworkState {
  // weights[l] = W(l) for l = 0..L+1; weights[0] is empty in vanilla mode.
  std::vector<Eigen::MatrixXd> weights;
  std::vector<double> variances;
  std::uint64_t seed = 0;
};

namespace detail {

inline double he_value(double c, int fan_in, double lambda1) {
  if (!(lambda1 > 0.0)) {
    throw ParameterError("init: lambda_1 must be positive, got " +
                         std::to_string(lambda1));
  }
  return c / (fan_in * lambda1 * lambda1);
}

}  // namespace detail

// Shape of W(l). In residual mode W(0) embeds n_0 -> n_1 and W(1) is square.
inline std::pair<int, int> weight_shape(const Architecture& arch, int l) {
  if (l == 0) return {arch.widths[0], arch.widths[1]};
  if (l == 1 && arch.residual()) return {arch.widths[1], arch.widths[1]};
  return {arch.widths[l - 1], arch.widths[l]};
}

// Weight variance C_W(l) for each l = 0..L+1 under `scheme`. The embedding
// and the readout always use the generalized He value.
inline std::vector<double> weight_variances(const Architecture& arch,
                                            const InitScheme& scheme) {
  const int L = arch.depth;
  std::vector<double> c(L + 2, 0.0);
  const auto hidden = [&](int fan_in, double lambda1) {
    switch (scheme.kind) {
      case InitKind::kHeGnn:
        return detail::he_value(2.0, fan_in, lambda1);
      case InitKind::kExplicit:
        if (!(scheme.scale > 0.0)) {
          throw ParameterError("init: explicit scale must be positive");
        }
        return detail::he_value(scheme.scale, fan_in, lambda1);
      case InitKind::kUniformBaseline:
        return 1.0 / (3.0 * fan_in);
    }
    return 0.0;
  };
  if (arch.residual()) {
    c[0] = detail::he_value(2.0, arch.widths[0], 1.0);
    c[1] = hidden(arch.widths[1], arch.op(1).lambda1());
  } else {
    c[1] = hidden(arch.widths[0], 1.0);
  }
  for (int l = 2; l <= L; ++l) {
    c[l] = hidden(arch.widths[l - 1], arch.op(l - 1).lambda1());
  }
  c[L + 1] = detail::he_value(2.0, arch.widths[L], arch.op(L).lambda1());
  return c;
}

inline NetworkState init_weights(const Architecture& arch,
                                 const InitScheme& scheme,
                                 std::uint64_t seed) {
  arch.validate();
  NetworkState state;
  state.seed = seed;
  state.variances = weight_variances(arch, scheme);
  const int L = arch.depth;
  state.weights.resize(L + 2);
  for (int l = 0; l <= L + 1; ++l) {
    if (l == 0 && !arch.residual()) continue;
    const auto [rows, cols] = weight_shape(arch, l);
    Eigen::MatrixXd w(rows, cols);
    Philox4x32 rng = make_stream(seed, StreamPurpose::kWeights, l);
    const bool uniform = scheme.kind == InitKind::kUniformBaseline &&
                         l >= 1 && l <= L;
    if (uniform) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
      for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
          w(i, j) = bound * (2.0 * uniform01(rng) - 1.0);
        }
      }
    } else {
      const double sd = std::sqrt(state.variances[l]);
      for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = sd * standard_normal(rng);
      }
    }
    state.weights[l] = std::move(w);
  }
  return state;
}

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

inline Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

struct ForwardTrace {
  Eigen::MatrixXd input;
  Eigen::MatrixXd embedded;        // residual mode only
  std::vector<Eigen::MatrixXd> z;  // z[l] for l = 1..L+1; z[0] unused

  const Eigen::MatrixXd& output() const { return z.back(); }
  int depth() const { return static_cast<int>(z.size()) - 2; }
};

namespace detail {

inline void check_state(const NetworkState& state, const Architecture& arch) {
  const int L = arch.depth;
  if (static_cast<int>(state.weights.size()) != L + 2) {
    throw ContractError("network state does not match architecture depth");
  }
  for (int l = 0; l <= L + 1; ++l) {
    if (l == 0 && !arch.residual()) continue;
    const auto [rows, cols] = weight_shape(arch, l);
    if (state.weights[l].rows() != rows || state.weights[l].cols() != cols) {
      throw ContractError("weight W(" + std::to_string(l) +
                          ") has the wrong shape");
    }
  }
}

}  // namespace detail

inline ForwardTrace forward(const NetworkState& state, const Architecture& arch,
                            const Eigen::MatrixXd& x) {
  detail::check_state(state, arch);
  if (x.rows() != arch.num_vertices() || x.cols() != arch.input_width()) {
    throw ContractError("forward: input has shape " + std::to_string(x.rows()) +
                        "x" + std::to_string(x.cols()) + ", expected " +
                        std::to_string(arch.num_vertices()) + "x" +
                        std::to_string(arch.input_width()));
  }
  const int L = arch.depth;
  const auto& w = state.weights;
  ForwardTrace t;
  t.input = x;
  t.z.resize(L + 2);
  if (!arch.residual()) {
    t.z[1] = x * w[1];
    for (int l = 1; l <= L; ++l) {
      t.z[l + 1] = arch.op(l).apply(relu(t.z[l]) * w[l + 1]);
    }
    return t;
  }
  t.embedded = x * w[0];
  t.z[1] = t.embedded +
           arch.beta[0] * arch.op(1).apply(t.embedded * w[1]);
  for (int l = 1; l < L; ++l) {
    t.z[l + 1] = t.z[l] + arch.beta[l - 1] *
                              arch.op(l).apply(relu(t.z[l]) * w[l + 1]);
  }
  t.z[L + 1] = arch.op(L).apply(relu(t.z[L]) * w[L + 1]);
  return t;
}

using Gradients = std::vector<Eigen::MatrixXd>;  // indexed like weights

// Gradients of a scalar loss with dLoss/dz(L+1) = `upstream`.
inline Gradients backward(const NetworkState& state, const Architecture& arch,
                          const ForwardTrace& trace,
                          const Eigen::MatrixXd& upstream) {
  detail::check_state(state, arch);
  const int L = arch.depth;
  if (trace.depth() != L || trace.output().rows() != upstream.rows() ||
      trace.output().cols() != upstream.cols()) {
    throw ContractError("backward: trace or upstream gradient does not match");
  }
  const auto& w = state.weights;
  Gradients grad(L + 2);
  // Readout: z(L+1) = P(L) relu(z(L)) W(L+1), identical in both modes.
  Eigen::MatrixXd h = arch.op(L).apply(upstream);
  grad[L + 1] = relu(trace.z[L]).transpose() * h;
  Eigen::MatrixXd g = (h * w[L + 1].transpose()).cwiseProduct(relu_mask(trace.z[L]));
  if (!arch.residual()) {
    for (int l = L - 1; l >= 1; --l) {
      h = arch.op(l).apply(g);
      grad[l + 1] = relu(trace.z[l]).transpose() * h;
      g = (h * w[l + 1].transpose()).cwiseProduct(relu_mask(trace.z[l]));
    }
    grad[1] = trace.input.transpose() * g;
    return grad;
  }
  for (int l = L - 1; l >= 1; --l) {
    const double b = arch.beta[l - 1];
    h = arch.op(l).apply(g);
    grad[l + 1] = b * (relu(trace.z[l]).transpose() * h);
    g += b * (h * w[l + 1].transpose()).cwiseProduct(relu_mask(trace.z[l]));
  }
  const double b1 = arch.beta[0];
  h = arch.op(1).apply(g);
  grad[1] = b1 * (trace.embedded.transpose() * h);
  const Eigen::MatrixXd ge = g + b1 * (h * w[1].transpose());
  grad[0] = trace.input.transpose() * ge;
  return grad;
}

// Derivatives dz(l)/dx_{v0, i0} for l = 1..L+1 (index 0 unused), by one
// forward-mode sweep along the activation pattern of `trace`.
inline std::vector<Eigen::MatrixXd> input_jacobian_rows(
    const NetworkState& state, const Architecture& arch,
    const ForwardTrace& trace, int v0, int i0) {
  detail::check_state(state, arch);
  const int L = arch.depth;
  const int n = arch.num_vertices();
  if (v0 < 0 || v0 >= n || i0 < 0 || i0 >= arch.input_width()) {
    throw ContractError("input_jacobian_rows: coordinate out of range");
  }
  if (trace.depth() != L) {
    throw ContractError("input_jacobian_rows: trace does not match");
  }
  const auto& w = state.weights;
  std::vector<Eigen::MatrixXd> dz(L + 2);
  if (!arch.residual()) {
    dz[1] = Eigen::MatrixXd::Zero(n, arch.widths[1]);
    dz[1].row(v0) = w[1].row(i0);
    for (int l = 1; l <= L; ++l) {
      dz[l + 1] = arch.op(l).apply(
          dz[l].cwiseProduct(relu_mask(trace.z[l])) * w[l + 1]);
    }
    return dz;
  }
  Eigen::MatrixXd de = Eigen::MatrixXd::Zero(n, arch.widths[1]);
  de.row(v0) = w[0].row(i0);
  dz[1] = de + arch.beta[0] * arch.op(1).apply(de * w[1]);
  for (int l = 1; l < L; ++l) {
    dz[l + 1] = dz[l] + arch.beta[l - 1] *
                            arch.op(l).apply(dz[l].cwiseProduct(
                                                 relu_mask(trace.z[l])) *
                                             w[l + 1]);
  }
  dz[L + 1] = arch.op(L).apply(
      dz[L].cwiseProduct(relu_mask(trace.z[L])) * w[L + 1]);
  return dz;
}

inline std::vector<Eigen::MatrixXd> input_jacobian_rows(
    const NetworkState& state, const Architecture& arch,
    const Eigen::MatrixXd& x, int v0, int i0) {
  return input_jacobian_rows(state, arch, forward(state, arch, x), v0, i0);
}

inline void gd_step(NetworkState& state, const Gradients& grad, double lr) {
  if (grad.size() != state.weights.size()) {
    throw ContractError("gd_step: gradient list does not match state");
  }
  for (std::size_t l = 0; l < grad.size(); ++l) {
    if (grad[l].size() == 0 && state.weights[l].size() == 0) continue;
    if (grad[l].rows() != state.weights[l].rows() ||
        grad[l].cols() != state.weights[l].cols()) {
      throw ContractError("gd_step: gradient " + std::to_string(l) +
                          " has the wrong shape");
    }
    state.weights[l] -= lr * grad[l];
  }
}

// Checkpoint layout, little-endian:
//   "GNNPCKPT" | u32 version | u64 seed | u32 count
//   count x ( u32 layer | u64 rows | u64 cols | f64 variance |
//             rows*cols f64 row-major )
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_state(const NetworkState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const auto put = [&](const auto& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  out.write("GNNPCKPT", 8);
  put(kCheckpointVersion);
  put(state.seed);
  put(static_cast<std::uint32_t>(state.weights.size()));
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    const auto& w = state.weights[l];
    put(static_cast<std::uint32_t>(l));
    put(static_cast<std::uint64_t>(w.rows()));
    put(static_cast<std::uint64_t>(w.cols()));
    put(l < state.variances.size() ? state.variances[l] : 0.0);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) put(w(i, j));
    }
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline NetworkState load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
  const auto get = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw LoadError("checkpoint '" + path + "' is truncated");
  };
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "GNNPCKPT", 8) != 0) {
    throw LoadError("checkpoint '" + path + "': bad magic");
  }
  std::uint32_t version = 0;
  get(version);
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint '" + path + "': unsupported version " +
                    std::to_string(version));
  }
  NetworkState state;
  get(state.seed);
  std::uint32_t count = 0;
  get(count);
  if (count > 100000) throw LoadError("checkpoint: implausible layer count");
  state.weights.resize(count);
  state.variances.resize(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint32_t layer = 0;
    std::uint64_t rows = 0, cols = 0;
    get(layer);
    get(rows);
    get(cols);
    if (layer != k) throw LoadError("checkpoint: layers out of order");
    if (rows * cols > (1ULL << 32)) {
      throw LoadError("checkpoint: implausible matrix size");
    }
    get(state.variances[k]);
    Eigen::MatrixXd w(rows, cols);
    for (std::uint64_t i = 0; i < rows; ++i) {
      for (std::uint64_t j = 0; j < cols; ++j) get(w(i, j));
    }
    state.weights[k] = std::move(w);
  }
  return state;
}

}  // namespace gnnprop
