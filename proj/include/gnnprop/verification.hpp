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

// The verify-theory suite: Monte-Carlo checks of the trace and oversmoothing
// corridors and of the propagation lemmas on small random graphs.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gnnprop/diagnostics.hpp"
#include "gnnprop/errors.hpp"
#include "gnnprop/graph.hpp"
#include "gnnprop/network.hpp"
#include "gnnprop/rng.hpp"
#include "gnnprop/spectral.hpp"
#include "gnnprop/theory.hpp"

namespace gnnprop {

struct VerifyOptions {
  std::uint64_t seed = 1;
  int lemma_samples = 100000;
  int samples = 200;       // network draws for the corridor checks
  int covariances = 100;   // random 2x2 covariances for the sigma check
  int graphs = 20;         // random graphs for the Perron checks
  InjectedBug bug = InjectedBug::kNone;
  int workers = 1;
};

// Random connected graph on n vertices: a random spanning tree plus
// independent extra edges with probability p.
inline Graph random_connected_graph(int n, double p, std::uint64_t seed) {
  if (n < 1) throw ParameterError("random_connected_graph: n must be >= 1");
  Philox4x32 rng = make_stream(seed, StreamPurpose::kGraph, 0);
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v) {
    edges.emplace_back(static_cast<int>(uniform_index(rng, v)), v);
  }
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (uniform01(rng) < p) edges.emplace_back(u, v);
    }
  }
  return make_graph(n, edges);
}

// Gaussian rows scaled to unit norm.
inline Eigen::MatrixXd random_unit_rows(int n, int n0, std::uint64_t seed) {
  Philox4x32 rng = make_stream(seed, StreamPurpose::kFeatures, 0);
  Eigen::MatrixXd x(n, n0);
  for (int v = 0; v < n; ++v) {
    for (int j = 0; j < n0; ++j) x(v, j) = standard_normal(rng);
    x.row(v).normalize();
  }
  return x;
}

namespace detail {

inline CheckStatus mc_status(int m, bool ok) {
  if (m < kMinConclusiveSamples) return CheckStatus::kInconclusive;
  return ok ? CheckStatus::kPass : CheckStatus::kFail;
}

// Worst violation of [lower, upper] in units of SE across layers; <= 3 passes.
struct CorridorScan {
  double worst = -std::numeric_limits<double>::infinity();
  int layer = 0;

  void add(int l, double value, double se, double lower, double upper) {
    const double s = se > 0.0 ? se : std::numeric_limits<double>::min();
    const double z = std::max((lower - value) / s, (value - upper) / s);
    if (z > worst) {
      worst = z;
      layer = l;
    }
  }
};

inline CheckResult corridor_result(const std::string& name, int m,
                                   const CorridorScan& scan) {
  CheckResult r;
  r.name = name;
  r.value = scan.worst;
  r.expected = 3.0;
  r.status = mc_status(m, scan.worst <= 3.0);
  r.detail = "worst excursion " + std::to_string(scan.worst) +
             " SE at layer " + std::to_string(scan.layer);
  return r;
}

}  // namespace detail

inline std::vector<CheckResult> run_verification(const VerifyOptions& o) {
  std::vector<CheckResult> out;

  LemmaHalfOptions lo;
  lo.bug = o.bug;
  lo.workers = o.workers;
  for (auto& r : check_lemma_half(o.lemma_samples,
                                  derive_seed(o.seed, 0x68616c66, 0), lo)) {
    out.push_back(std::move(r));
  }

  {
    // Random covariances G G^T; the worst margin is reported.
    CheckResult agg;
    agg.name = "sigma_trick";
    agg.status = CheckStatus::kPass;
    agg.value = std::numeric_limits<double>::infinity();
    Philox4x32 rng = make_stream(derive_seed(o.seed, 0x7369676d, 0),
                                 StreamPurpose::kSampling, 0);
    const int m = std::max(1, o.lemma_samples / 10);
    for (int i = 0; i < o.covariances; ++i) {
      Eigen::Matrix2d g;
      for (int j = 0; j < 4; ++j) g.data()[j] = standard_normal(rng);
      const Eigen::Matrix2d k = g * g.transpose();
      const CheckResult r =
          check_sigma_trick(k, m, derive_seed(o.seed, 0x7369676d, i + 1));
      const double margin = (r.value - r.expected) / std::max(r.se, 1e-300);
      agg.value = std::min(agg.value, margin);
      if (r.status == CheckStatus::kFail) agg.status = CheckStatus::kFail;
      if (r.status == CheckStatus::kInconclusive &&
          agg.status == CheckStatus::kPass) {
        agg.status = CheckStatus::kInconclusive;
      }
    }
    agg.expected = -3.0;
    agg.detail = "least margin " + std::to_string(agg.value) + " SE over " +
                 std::to_string(o.covariances) + " covariances";
    out.push_back(agg);
  }

  {
    CheckResult r;
    r.name = "perron_interference";
    r.status = CheckStatus::kPass;
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < o.graphs; ++i) {
      const std::uint64_t s = derive_seed(o.seed, 0x70657272, i);
      Philox4x32 rng = make_stream(s, StreamPurpose::kSampling, 0);
      const int n = 5 + static_cast<int>(uniform_index(rng, 36));
      const Graph g = random_connected_graph(n, 0.15, s);
      try {
        const OperatorPtr p = normalized_adjacency(g, true);
        const Eigen::MatrixXd basis = perron_basis(*p);
        const InterferenceResult ir = interference_bound(*p);
        worst = std::max(worst, ir.max_off_diagonal + ir.delta);
        if (basis.cols() != 1 || basis.minCoeff() < -1e-10) {
          r.status = CheckStatus::kFail;
        }
      } catch (const NumericError& e) {
        r.status = CheckStatus::kFail;
        r.detail = e.what();
      }
    }
    r.value = worst;
    r.expected = 1e-10;
    if (worst > r.expected) r.status = CheckStatus::kFail;
    if (r.detail.empty()) {
      r.detail = "max of (interference + delta) " + std::to_string(worst);
    }
    out.push_back(r);
  }

  // Corridor checks on one small graph.
  const int n = 30;
  const int L = 4;
  const Graph g = random_connected_graph(n, 0.12, derive_seed(o.seed, 0x636f72, 0));
  const OperatorPtr p = normalized_adjacency(g, true);
  const Eigen::MatrixXd x = random_unit_rows(n, 4, derive_seed(o.seed, 0x636f72, 1));
  const Architecture arch =
      Architecture::vanilla(L, 4, 16, 16, repeat_operator(p, L));
  std::vector<int> layers;
  for (int l = 1; l <= L + 1; ++l) layers.push_back(l);

  for (const InitScheme& scheme :
       {InitScheme::he_gnn(), InitScheme::explicit_scale(1.0)}) {
    const std::string tag = scheme.kind == InitKind::kHeGnn ? "he_gnn" : "explicit_1";
    const auto var = weight_variances(arch, scheme);
    const Eigen::MatrixXd k1 = exact_first_layer_cov(arch, scheme, x);
    const TraceCorridor cor = trace_corridor(arch, var, k1, p->projector());
    CovarianceOptions co;
    co.workers = o.workers;
    const auto est = estimate_covariances(arch, scheme, x, layers, o.samples,
                                          derive_seed(o.seed, 0x6b, 0), co);
    detail::CorridorScan scan;
    for (const auto& e : est) {
      scan.add(e.layer, e.trace.mean, e.trace.se, cor.lower[e.layer],
               cor.upper[e.layer]);
    }
    out.push_back(detail::corridor_result("trace_corridor_K_" + tag, o.samples, scan));

    // The gradient trace obeys the corridor scaled by tr G(1) / tr K(1).
    GradientTraceOptions go;
    go.workers = o.workers;
    const auto ge = gradient_covariance_trace(arch, scheme, x, layers, o.samples,
                                              derive_seed(o.seed, 0x67, 0), go);
    const double g1 = var[1] * arch.input_width() * n;
    const double g1_top = var[1] * arch.input_width() * p->projector().trace();
    const TraceCorridor gcor = trace_corridor(arch, var, g1, g1_top);
    detail::CorridorScan gscan;
    for (const auto& e : ge) {
      gscan.add(e.layer, e.trace.mean, e.trace.se, gcor.lower[e.layer],
                gcor.upper[e.layer]);
    }
    out.push_back(detail::corridor_result("trace_corridor_G_" + tag, o.samples, gscan));
  }

  {
    const InitScheme scheme = InitScheme::he_gnn();
    const auto var = weight_variances(arch, scheme);
    DiagnosticsOptions dopt;
    dopt.condition_number = false;
    dopt.workers = o.workers;
    const DiagnosticsReport rep = run_diagnostics(
        arch, scheme, x, std::vector<int>(n, 0), 1, o.samples,
        derive_seed(o.seed, 0x6f73, 0), dopt);
    const double r1 = rep.layers[0].ratio.value;
    const auto os = os_ratio_corridor(spectra_of(arch), r1);
    detail::CorridorScan scan;
    for (int l = 2; l <= L + 1; ++l) {
      const auto& e = rep.layers[l - 1];
      scan.add(l, e.ratio.value, e.ratio.se, os[l - 1].lower, os[l - 1].upper);
    }
    out.push_back(detail::corridor_result("oversmoothing_corridor", o.samples, scan));

    // Per-layer trace ratios tr K(l+1) / tr K(l) from the same draws. The
    // ratio of means has a delta-method SE; recompute it from the traces.
    const auto est = estimate_covariances(arch, scheme, x, layers, o.samples,
                                          derive_seed(o.seed, 0x6f73, 0));
    detail::CorridorScan rscan;
    for (int l = 1; l <= L; ++l) {
      const double ratio = est[l].trace.mean / est[l - 1].trace.mean;
      const double rel = std::hypot(est[l].trace.se / est[l].trace.mean,
                                    est[l - 1].trace.se / est[l - 1].trace.mean);
      const TraceRatioBounds b = per_layer_trace_ratio_bounds(arch, var, l);
      rscan.add(l, ratio, ratio * rel, b.lower, b.upper);
    }
    out.push_back(detail::corridor_result("trace_ratio_bounds", o.samples, rscan));
  }

  {
    CheckResult r;
    r.name = "residual_spectral_mapping";
    double worst = 0.0;
    for (double t : {0.1, 0.4, 0.9}) {
      const OperatorPtr q = residual_operator(*p, t);
      const Eigen::MatrixXd direct =
          (1.0 - t) * Eigen::MatrixXd::Identity(n, n) + t * p->matrix();
      const SymmetricEigen e = eigendecompose(direct);
      for (int j = 0; j < n; ++j) {
        worst = std::max(worst, std::abs(e.values(j) - q->eigenvalues()(j)));
      }
    }
    r.value = worst;
    r.expected = 1e-9;
    r.status = worst <= 1e-9 ? CheckStatus::kPass : CheckStatus::kFail;
    out.push_back(r);
  }

  {
    CheckResult r;
    r.name = "he_identity";
    const auto a = trace_multipliers(arch, weight_variances(arch, InitScheme::he_gnn()));
    double worst = 0.0;
    for (int l = 1; l <= L; ++l) worst = std::max(worst, std::abs(a[l] - 1.0));
    r.value = worst;
    r.expected = 1e-15;
    r.status = worst <= 1e-15 ? CheckStatus::kPass : CheckStatus::kFail;
    out.push_back(r);
  }
  return out;
}

inline bool all_passed(const std::vector<CheckResult>& results) {
  return std::none_of(results.begin(), results.end(), [](const CheckResult& r) {
    return r.status == CheckStatus::kFail;
  });
}

}  // namespace gnnprop
