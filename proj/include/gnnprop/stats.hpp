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

// Summary statistics over per-draw samples. Inputs are always consumed in
// index order with compensated summation, so a reduction does not depend on
// which worker produced which sample.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gnnprop/errors.hpp"

namespace gnnprop {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

// Unbiased sample variance; NaN for fewer than two samples.
inline double variance_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(xs.size() - 1);
}

// Standard error of the mean.
inline double standard_error(const std::vector<double>& xs) {
  return std::sqrt(variance_of(xs) / static_cast<double>(xs.size()));
}

// Linear-interpolation quantile (type 7), q in [0, 1].
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double h = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

// Ratio of means mean(a) / mean(b) with its delta-method standard error.
struct RatioEstimate {
  double value = 0.0;
  double se = 0.0;
};

inline RatioEstimate ratio_of_means(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ContractError("ratio_of_means: sample lists differ in length");
  }
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  RatioEstimate r;
  r.value = ma / mb;
  if (a.size() < 2) {
    r.se = std::numeric_limits<double>::infinity();
    return r;
  }
  std::vector<double> resid(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) resid[i] = a[i] - r.value * b[i];
  r.se = std::sqrt(variance_of(resid) / static_cast<double>(a.size())) /
         std::abs(mb);
  return r;
}

// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x,
                        const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ContractError("fit_slope: need at least two matching points");
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  CompensatedSum sxy, sxx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy.add((x[i] - mx) * (y[i] - my));
    sxx.add((x[i] - mx) * (x[i] - mx));
  }
  return sxy.value() / sxx.value();
}

}  // namespace gnnprop
