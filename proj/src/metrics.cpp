// Copyright 2026 The mimodet Authors
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

#include "mimodet/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace mimodet {

std::size_t bit_errors(const Vec& decided, const Vec& truth, const RealConstellation& c) {
  if (decided.size() != truth.size()) throw InvalidArgument("decision and truth lengths differ");
  std::size_t e = 0;
  for (Index i = 0; i < truth.size(); ++i) {
    const auto a = c.nearest_index(decided[i]);
    const auto b = c.nearest_index(truth[i]);
    e += static_cast<std::size_t>(std::popcount(a ^ b));
  }
  return e;
}

double ber(std::span<const Vec> decisions, std::span<const Vec> truth, const RealConstellation& c) {
  if (decisions.size() != truth.size()) throw InvalidArgument("decision and truth lengths differ");
  std::size_t bits = 0, errs = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    errs += bit_errors(decisions[k], truth[k], c);
    bits += static_cast<std::size_t>(truth[k].size()) * c.bits_per_symbol();
  }
  if (bits == 0) throw InvalidArgument("no bits to compare");
  return static_cast<double>(errs) / static_cast<double>(bits);
}

double ci_halfwidth(double p, std::size_t bits) {
  if (bits == 0) return 0.0;
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(bits));
}

namespace {

// Running mean together with its standard error.
struct Moments {
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double std_error() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

void check_distribution(const Vec& p) {
  if (p.size() == 0 || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9)
    throw InvalidArgument("input is not a normalized probability vector");
}

}  // namespace

Estimate empirical_loglik(const PosteriorModel& model, std::span<const std::size_t> labels) {
  if (labels.empty()) throw InvalidArgument("empty test set");
  Moments m;
  Estimate e;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const Vec p = model(k);
    const double v = p[static_cast<Index>(labels[k] - 1)];
    if (v < kProbabilityFloor) {
      e.underflow = true;
      continue;
    }
    m.add(std::log(v));
  }
  if (e.underflow) {
    e.value = -std::numeric_limits<double>::infinity();
    return e;
  }
  e.value = m.mean();
  e.std_error = m.std_error();
  return e;
}

Estimate empirical_kl(const PosteriorModel& oracle, const PosteriorModel& model, std::size_t n) {
  if (n == 0) throw InvalidArgument("empty test set");
  Moments m;
  Estimate e;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec po = oracle(k);
    const Vec pm = model(k);
    if (po.size() != pm.size()) throw InvalidArgument("posterior sizes differ");
    double acc = 0.0;
    for (Index u = 0; u < po.size(); ++u) {
      if (po[u] <= 0.0) continue;
      if (pm[u] < kProbabilityFloor) {
        e.underflow = true;
        break;
      }
      acc += po[u] * (std::log(po[u]) - std::log(pm[u]));
    }
    m.add(acc);
  }
  if (e.underflow) {
    e.value = std::numeric_limits<double>::infinity();
    return e;
  }
  e.value = std::max(0.0, m.mean());
  e.std_error = m.std_error();
  return e;
}

double kl_divergence(const Vec& p, const Vec& q) {
  check_distribution(p);
  check_distribution(q);
  if (p.size() != q.size()) throw InvalidArgument("distribution sizes differ");
  double acc = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, acc);
}

double hellinger(const Vec& p, const Vec& q) {
  check_distribution(p);
  check_distribution(q);
  if (p.size() != q.size()) throw InvalidArgument("distribution sizes differ");
  return std::sqrt(0.5 * (p.cwiseSqrt() - q.cwiseSqrt()).squaredNorm());
}

double check_hellinger_bound(const Vec& p, const Vec& q) {
  const double g = hellinger(p, q);
  return 0.5 * kl_divergence(p, q) - g * g;
}

ErrorDecomposition error_decomposition(const PosteriorModel& oracle, const PosteriorModel& reference,
                                       const PosteriorModel& trained,
                                       std::span<const std::size_t> labels) {
  if (labels.empty()) throw InvalidArgument("empty test set");
  Moments approx, gen, kl;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const Vec po = oracle(k), pr = reference(k), pz = trained(k);
    const Index u = static_cast<Index>(labels[k] - 1);
    if (po[u] < kProbabilityFloor || pr[u] < kProbabilityFloor || pz[u] < kProbabilityFloor)
      throw NumericalError("probability underflow in error decomposition");
    approx.add(std::log(po[u]) - std::log(pr[u]));
    gen.add(std::log(pr[u]) - std::log(pz[u]));
    double acc = 0.0;
    for (Index j = 0; j < po.size(); ++j) {
      if (po[j] <= 0.0) continue;
      acc += po[j] * (std::log(po[j]) - std::log(std::max(pz[j], kProbabilityFloor)));
    }
    kl.add(acc);
  }
  ErrorDecomposition d;
  d.approximation = approx.mean();
  d.generalization = gen.mean();
  d.approximation_se = approx.std_error();
  d.generalization_se = gen.std_error();
  d.kl = std::max(0.0, kl.mean());
  d.kl_se = kl.std_error();
  return d;
}

TheoryBoundInputs TheoryBoundInputs::from_shape(const NetworkShape& shape, double R) {
  TheoryBoundInputs in;
  in.R = R;
  in.max_width = shape.max_width();
  in.depth = shape.depth();
  in.output_dim = shape.output_dim();
  in.parameter_count = static_cast<double>(shape.parameter_count());
  return in;
}

double TheoryBoundInputs::delta1() const noexcept {
  const double a = alpha(), b = beta();
  const double t = (std::log(output_dim) + 1.0) * (std::pow(a, depth + 1) * delta + b) - b;
  return t * t;
}

double TheoryBoundInputs::delta2() const noexcept {
  return std::pow(3.0, depth + 1) * 64.0 * std::pow(alpha(), depth) * (delta + beta());
}

void TheoryBoundInputs::validate() const {
  if (!(R >= 1.0)) throw InvalidArgument("R must be >= 1");
  if (!(alpha() > 1.0)) throw InvalidArgument("alpha = R ||d||_inf must exceed 1");
  if (depth < 1 || !(output_dim >= 1.0) || !(parameter_count >= 1.0))
    throw InvalidArgument("invalid network dimensions in bound inputs");
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
}

double covering_bound(const TheoryBoundInputs& in, double eps) {
  in.validate();
  if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
  const double inner = std::pow(3.0, in.depth + 1) * 4.0 * in.max_width *
                       std::pow(in.alpha(), in.depth) * (in.delta + in.beta()) / eps;
  return in.parameter_count * std::log(inner);
}

TailBound generalization_tail_bound(const TheoryBoundInputs& in, double n, double eps) {
  in.validate();
  if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(in.delta * in.delta > in.mu)) throw InvalidArgument("delta^2 must exceed mu");
  if (!(n > 0.0)) throw InvalidArgument("sample size must be positive");
  const double d1 = in.delta1();
  const double gap = in.delta * in.delta - in.mu;
  TailBound t;
  t.raw = 8.0 * std::exp(-n * eps * eps / (1024.0 * d1)) + 4.0 * in.sigma_sq / (n * gap * gap);
  t.clipped = std::clamp(t.raw, 0.0, 1.0);
  t.min_samples_nu = 16.0 * in.nu / (eps * eps);
  t.min_samples_cover = 1024.0 * d1 * in.parameter_count * std::log(in.delta2() / eps) / (eps * eps);
  t.preconditions_met = n >= t.min_samples_nu && n >= t.min_samples_cover;
  return t;
}

double modeldriven_tail_bound(double ln_cu, double n, double eps, double delta_u, double p_omega) {
  if (!(eps > 0.0) || !(delta_u > 0.0)) throw InvalidArgument("epsilon and delta_u must be positive");
  if (!(p_omega >= 0.0 && p_omega <= 1.0)) throw InvalidArgument("P_Omega must lie in [0, 1]");
  if (!(n > 0.0)) throw InvalidArgument("sample size must be positive");
  return 8.0 * std::exp(ln_cu - n * eps * eps / (512.0 * delta_u)) + p_omega;
}

void estimate_input_moments(TheoryBoundInputs& in, std::span<const double> input_norms) {
  if (input_norms.size() < 2) throw InvalidArgument("need at least two samples for moments");
  const double a = in.alpha(), b = in.beta();
  const double lead = std::log(in.output_dim) + 1.0;
  const double scale = std::pow(a, in.depth + 1);
  Moments sq, nu;
  double sum_sq2 = 0.0;
  for (double r : input_norms) {
    const double e = r * r;
    sq.add(e);
    sum_sq2 += e * e;
    const double t = lead * (scale * (r + b) - b);
    nu.add(t * t);
  }
  const double n = static_cast<double>(input_norms.size());
  in.mu = sq.mean();
  in.sigma_sq = std::max(0.0, (sum_sq2 - n * in.mu * in.mu) / (n - 1.0));
  in.nu = nu.mean();
}

}  // namespace mimodet
