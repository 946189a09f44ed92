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

#include "mimodet/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mimodet {

namespace {

constexpr double kProbFloor = 1e-300;

// log P(a < Z <= b) for standard normal Z, evaluated on the side of the
// distribution that avoids cancellation.
double log_normal_interval(double a, double b) {
  constexpr double r2 = 0.70710678118654752440;
  double p;
  if (a > 0.0) {
    p = 0.5 * (std::erfc(a * r2) - std::erfc(b * r2));
  } else if (b < 0.0) {
    p = 0.5 * (std::erfc(-b * r2) - std::erfc(-a * r2));
  } else {
    p = 1.0 - 0.5 * std::erfc(-a * r2) - 0.5 * std::erfc(b * r2);
  }
  return std::log(std::max(p, kProbFloor));
}

void check_dims(const Mat& h, const Vec& x, int dt) {
  if (h.rows() != x.size()) throw InvalidArgument("H rows must match length of x");
  if (h.cols() != 2 * dt) throw InvalidArgument("H columns must equal 2*d_t");
}

}  // namespace

void softmax_inplace(Vec& v) {
  const double m = v.maxCoeff();
  v = (v.array() - m).exp();
  v /= v.sum();
}

std::size_t PosteriorTable::argmax_index() const {
  if (probabilities.empty()) throw InvalidArgument("empty posterior table");
  std::size_t best = 0;
  for (std::size_t k = 1; k < probabilities.size(); ++k)
    if (probabilities[k] > probabilities[best]) best = k;
  return best + 1;
}

PosteriorEngine::PosteriorEngine(const RealConstellation& c, int dt) : c_(c), dt_(dt) {
  if (dt < 1) throw InvalidArgument("d_t must be positive");
  double n = 1.0;
  for (int i = 0; i < 2 * dt; ++i) n *= static_cast<double>(c.size());
  if (n > static_cast<double>(kEnumerationLimit))
    throw InvalidArgument("enumeration guard exceeded: |S|^(2 d_t) > 2^20");
  symbols_ = enumerate_symbols(c, dt);
}

void PosteriorEngine::log_scores(const Mat& h, const Vec& x, const NoiseSpec& noise,
                                 const ObservationModel& model, Vec& out) const {
  check_dims(h, x, dt_);
  const Mat mean = h * symbols_;
  const Index n = symbols_.cols();
  out.resize(n);
  if (!model.is_quantized()) {
    const double inv = 1.0 / (2.0 * noise.per_real_variance());
    out = -((mean.colwise() - x).colwise().squaredNorm().transpose()) * inv;
    return;
  }
  const QuantizerSpec& q = model.quantizer();
  const double sd = noise.per_real_stddev();
  std::vector<std::pair<double, double>> bins(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const std::size_t b = q.bin_of(x[i]);
    if (std::abs(q.level(b) - x[i]) > 1e-12)
      throw InvalidArgument("observation is not a valid quantizer output");
    bins[i] = q.bounds(b);
  }
  for (Index k = 0; k < n; ++k) {
    double acc = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      const double m = mean(i, k);
      acc += log_normal_interval((bins[i].first - m) / sd, (bins[i].second - m) / sd);
    }
    out[k] = acc;
  }
}

PosteriorTable PosteriorEngine::posterior(const Mat& h, const Vec& x, const NoiseSpec& noise,
                                          const ObservationModel& model) const {
  Vec s;
  log_scores(h, x, noise, model, s);
  softmax_inplace(s);
  return PosteriorTable{std::vector<double>(s.data(), s.data() + s.size())};
}

Index PosteriorEngine::map_offset(const Mat& h, const Vec& x, const NoiseSpec& noise,
                                  const ObservationModel& model) const {
  Vec s;
  log_scores(h, x, noise, model, s);
  Index best = 0;
  for (Index k = 1; k < s.size(); ++k)
    if (s[k] > s[best]) best = k;
  return best;
}

DetectionResult PosteriorEngine::map_detect(const Mat& h, const Vec& x, const NoiseSpec& noise,
                                            const ObservationModel& model,
                                            bool with_posterior) const {
  DetectionResult r;
  r.detector = "map";
  if (with_posterior) {
    PosteriorTable t = posterior(h, x, noise, model);
    r.hard_symbols = symbols_.col(static_cast<Index>(t.argmax_index() - 1));
    r.posterior = std::move(t.probabilities);
  } else {
    r.hard_symbols = symbols_.col(map_offset(h, x, noise, model));
  }
  return r;
}

PosteriorTable true_posterior(const Mat& h, const Vec& x, const NoiseSpec& noise,
                              const RealConstellation& c, const ObservationModel& model) {
  return PosteriorEngine(c, static_cast<int>(h.cols() / 2)).posterior(h, x, noise, model);
}

DetectionResult map_detect(const Mat& h, const Vec& x, const NoiseSpec& noise,
                           const RealConstellation& c, const ObservationModel& model) {
  return PosteriorEngine(c, static_cast<int>(h.cols() / 2)).map_detect(h, x, noise, model, true);
}

Vec zf_detect(const Mat& h, const Vec& x) {
  if (h.rows() != x.size()) throw InvalidArgument("H rows must match length of x");
  if (h.rows() < h.cols()) throw InvalidArgument("zero forcing needs d_r >= d_t");
  Eigen::JacobiSVD<Mat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  // cond(H^T H) = cond(H)^2
  if (!(smin > 0.0) || (sv[0] / smin) * (sv[0] / smin) > kZfConditionLimit)
    throw NumericalError("channel is singular or ill-conditioned for zero forcing");
  return svd.solve(x);
}

Vec hard_decide(const Vec& soft, const RealConstellation& c) {
  Vec out(soft.size());
  for (Index i = 0; i < soft.size(); ++i) out[i] = c.point(c.nearest_index(soft[i]));
  return out;
}

DetectionResult amp_detect(const Mat& h, const Vec& x, const NoiseSpec& noise,
                           const RealConstellation& c, int n_iters) {
  if (n_iters < 1) throw InvalidArgument("AMP needs at least one iteration");
  if (h.rows() != x.size()) throw InvalidArgument("H rows must match length of x");
  (void)noise;  // the effective variance is tracked from the residual
  const Index m = h.rows(), n = h.cols();
  const double scale = std::sqrt(h.squaredNorm() / static_cast<double>(n));
  if (!(scale > 0.0)) throw NumericalError("zero channel in AMP");
  const Mat a = h / scale;
  const Vec y = x / scale;
  const double ratio = static_cast<double>(n) / static_cast<double>(m);
  const std::size_t ns = c.size();

  Vec s_hat = Vec::Zero(n), z_prev = Vec::Zero(m), r(n), z(m);
  double eta_prime_avg = 0.0;
  Vec w(static_cast<Index>(ns));
  for (int t = 0; t < n_iters; ++t) {
    z = y - a * s_hat + ratio * eta_prime_avg * z_prev;
    r = s_hat + a.transpose() * z;
    const double tau2 = std::max(z.squaredNorm() / static_cast<double>(m), 1e-30);
    double dsum = 0.0;
    for (Index i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < ns; ++k) {
        const double d = r[i] - c.point(k);
        w[static_cast<Index>(k)] = -d * d / (2.0 * tau2);
      }
      softmax_inplace(w);
      double mean = 0.0, second = 0.0;
      for (std::size_t k = 0; k < ns; ++k) {
        mean += w[static_cast<Index>(k)] * c.point(k);
        second += w[static_cast<Index>(k)] * c.point(k) * c.point(k);
      }
      s_hat[i] = mean;
      dsum += (second - mean * mean) / tau2;
    }
    eta_prime_avg = dsum / static_cast<double>(n);
    z_prev = z;
    if (!s_hat.allFinite()) throw NumericalError("AMP diverged (non-finite estimate)");
  }
  DetectionResult res;
  res.detector = "amp";
  res.iterations = n_iters;
  res.hard_symbols = hard_decide(s_hat, c);
  return res;
}

void sic_antenna_probabilities(const Mat& h, const Vec& x, const Vec& prev_soft,
                               double sigma_n_sq, const Mat& antenna_alphabet,
                               std::vector<Vec>& probs) {
  const Index dt = h.cols() / 2;
  const Index k = antenna_alphabet.cols();
  const Vec resid = x - h * prev_soft;
  const double inv = 1.0 / sigma_n_sq;  // 2 * (sigma_n^2 / 2)
  probs.resize(static_cast<std::size_t>(dt));
  Mat hi(h.rows(), 2);
  for (Index i = 0; i < dt; ++i) {
    hi.col(0) = h.col(i);
    hi.col(1) = h.col(dt + i);
    const Vec yi = resid + hi.col(0) * prev_soft[i] + hi.col(1) * prev_soft[dt + i];
    Vec& p = probs[static_cast<std::size_t>(i)];
    p.resize(k);
    for (Index j = 0; j < k; ++j) p[j] = -(yi - hi * antenna_alphabet.col(j)).squaredNorm() * inv;
    softmax_inplace(p);
  }
}

Vec sic_expected_symbols(const std::vector<Vec>& probs, const Mat& antenna_alphabet) {
  const Index dt = static_cast<Index>(probs.size());
  Vec s(2 * dt);
  for (Index i = 0; i < dt; ++i) {
    const Vec m = antenna_alphabet * probs[static_cast<std::size_t>(i)];
    s[i] = m[0];
    s[dt + i] = m[1];
  }
  return s;
}

Vec sic_hard_decision(const std::vector<Vec>& probs, const Mat& antenna_alphabet) {
  const Index dt = static_cast<Index>(probs.size());
  Vec s(2 * dt);
  for (Index i = 0; i < dt; ++i) {
    const Vec& p = probs[static_cast<std::size_t>(i)];
    Index best = 0;
    for (Index j = 1; j < p.size(); ++j)
      if (p[j] > p[best]) best = j;
    s[i] = antenna_alphabet(0, best);
    s[dt + i] = antenna_alphabet(1, best);
  }
  return s;
}

SicTrace sic_trace(const Mat& h, const Vec& x, const NoiseSpec& noise, const RealConstellation& c,
                   int iterations) {
  if (iterations < 1) throw InvalidArgument("SIC needs at least one iteration");
  if (h.rows() != x.size() || h.cols() % 2 != 0) throw InvalidArgument("dimension mismatch in SIC");
  const Mat alphabet = enumerate_symbols(c, 1);
  SicTrace tr;
  tr.soft.push_back(Vec::Zero(h.cols()));
  for (int q = 0; q < iterations; ++q) {
    std::vector<Vec> p;
    sic_antenna_probabilities(h, x, tr.soft.back(), noise.sigma_n_sq(), alphabet, p);
    tr.soft.push_back(sic_expected_symbols(p, alphabet));
    tr.probs.push_back(std::move(p));
  }
  return tr;
}

DetectionResult sic_detect(const Mat& h, const Vec& x, const NoiseSpec& noise,
                           const RealConstellation& c, int iterations) {
  SicTrace tr = sic_trace(h, x, noise, c, iterations);
  DetectionResult r;
  r.detector = "sic";
  r.iterations = iterations;
  const Mat alphabet = enumerate_symbols(c, 1);
  r.hard_symbols = sic_hard_decision(tr.probs.back(), alphabet);
  r.antenna_probabilities = std::move(tr.probs.back());
  return r;
}

}  // namespace mimodet
