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

// Independent reference implementations used as test oracles. They are
// written with plain loops and std:: containers and share no code with the
// library beyond the Eigen types used to pass data in.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline const double kA = 1.0 / std::sqrt(2.0);

/// 1-based index by the documented formula with explicit powers.
inline std::size_t one_hot_index(const std::vector<int>& j, int alphabet, int dt) {
  std::size_t idx = 0;
  for (int i = 0; i < dt; ++i) {
    std::size_t p = 1;
    for (int k = 0; k < 2 * i; ++k) p *= static_cast<std::size_t>(alphabet);
    idx += static_cast<std::size_t>(j[dt + i] * alphabet + j[i]) * p;
  }
  return idx + 1;
}

/// All digit vectors of length n over {0, .., alphabet-1}, odometer order.
inline std::vector<std::vector<int>> all_digits(int n, int alphabet) {
  std::vector<std::vector<int>> out;
  std::vector<int> d(n, 0);
  while (true) {
    out.push_back(d);
    int k = 0;
    while (k < n && ++d[k] == alphabet) d[k++] = 0;
    if (k == n) break;
  }
  return out;
}

inline Mat real_channel(const Eigen::MatrixXcd& hc) {
  const long r = hc.rows(), c = hc.cols();
  Mat h(2 * r, 2 * c);
  for (long i = 0; i < r; ++i)
    for (long k = 0; k < c; ++k) {
      h(i, k) = hc(i, k).real();
      h(i, c + k) = -hc(i, k).imag();
      h(r + i, k) = hc(i, k).imag();
      h(r + i, c + k) = hc(i, k).real();
    }
  return h;
}

inline Vec matvec(const Mat& h, const Vec& s) {
  Vec out(h.rows());
  for (long i = 0; i < h.rows(); ++i) {
    double acc = 0;
    for (long k = 0; k < h.cols(); ++k) acc += h(i, k) * s[k];
    out[i] = acc;
  }
  return out;
}

/// QPSK symbol vector for a digit vector.
inline Vec qpsk_symbols(const std::vector<int>& j) {
  Vec s(static_cast<long>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) s[static_cast<long>(k)] = j[k] ? kA : -kA;
  return s;
}

/// Linear-model posterior over all QPSK vectors, indexed by one-hot index - 1.
inline std::vector<double> linear_posterior(const Mat& h, const Vec& x, double sigma_n_sq) {
  const int dt = static_cast<int>(h.cols() / 2);
  const auto digits = all_digits(2 * dt, 2);
  std::vector<double> logp(digits.size());
  std::vector<double> out(digits.size());
  double mx = -1e300;
  for (const auto& d : digits) {
    const Vec r = x - matvec(h, qpsk_symbols(d));
    double e = 0;
    for (long i = 0; i < r.size(); ++i) e += r[i] * r[i];
    const std::size_t idx = one_hot_index(d, 2, dt) - 1;
    logp[idx] = -e / sigma_n_sq;
    mx = std::max(mx, logp[idx]);
  }
  double z = 0;
  for (double v : logp) z += std::exp(v - mx);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::exp(logp[k] - mx) / z;
  return out;
}

inline double phi(double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); }

/// Quantized-model posterior with explicit bin edges per coordinate.
inline std::vector<double> quantized_posterior(const Mat& h, const std::vector<double>& lower,
                                               const std::vector<double>& upper, double sigma_n_sq) {
  const int dt = static_cast<int>(h.cols() / 2);
  const double sd = std::sqrt(sigma_n_sq / 2);
  const auto digits = all_digits(2 * dt, 2);
  std::vector<double> p(digits.size());
  double z = 0;
  for (const auto& d : digits) {
    const Vec m = matvec(h, qpsk_symbols(d));
    double v = 1;
    for (long i = 0; i < m.size(); ++i) {
      const double hi = std::isinf(upper[i]) ? 1.0 : phi((upper[i] - m[i]) / sd);
      const double lo = std::isinf(lower[i]) ? 0.0 : phi((lower[i] - m[i]) / sd);
      v *= hi - lo;
    }
    p[one_hot_index(d, 2, dt) - 1] = v;
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

/// ReLU network logits with explicit loops; W[i] is d_{i+1} x d_i.
inline Vec mlp_logits(const std::vector<Mat>& w, const std::vector<Vec>& b, const Vec& x) {
  Vec a = x;
  for (std::size_t l = 0; l < w.size(); ++l) {
    Vec z(w[l].rows());
    for (long i = 0; i < w[l].rows(); ++i) {
      double acc = b[l][i];
      for (long k = 0; k < w[l].cols(); ++k) acc += w[l](i, k) * a[k];
      z[i] = acc;
    }
    if (l + 1 < w.size())
      for (long i = 0; i < z.size(); ++i) z[i] = z[i] > 0 ? z[i] : 0.0;
    a = z;
  }
  return a;
}

inline Vec softmax(const Vec& z) {
  double mx = z[0];
  for (long i = 1; i < z.size(); ++i) mx = std::max(mx, z[i]);
  Vec p(z.size());
  double s = 0;
  for (long i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
  for (long i = 0; i < z.size(); ++i) p[i] /= s;
  return p;
}

}  // namespace oracle
