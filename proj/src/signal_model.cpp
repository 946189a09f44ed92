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

#include "mimodet/signal_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace mimodet {

Modulation parse_modulation(const std::string& name) {
  if (name == "qpsk" || name == "QPSK") return Modulation::Qpsk;
  if (name == "bpsk" || name == "BPSK") return Modulation::Bpsk;
  throw InvalidArgument("unsupported modulation '" + name + "'");
}

RealConstellation::RealConstellation(std::vector<double> points, std::string label)
    : points_(std::move(points)), label_(std::move(label)) {
  if (points_.empty()) throw InvalidArgument("constellation must have at least one point");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i] > points_[i - 1]))
      throw InvalidArgument("constellation points must be strictly increasing");
  }
  double e = 0.0;
  for (double p : points_) e += p * p;
  energy_ = e / static_cast<double>(points_.size());
}

std::size_t RealConstellation::nearest_index(double v) const noexcept {
  std::size_t best = 0;
  double best_d = std::abs(v - points_[0]);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double d = std::abs(v - points_[i]);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

std::size_t RealConstellation::index_of(double v) const {
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (points_[i] == v) return i;
  throw InvalidArgument("value is not a constellation point");
}

std::size_t RealConstellation::bits_per_symbol() const noexcept {
  return static_cast<std::size_t>(std::bit_width(points_.size()) - 1);
}

RealConstellation make_constellation(Modulation kind) {
  switch (kind) {
    case Modulation::Qpsk: {
      const double a = 1.0 / std::sqrt(2.0);
      return RealConstellation({-a, a}, "qpsk");
    }
    case Modulation::Bpsk:
      return RealConstellation({-1.0, 1.0}, "bpsk");
  }
  throw InvalidArgument("unsupported modulation");
}

Vec complex_to_real_vector(const CVec& v) {
  Vec out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

Mat complex_to_real_channel(const CMat& hc) {
  const Index r = hc.rows(), c = hc.cols();
  Mat h(2 * r, 2 * c);
  h.topLeftCorner(r, c) = hc.real();
  h.topRightCorner(r, c) = -hc.imag();
  h.bottomLeftCorner(r, c) = hc.imag();
  h.bottomRightCorner(r, c) = hc.real();
  return h;
}

std::size_t one_hot_length(int alphabet_size, int dt) {
  if (alphabet_size < 1 || dt < 1) throw InvalidArgument("invalid one-hot dimensions");
  std::size_t n = 1;
  for (int i = 0; i < 2 * dt; ++i) n *= static_cast<std::size_t>(alphabet_size);
  return n;
}

std::size_t one_hot_index(std::span<const int> j, int alphabet_size, int dt) {
  if (static_cast<int>(j.size()) != 2 * dt)
    throw InvalidArgument("digit vector length must equal 2*d_t");
  for (int v : j)
    if (v < 0 || v >= alphabet_size) throw InvalidArgument("one-hot digit out of range");
  const std::size_t base = static_cast<std::size_t>(alphabet_size);
  std::size_t idx = 0, scale = 1;
  for (int i = 0; i < dt; ++i) {
    idx += (static_cast<std::size_t>(j[dt + i]) * base + static_cast<std::size_t>(j[i])) * scale;
    scale *= base * base;
  }
  return idx + 1;
}

std::vector<int> one_hot_digits(std::size_t index, int alphabet_size, int dt) {
  const std::size_t n = one_hot_length(alphabet_size, dt);
  if (index < 1 || index > n) throw InvalidArgument("one-hot index out of range");
  const std::size_t base = static_cast<std::size_t>(alphabet_size);
  std::vector<int> j(2 * dt);
  std::size_t rem = index - 1;
  for (int i = 0; i < dt; ++i) {
    j[i] = static_cast<int>(rem % base);
    rem /= base;
    j[dt + i] = static_cast<int>(rem % base);
    rem /= base;
  }
  return j;
}

OneHotTarget one_hot_encode(const Vec& s, const RealConstellation& c) {
  if (s.size() % 2 != 0) throw InvalidArgument("symbol vector length must be even");
  const int dt = static_cast<int>(s.size() / 2);
  std::vector<int> j(s.size());
  for (Index k = 0; k < s.size(); ++k) j[k] = static_cast<int>(c.index_of(s[k]));
  const int m = static_cast<int>(c.size());
  return {one_hot_index(j, m, dt), one_hot_length(m, dt)};
}

Vec one_hot_decode(const OneHotTarget& t, const RealConstellation& c, int dt) {
  const int m = static_cast<int>(c.size());
  if (t.length != one_hot_length(m, dt)) throw InvalidArgument("one-hot length mismatch");
  const auto j = one_hot_digits(t.index, m, dt);
  Vec s(2 * dt);
  for (int k = 0; k < 2 * dt; ++k) s[k] = c.point(j[k]);
  return s;
}

Mat enumerate_symbols(const RealConstellation& c, int dt) {
  const int m = static_cast<int>(c.size());
  const std::size_t n = one_hot_length(m, dt);
  Mat out(2 * dt, static_cast<Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto j = one_hot_digits(k + 1, m, dt);
    for (int i = 0; i < 2 * dt; ++i) out(i, static_cast<Index>(k)) = c.point(j[i]);
  }
  return out;
}

NoiseSpec::NoiseSpec(double sigma_n_sq) : sigma_n_sq_(sigma_n_sq) {
  if (!(sigma_n_sq > 0.0) || !std::isfinite(sigma_n_sq))
    throw InvalidArgument("noise variance must be positive and finite");
}

NoiseSpec NoiseSpec::from_snr_db(double snr_db, double signal_power, int dr) {
  if (!(signal_power > 0.0) || dr < 1) throw InvalidArgument("invalid SNR reference");
  const double snr = std::pow(10.0, snr_db / 10.0);
  return NoiseSpec(signal_power / (snr * static_cast<double>(dr)));
}

Vec draw_noise(const NoiseSpec& noise, Index dim, Rng& rng) {
  if (dim < 1) throw InvalidArgument("noise dimension must be positive");
  std::normal_distribution<double> g(0.0, noise.per_real_stddev());
  Vec n(dim);
  for (Index i = 0; i < dim; ++i) n[i] = g(rng);
  return n;
}

Vec draw_symbols(const RealConstellation& c, int dt, Rng& rng) {
  std::uniform_int_distribution<std::size_t> u(0, c.size() - 1);
  Vec s(2 * dt);
  for (int i = 0; i < 2 * dt; ++i) s[i] = c.point(u(rng));
  return s;
}

double compute_snr_db(const Mat& h, const RealConstellation& c, const NoiseSpec& noise,
                      std::size_t n_mc, Rng& rng) {
  if (n_mc < 1) throw InvalidArgument("n_mc must be at least 1");
  if (h.cols() % 2 != 0 || h.rows() % 2 != 0) throw InvalidArgument("H must be real-expanded");
  const int dt = static_cast<int>(h.cols() / 2);
  double sig = 0.0, nse = 0.0;
  for (std::size_t t = 0; t < n_mc; ++t) {
    sig += (h * draw_symbols(c, dt, rng)).squaredNorm();
    nse += draw_noise(noise, h.rows(), rng).squaredNorm();
  }
  return 10.0 * std::log10(sig / nse);
}

double analytic_snr_db(const Mat& h, const RealConstellation& c, const NoiseSpec& noise) {
  const double dr = static_cast<double>(h.rows() / 2);
  const double sig = h.squaredNorm() * c.real_symbol_energy();
  return 10.0 * std::log10(sig / (dr * noise.sigma_n_sq()));
}

}  // namespace mimodet
