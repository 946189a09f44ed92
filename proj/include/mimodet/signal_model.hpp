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

// Constellations, complex-to-real reparameterization, one-hot targets and
// noise bookkeeping for the real-valued MIMO model x = H s + n.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mimodet/common.hpp"

namespace mimodet {

enum class Modulation { Bpsk, Qpsk };

Modulation parse_modulation(const std::string& name);

/// Real alphabet S used for every real coordinate of s. The complex alphabet
/// is S x S (real and imaginary parts share one alphabet).
class RealConstellation {
 public:
  RealConstellation(std::vector<double> points, std::string label);

  const std::vector<double>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double point(std::size_t i) const { return points_.at(i); }
  const std::string& label() const noexcept { return label_; }

  /// Mean energy of one real coordinate under the uniform prior.
  double real_symbol_energy() const noexcept { return energy_; }
  /// Energy of a complex symbol whose real and imaginary parts are drawn from S.
  double complex_symbol_energy() const noexcept { return 2.0 * energy_; }

  /// Nearest alphabet index; ties go to the smaller point.
  std::size_t nearest_index(double v) const noexcept;
  /// Exact membership lookup; throws InvalidArgument if v is not a point.
  std::size_t index_of(double v) const;

  std::size_t bits_per_symbol() const noexcept;

 private:
  std::vector<double> points_;
  double energy_ = 0.0;
  std::string label_;
};

RealConstellation make_constellation(Modulation kind);

Vec complex_to_real_vector(const CVec& v);
/// Block expansion [Re, -Im; Im, Re] of a d_r x d_t complex matrix.
Mat complex_to_real_channel(const CMat& hc);

/// 1-based one-hot index of digit vector j (length 2 d_t). Position i < d_t is
/// the real part of antenna i and position d_t + i its imaginary part.
std::size_t one_hot_index(std::span<const int> j, int alphabet_size, int dt);
/// Inverse of one_hot_index.
std::vector<int> one_hot_digits(std::size_t index, int alphabet_size, int dt);
std::size_t one_hot_length(int alphabet_size, int dt);

struct OneHotTarget {
  std::size_t index = 1;   // 1-based
  std::size_t length = 1;
};

OneHotTarget one_hot_encode(const Vec& s, const RealConstellation& c);
Vec one_hot_decode(const OneHotTarget& t, const RealConstellation& c, int dt);

/// All |S|^{2 d_t} symbol vectors as columns, column k holding one-hot index k+1.
Mat enumerate_symbols(const RealConstellation& c, int dt);

/// Complex noise variance sigma_n^2 per complex entry; each real dimension
/// carries half of it.
class NoiseSpec {
 public:
  explicit NoiseSpec(double sigma_n_sq);
  double sigma_n_sq() const noexcept { return sigma_n_sq_; }
  double per_real_variance() const noexcept { return 0.5 * sigma_n_sq_; }
  double per_real_stddev() const noexcept { return std::sqrt(per_real_variance()); }

  /// Noise level giving the requested SNR for E||Hs||^2 = signal_power.
  static NoiseSpec from_snr_db(double snr_db, double signal_power, int dr);

 private:
  double sigma_n_sq_;
};

Vec draw_noise(const NoiseSpec& noise, Index dim, Rng& rng);
/// Uniform i.i.d. symbol vector of length 2 d_t.
Vec draw_symbols(const RealConstellation& c, int dt, Rng& rng);

/// Monte-Carlo estimate of 10 log10(E||Hs||^2 / E||n||^2).
double compute_snr_db(const Mat& h, const RealConstellation& c, const NoiseSpec& noise,
                      std::size_t n_mc, Rng& rng);
/// Closed form: tr(H^T H) E{s^2} / (d_r sigma_n^2).
double analytic_snr_db(const Mat& h, const RealConstellation& c, const NoiseSpec& noise);

}  // namespace mimodet
