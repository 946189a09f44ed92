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

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mimodet/common.hpp"
#include "mimodet/signal_model.hpp"

namespace mimodet {

/// Real-valued channel matrix together with its complex parent.
class ChannelRealization {
 public:
  ChannelRealization(CMat hc, std::string model_tag, std::optional<double> rho = std::nullopt);

  const Mat& H() const noexcept { return h_; }
  const CMat& Hc() const noexcept { return hc_; }
  const std::string& model_tag() const noexcept { return tag_; }
  std::optional<double> correlation_rho() const noexcept { return rho_; }
  int dr() const noexcept { return static_cast<int>(hc_.rows()); }
  int dt() const noexcept { return static_cast<int>(hc_.cols()); }

 private:
  CMat hc_;
  Mat h_;
  std::string tag_;
  std::optional<double> rho_;
};

ChannelRealization sample_gaussian_channel(int dr, int dt, Rng& rng);

/// Exponential correlation matrix (R)_{jk} = rho^{|j-k|}.
Mat exponential_correlation(int n, double rho);
/// Symmetric PSD square root.
Mat psd_sqrt(const Mat& r);

/// Kronecker-correlated channel R_r^{1/2} G R_t^{1/2}.
ChannelRealization sample_correlated_channel(int dr, int dt, double rho, Rng& rng);

enum class ChannelModel { Gaussian, Correlated };
enum class Regime { TimeInvariant, TimeVarying };

/// Channel generator honouring the time-invariant / time-varying contract.
class ChannelSource {
 public:
  ChannelSource(ChannelModel model, Regime regime, int dr, int dt, double rho,
                std::uint64_t frozen_seed);

  /// Time-invariant: the frozen realization. Time-varying: a fresh draw.
  ChannelRealization next(Rng& rng) const;
  Regime regime() const noexcept { return regime_; }
  ChannelModel model() const noexcept { return model_; }
  int dr() const noexcept { return dr_; }
  int dt() const noexcept { return dt_; }
  const std::optional<ChannelRealization>& frozen() const noexcept { return frozen_; }

  /// E||Hs||^2 for unit-energy complex symbols: tr(E{H^T H}) E{s^2}.
  double expected_signal_power(const RealConstellation& c) const;

 private:
  ChannelRealization draw(Rng& rng) const;

  ChannelModel model_;
  Regime regime_;
  int dr_, dt_;
  double rho_;
  std::optional<ChannelRealization> frozen_;
};

Vec transmit_linear(const Mat& h, const Vec& s, const Vec& n);
Vec transmit_linear(const ChannelRealization& ch, const Vec& s, const NoiseSpec& noise, Rng& rng);

/// B-bit uniform quantizer. Bin b (1-based) is (r_{b-1}, r_b] with r_0 = -inf
/// and r_{2^B} = +inf.
class QuantizerSpec {
 public:
  explicit QuantizerSpec(int bits);

  int bits() const noexcept { return bits_; }
  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  double step() const noexcept { return step_; }
  std::size_t bin_count() const noexcept { return thresholds_.size() + 1; }

  /// 1-based bin of v.
  std::size_t bin_of(double v) const noexcept;
  /// Reconstruction level of a 1-based bin: r_b - step/2, top bin saturates
  /// to r_{2^B-1} + step/2.
  double level(std::size_t bin) const;
  /// (lower, upper] bounds of a 1-based bin; infinite at the ends.
  std::pair<double, double> bounds(std::size_t bin) const;
  double apply(double v) const noexcept { return level(bin_of(v)); }

 private:
  int bits_;
  double step_;
  std::vector<double> thresholds_;
};

QuantizerSpec quantizer_thresholds(int bits);
Vec quantize(const Vec& v, const QuantizerSpec& q);

Vec transmit_quantized(const ChannelRealization& ch, const Vec& s, const NoiseSpec& noise,
                       const QuantizerSpec& q, Rng& rng);

using EntryMap = std::function<double(double)>;
Vec transmit_tx_nonlinear(const ChannelRealization& ch, const EntryMap& f_nlt, const Vec& s,
                          const NoiseSpec& noise, Rng& rng);

}  // namespace mimodet
