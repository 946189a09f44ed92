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

#include "mimodet/channels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mimodet {

ChannelRealization::ChannelRealization(CMat hc, std::string model_tag, std::optional<double> rho)
    : hc_(std::move(hc)), h_(complex_to_real_channel(hc_)), tag_(std::move(model_tag)), rho_(rho) {
  if (hc_.rows() < 1 || hc_.cols() < 1) throw InvalidArgument("empty channel matrix");
}

namespace {

CMat iid_complex_gaussian(int dr, int dt, Rng& rng) {
  // unit variance per complex entry: 1/2 per real part
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CMat hc(dr, dt);
  for (int c = 0; c < dt; ++c)
    for (int r = 0; r < dr; ++r) {
      const double re = g(rng);
      const double im = g(rng);
      hc(r, c) = {re, im};
    }
  return hc;
}

}  // namespace

ChannelRealization sample_gaussian_channel(int dr, int dt, Rng& rng) {
  if (dr < 1 || dt < 1) throw InvalidArgument("antenna counts must be positive");
  return ChannelRealization(iid_complex_gaussian(dr, dt, rng), "gaussian");
}

Mat exponential_correlation(int n, double rho) {
  Mat r(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) r(j, k) = std::pow(rho, std::abs(j - k));
  return r;
}

Mat psd_sqrt(const Mat& r) {
  Eigen::SelfAdjointEigenSolver<Mat> es(r);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

ChannelRealization sample_correlated_channel(int dr, int dt, double rho, Rng& rng) {
  if (dr < 1 || dt < 1) throw InvalidArgument("antenna counts must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in [0, 1)");
  const Mat rr = psd_sqrt(exponential_correlation(dr, rho));
  const Mat rt = psd_sqrt(exponential_correlation(dt, rho));
  const CMat g = iid_complex_gaussian(dr, dt, rng);
  CMat hc = rr.cast<std::complex<double>>() * g * rt.cast<std::complex<double>>();
  return ChannelRealization(std::move(hc), "correlated", rho);
}

ChannelSource::ChannelSource(ChannelModel model, Regime regime, int dr, int dt, double rho,
                             std::uint64_t frozen_seed)
    : model_(model), regime_(regime), dr_(dr), dt_(dt), rho_(rho) {
  if (dr < 1 || dt < 1) throw InvalidArgument("antenna counts must be positive");
  if (model == ChannelModel::Correlated && !(rho >= 0.0 && rho < 1.0))
    throw InvalidArgument("rho must lie in [0, 1)");
  if (regime_ == Regime::TimeInvariant) {
    Rng rng(frozen_seed);
    frozen_ = draw(rng);
  }
}

ChannelRealization ChannelSource::draw(Rng& rng) const {
  if (model_ == ChannelModel::Gaussian) return sample_gaussian_channel(dr_, dt_, rng);
  return sample_correlated_channel(dr_, dt_, rho_, rng);
}

ChannelRealization ChannelSource::next(Rng& rng) const {
  if (frozen_) return *frozen_;
  return draw(rng);
}

double ChannelSource::expected_signal_power(const RealConstellation& c) const {
  // A frozen channel is its own expectation. Both random models have unit
  // average power per complex entry, so tr(E{H^T H}) = 2 d_r d_t.
  const double trace = frozen_ ? frozen_->H().squaredNorm() : 2.0 * dr_ * dt_;
  return trace * c.real_symbol_energy();
}

Vec transmit_linear(const Mat& h, const Vec& s, const Vec& n) {
  if (h.cols() != s.size() || h.rows() != n.size())
    throw InvalidArgument("dimension mismatch in transmit_linear");
  return h * s + n;
}

Vec transmit_linear(const ChannelRealization& ch, const Vec& s, const NoiseSpec& noise, Rng& rng) {
  if (ch.H().cols() != s.size()) throw InvalidArgument("dimension mismatch in transmit_linear");
  return transmit_linear(ch.H(), s, draw_noise(noise, ch.H().rows(), rng));
}

QuantizerSpec::QuantizerSpec(int bits) : bits_(bits) {
  if (bits < 1 || bits > 16) throw InvalidArgument("quantizer bits must be in [1, 16]");
  const double scale = std::sqrt(static_cast<double>(bits)) * std::ldexp(1.0, -bits);
  step_ = scale;
  const int levels = 1 << bits;
  thresholds_.resize(levels - 1);
  for (int b = 1; b < levels; ++b)
    thresholds_[b - 1] = scale * static_cast<double>(-(levels / 2) + b);
}

std::size_t QuantizerSpec::bin_of(double v) const noexcept {
  // first threshold >= v; bins are right-closed
  auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), v);
  return static_cast<std::size_t>(it - thresholds_.begin()) + 1;
}

double QuantizerSpec::level(std::size_t bin) const {
  if (bin < 1 || bin > bin_count()) throw InvalidArgument("quantizer bin out of range");
  if (bin == bin_count()) return thresholds_.back() + 0.5 * step_;
  return thresholds_[bin - 1] - 0.5 * step_;
}

std::pair<double, double> QuantizerSpec::bounds(std::size_t bin) const {
  if (bin < 1 || bin > bin_count()) throw InvalidArgument("quantizer bin out of range");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double lo = bin == 1 ? -inf : thresholds_[bin - 2];
  const double hi = bin == bin_count() ? inf : thresholds_[bin - 1];
  return {lo, hi};
}

QuantizerSpec quantizer_thresholds(int bits) { return QuantizerSpec(bits); }

Vec quantize(const Vec& v, const QuantizerSpec& q) {
  Vec out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = q.apply(v[i]);
  return out;
}

Vec transmit_quantized(const ChannelRealization& ch, const Vec& s, const NoiseSpec& noise,
                       const QuantizerSpec& q, Rng& rng) {
  return quantize(transmit_linear(ch, s, noise, rng), q);
}

Vec transmit_tx_nonlinear(const ChannelRealization& ch, const EntryMap& f_nlt, const Vec& s,
                          const NoiseSpec& noise, Rng& rng) {
  Vec distorted(s.size());
  for (Index i = 0; i < s.size(); ++i) distorted[i] = f_nlt(s[i]);
  return transmit_linear(ch, distorted, noise, rng);
}

}  // namespace mimodet
