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

// Model-based detectors: exact posterior / MAP, zero forcing, AMP with a
// discrete-prior denoiser, and parallel soft interference cancellation.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mimodet/channels.hpp"
#include "mimodet/common.hpp"
#include "mimodet/signal_model.hpp"

namespace mimodet {

/// How x was produced from H s + n.
class ObservationModel {
 public:
  static ObservationModel linear() { return ObservationModel(); }
  static ObservationModel quantized(QuantizerSpec q) { return ObservationModel(std::move(q)); }

  bool is_quantized() const noexcept { return quantizer_.has_value(); }
  const QuantizerSpec& quantizer() const { return quantizer_.value(); }

 private:
  ObservationModel() = default;
  explicit ObservationModel(QuantizerSpec q) : quantizer_(std::move(q)) {}
  std::optional<QuantizerSpec> quantizer_;
};

/// Posterior over all symbol vectors, stored by 0-based offset; the public
/// accessors use 1-based one-hot indices.
struct PosteriorTable {
  std::vector<double> probabilities;

  std::size_t size() const noexcept { return probabilities.size(); }
  double at_index(std::size_t one_based) const { return probabilities.at(one_based - 1); }
  /// 1-based argmax, lowest index on ties.
  std::size_t argmax_index() const;
};

struct DetectionResult {
  Vec hard_symbols;
  std::optional<std::vector<double>> posterior;
  /// Per-antenna probability vectors over S x S (iterative detectors).
  std::vector<Vec> antenna_probabilities;
  std::string detector;
  int iterations = 0;
};

/// Maximum enumeration size accepted by exhaustive detectors.
inline constexpr std::size_t kEnumerationLimit = std::size_t{1} << 20;

/// Exhaustive posterior engine; caches the symbol enumeration for one
/// (constellation, d_t) pair so repeated calls only pay for the scoring.
class PosteriorEngine {
 public:
  PosteriorEngine(const RealConstellation& c, int dt);

  const RealConstellation& constellation() const noexcept { return c_; }
  int dt() const noexcept { return dt_; }
  const Mat& symbols() const noexcept { return symbols_; }

  /// Unnormalized log posterior for every symbol vector.
  void log_scores(const Mat& h, const Vec& x, const NoiseSpec& noise,
                  const ObservationModel& model, Vec& out) const;
  PosteriorTable posterior(const Mat& h, const Vec& x, const NoiseSpec& noise,
                           const ObservationModel& model) const;
  /// 0-based offset of the MAP symbol vector (lowest offset on ties).
  Index map_offset(const Mat& h, const Vec& x, const NoiseSpec& noise,
                   const ObservationModel& model) const;
  DetectionResult map_detect(const Mat& h, const Vec& x, const NoiseSpec& noise,
                             const ObservationModel& model, bool with_posterior = false) const;

 private:
  RealConstellation c_;
  int dt_;
  Mat symbols_;
};

PosteriorTable true_posterior(const Mat& h, const Vec& x, const NoiseSpec& noise,
                              const RealConstellation& c, const ObservationModel& model);
DetectionResult map_detect(const Mat& h, const Vec& x, const NoiseSpec& noise,
                           const RealConstellation& c, const ObservationModel& model);

/// Least-squares channel inversion (H^T H)^{-1} H^T x.
Vec zf_detect(const Mat& h, const Vec& x);
/// Nearest alphabet point per coordinate, ties to the smaller value.
Vec hard_decide(const Vec& soft, const RealConstellation& c);

inline constexpr double kZfConditionLimit = 1e12;

/// Discrete-prior AMP with Onsager correction and posterior-mean denoiser.
DetectionResult amp_detect(const Mat& h, const Vec& x, const NoiseSpec& noise,
                           const RealConstellation& c, int n_iters);

/// Full trajectory of parallel soft interference cancellation.
struct SicTrace {
  /// soft[q] is the stacked soft estimate after iteration q; soft[0] = 0.
  std::vector<Vec> soft;
  /// probs[q-1][i] is the probability vector of antenna i at iteration q.
  std::vector<std::vector<Vec>> probs;
};

/// Per-antenna probabilities given the previous soft estimate. Antenna i
/// owns real columns i and d_t + i of H; `antenna_alphabet` holds the S x S
/// points (2 x |S|^2) in one-hot order.
void sic_antenna_probabilities(const Mat& h, const Vec& x, const Vec& prev_soft,
                               double sigma_n_sq, const Mat& antenna_alphabet,
                               std::vector<Vec>& probs);

/// Expected symbols per antenna, stacked as [real parts; imaginary parts].
Vec sic_expected_symbols(const std::vector<Vec>& probs, const Mat& antenna_alphabet);
/// Per-antenna argmax decision, stacked.
Vec sic_hard_decision(const std::vector<Vec>& probs, const Mat& antenna_alphabet);

SicTrace sic_trace(const Mat& h, const Vec& x, const NoiseSpec& noise, const RealConstellation& c,
                   int iterations);
DetectionResult sic_detect(const Mat& h, const Vec& x, const NoiseSpec& noise,
                           const RealConstellation& c, int iterations);

/// Softmax with max subtraction, in place.
void softmax_inplace(Vec& v);

}  // namespace mimodet
