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

// Data-driven detector: a fully connected ReLU network with a softmax head
// over the |S|^{2 d_t} one-hot classes, trained by cross-entropy.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mimodet/classical.hpp"
#include "mimodet/common.hpp"
#include "mimodet/signal_model.hpp"

namespace mimodet {

/// Layer widths d = (d_0, ..., d_{l+1}).
class NetworkShape {
 public:
  explicit NetworkShape(std::vector<int> widths);

  /// Detector layout: d_0 = 2 d_r (plus 4 d_r d_t with CSI), d_{l+1} = |S|^{2 d_t}.
  static NetworkShape detector(int dr, int dt, std::size_t alphabet_size, int hidden_layers,
                               int width, bool csi);

  const std::vector<int>& widths() const noexcept { return widths_; }
  int depth() const noexcept { return static_cast<int>(widths_.size()) - 2; }
  int input_dim() const noexcept { return widths_.front(); }
  int output_dim() const noexcept { return widths_.back(); }
  /// d_u: total hidden neurons.
  std::size_t hidden_size() const noexcept;
  /// d_s: total weights and biases.
  std::size_t parameter_count() const noexcept;
  /// ||d||_inf
  int max_width() const noexcept;

  bool operator==(const NetworkShape&) const = default;

 private:
  std::vector<int> widths_;
};

struct MlpParameters {
  NetworkShape shape{{1, 1}};
  std::vector<Mat> weights;  // W_i is d_{i+1} x d_i
  std::vector<Vec> biases;   // b_i has d_{i+1} entries
  double bound = 10.0;       // R

  double sup_norm() const;
  bool all_finite() const;
  /// theta = (vec(W_0), b_0, ..., vec(W_l), b_l), column-major vec.
  Vec flatten() const;
  void assign(const Vec& theta);
};

MlpParameters init_mlp(const NetworkShape& shape, double bound, Rng& rng);
/// Copy with every coordinate truncated to [-R, R].
MlpParameters clamp_params(MlpParameters params, double bound);
void clamp_inplace(MlpParameters& params, double bound);

/// Final-layer affine output f_theta(x).
Vec logits(const MlpParameters& p, const Vec& input);
/// Softmax probabilities p_theta(x).
Vec forward(const MlpParameters& p, const Vec& input);
/// Column-wise probabilities for a d_0 x B batch.
Mat forward_batch(const MlpParameters& p, const Mat& inputs);

/// Inputs as columns with 1-based one-hot labels.
struct LabeledSet {
  Mat inputs;
  std::vector<std::size_t> labels;
  Index size() const noexcept { return inputs.cols(); }
};

struct Gradient {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Vec flatten() const;
};

struct LossAndGrad {
  double loss = 0.0;
  Gradient grad;
};

/// Mean cross-entropy -(1/B) sum ln p_{theta, u_m}(x_m) and its exact gradient.
LossAndGrad loss_and_grad(const MlpParameters& p, const Mat& inputs,
                          std::span<const std::size_t> labels);
double mean_cross_entropy(const MlpParameters& p, const Mat& inputs,
                          std::span<const std::size_t> labels);

enum class Optimizer { Sgd, Adam };

struct TrainingConfig {
  std::size_t batch_size = 2000;
  double step_size = 0.05;
  /// Multiply the step by decay_factor every decay_every iterations (0 = never).
  std::size_t decay_every = 0;
  double decay_factor = 0.5;
  std::size_t iterations = 100000;
  double bound = 10.0;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::Sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Iterations per recorded loss value (0 = one value per pass over the data).
  std::size_t log_every = 0;

  void validate() const;
};

struct TrainingLog {
  std::vector<double> losses;
};

/// Mini-batch training over shuffled passes of `data`; parameters are
/// clamped into Theta_R after every step. Throws NumericalError on NaN.
MlpParameters train(MlpParameters params, const LabeledSet& data, const TrainingConfig& cfg,
                    TrainingLog* log = nullptr);

/// On/off state of each hidden neuron, layer by layer (length d_u).
struct ActivationPattern {
  std::vector<std::uint8_t> states;
};

ActivationPattern activation_pattern(const MlpParameters& p, const Vec& input);
/// Affine map (W_region, b_region) that the logits follow on the region of `pattern`.
std::pair<Mat, Vec> region_affine_map(const MlpParameters& p, const ActivationPattern& pattern);

/// Upper bound alpha^{l+1}(||x||_2 + beta) - beta on |f_{theta,i}(x)| for theta in Theta_R.
double logit_bound(const NetworkShape& shape, double bound, double input_norm);

/// Network input for a detector: x, or [x; vec(H)] (column-major) with CSI.
Vec detector_input(const Vec& x, const Mat* h);

/// Trained network bundled with the metadata needed to decode its output.
class NeuralDetector {
 public:
  NeuralDetector(MlpParameters params, const RealConstellation& c, int dr, int dt, bool csi);

  const MlpParameters& params() const noexcept { return params_; }
  MlpParameters& params() noexcept { return params_; }
  const RealConstellation& constellation() const noexcept { return c_; }
  bool uses_csi() const noexcept { return csi_; }
  int dr() const noexcept { return dr_; }
  int dt() const noexcept { return dt_; }

  Vec probabilities(const Vec& x, const Mat* h = nullptr) const;
  /// 1-based argmax class, lowest index on ties.
  std::size_t decide_index(const Vec& x, const Mat* h = nullptr) const;
  DetectionResult detect(const Vec& x, const Mat* h = nullptr) const;

  /// Batched hard decisions for columns of `inputs` (already encoded).
  std::vector<std::size_t> decide_batch(const Mat& inputs) const;

 private:
  void check_csi(const Mat* h) const;

  MlpParameters params_;
  RealConstellation c_;
  int dr_, dt_;
  bool csi_;
  Mat symbols_;
};

inline constexpr int kMlpFormatVersion = 1;

std::string serialize_detector(const NeuralDetector& d);
NeuralDetector deserialize_detector(const std::string& text);
void save_model(const NeuralDetector& d, const std::string& path);
NeuralDetector load_model(const std::string& path);

}  // namespace mimodet
