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

// SIC-Net: soft interference cancellation unrolled into Q layers, each with
// two trainable scalars. Layer q computes the per-antenna probabilities from
// the previous soft estimate exactly as SIC does, then updates
//
//   s_i^(q) = tau_q * (sum_k s_k p_{i,k}^(q) + xi_q * s_i^(q-1)).
//
// tau = 1, xi = 0 reproduces plain SIC.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mimodet/classical.hpp"
#include "mimodet/common.hpp"
#include "mimodet/signal_model.hpp"

namespace mimodet {

struct SicNetParameters {
  std::vector<double> tau;
  std::vector<double> xi;

  int layers() const noexcept { return static_cast<int>(tau.size()); }
  bool all_finite() const noexcept;
};

SicNetParameters init_sicnet(int layers);

struct SicNetOutput {
  Vec soft;                  // stacked s^(Q)
  std::vector<Vec> probs;    // p_i^(Q) per antenna
};

/// One training/evaluation sample for the unfolded detector.
struct UnfoldedSample {
  Vec x;
  Mat h;
  Vec s;
};

enum class UnfoldedLoss { Mse, Kl };

UnfoldedLoss parse_unfolded_loss(const std::string& name);

struct UnfoldedTrainingConfig {
  UnfoldedLoss loss = UnfoldedLoss::Mse;
  std::size_t batch_size = 100;
  double step_size = 0.01;
  std::size_t iterations = 2000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SicNetGradient {
  double loss = 0.0;
  std::vector<double> tau;
  std::vector<double> xi;
};

class SicNet {
 public:
  SicNet(const RealConstellation& c, int dt);

  const RealConstellation& constellation() const noexcept { return c_; }
  const Mat& antenna_alphabet() const noexcept { return alphabet_; }

  SicNetOutput forward(const SicNetParameters& p, const Mat& h, const Vec& x,
                       const NoiseSpec& noise) const;
  /// Per-sample loss and its gradient w.r.t. (tau, xi) by backpropagation
  /// through the unrolled layers.
  SicNetGradient loss_and_grad(const SicNetParameters& p, const UnfoldedSample& sample,
                               const NoiseSpec& noise, UnfoldedLoss loss) const;
  double loss(const SicNetParameters& p, const UnfoldedSample& sample, const NoiseSpec& noise,
              UnfoldedLoss loss) const;
  DetectionResult detect(const SicNetParameters& p, const Mat& h, const Vec& x,
                         const NoiseSpec& noise) const;

 private:
  RealConstellation c_;
  int dt_;
  Mat alphabet_;
};

struct UnfoldedTrainingReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool warning = false;  // final empirical loss exceeded the initial one
  std::vector<double> losses;
};

double sicnet_empirical_loss(const SicNet& net, const SicNetParameters& p,
                             const std::vector<UnfoldedSample>& data, const NoiseSpec& noise,
                             UnfoldedLoss loss);

/// Mini-batch gradient descent on the mean per-sample loss over `data`.
SicNetParameters sicnet_train(SicNetParameters params, const SicNet& net,
                              const std::vector<UnfoldedSample>& data, const NoiseSpec& noise,
                              const UnfoldedTrainingConfig& cfg,
                              UnfoldedTrainingReport* report = nullptr);

inline constexpr int kSicNetFormatVersion = 1;

std::string serialize_sicnet(const SicNetParameters& p);
SicNetParameters deserialize_sicnet(const std::string& text);
void save_sicnet(const SicNetParameters& p, const std::string& path);
SicNetParameters load_sicnet(const std::string& path);

}  // namespace mimodet
