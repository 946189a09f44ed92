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

// Detection and distributional metrics, plus calculators for the covering
// number and tail bounds of the learned-detector analysis.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mimodet/common.hpp"
#include "mimodet/neural.hpp"
#include "mimodet/signal_model.hpp"

namespace mimodet {

/// Bits differing between two symbol vectors under the natural binary map of
/// alphabet indices (for QPSK, one sign bit per real coordinate).
std::size_t bit_errors(const Vec& decided, const Vec& truth, const RealConstellation& c);
double ber(std::span<const Vec> decisions, std::span<const Vec> truth, const RealConstellation& c);
/// 1.96 sqrt(p (1 - p) / bits).
double ci_halfwidth(double ber, std::size_t bits);

/// Probability vector over one-hot classes for test item m.
using PosteriorModel = std::function<Vec(std::size_t m)>;

inline constexpr double kProbabilityFloor = 1e-300;

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  /// Some probability fell below kProbabilityFloor; value is -inf (loglik)
  /// or +inf (KL) in that case.
  bool underflow = false;
};

/// Mean of ln p(u_m | x_m) over the labelled test items.
Estimate empirical_loglik(const PosteriorModel& model, std::span<const std::size_t> labels);
/// Mean over test inputs of sum_u p_o(u|x) ln(p_o / p_theta); clamped at 0.
Estimate empirical_kl(const PosteriorModel& oracle, const PosteriorModel& model, std::size_t n);

double kl_divergence(const Vec& p, const Vec& q);
double hellinger(const Vec& p, const Vec& q);
/// 0.5 D_KL(p, q) - gamma^2(p, q); nonnegative when the inequality holds.
double check_hellinger_bound(const Vec& p, const Vec& q);

struct ErrorDecomposition {
  double approximation = 0.0;  // J(p_o) - J(p_ref)
  double generalization = 0.0; // J(p_ref) - J(p_Z)
  double approximation_se = 0.0;
  double generalization_se = 0.0;
  double kl = 0.0;             // exact-over-u KL estimate of p_Z on the same inputs
  double kl_se = 0.0;
};

ErrorDecomposition error_decomposition(const PosteriorModel& oracle, const PosteriorModel& reference,
                                       const PosteriorModel& trained,
                                       std::span<const std::size_t> labels);

/// Inputs to the covering-number and tail-bound formulas. Derived
/// quantities are always recomputed from the primitive fields.
struct TheoryBoundInputs {
  double R = 10.0;
  double max_width = 1.0;        // ||d||_inf
  int depth = 1;                 // l
  double output_dim = 1.0;       // d_{l+1}
  double parameter_count = 1.0;  // d_s
  double mu = 0.0;               // E||x||^2
  double sigma_sq = 0.0;         // Var(||x||^2)
  double nu = 0.0;
  double delta = 1.0;            // requires delta^2 >= mu

  static TheoryBoundInputs from_shape(const NetworkShape& shape, double R);

  double alpha() const noexcept { return R * max_width; }
  double beta() const noexcept { return alpha() / (alpha() - 1.0); }
  double delta1() const noexcept;
  double delta2() const noexcept;
  void validate() const;
};

/// Upper bound on ln C(eps, Theta_R).
double covering_bound(const TheoryBoundInputs& in, double eps);

struct TailBound {
  double raw = 0.0;
  double clipped = 0.0;           // raw clipped to [0, 1]
  bool preconditions_met = false;
  double min_samples_nu = 0.0;    // 16 nu / eps^2
  double min_samples_cover = 0.0; // 1024 delta1 d_s ln(delta2/eps) / eps^2
};

/// Two-term bound on P(J(p_ref) - J(p_Z) > eps) for a sample of size n.
TailBound generalization_tail_bound(const TheoryBoundInputs& in, double n, double eps);

/// 8 exp(ln C_u - n eps^2 / (512 delta_u)) + P_Omega.
double modeldriven_tail_bound(double ln_cu, double n, double eps, double delta_u, double p_omega);

/// Fills mu, sigma_sq and nu from sample input norms (Monte-Carlo moments).
void estimate_input_moments(TheoryBoundInputs& in, std::span<const double> input_norms);

}  // namespace mimodet
