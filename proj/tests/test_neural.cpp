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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "json.hpp"
#include "mimodet/neural.hpp"
#include "oracles.hpp"

using namespace mimodet;

namespace {

const RealConstellation kQpsk = make_constellation(Modulation::Qpsk);

MlpParameters random_net(const std::vector<int>& widths, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  MlpParameters p = init_mlp(NetworkShape(widths), 10.0, rng);
  std::normal_distribution<double> g(0.0, 0.3 * scale);
  for (auto& b : p.biases)
    for (Index i = 0; i < b.size(); ++i) b[i] = g(rng);
  return p;
}

Mat random_inputs(int dim, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat x(dim, n);
  for (Index c = 0; c < n; ++c)
    for (Index r = 0; r < dim; ++r) x(r, c) = g(rng);
  return x;
}

std::vector<std::size_t> random_labels(int classes, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> u(1, classes);
  std::vector<std::size_t> l(static_cast<std::size_t>(n));
  for (auto& v : l) v = static_cast<std::size_t>(u(rng));
  return l;
}

MlpParameters zero_net(const std::vector<int>& widths) {
  Rng rng(1);
  MlpParameters p = init_mlp(NetworkShape(widths), 10.0, rng);
  for (auto& w : p.weights) w.setZero();
  return p;
}

}  // namespace

TEST_CASE("init respects the bound and is deterministic") {
  const NetworkShape shape({4, 30, 30, 16});
  Rng a(7), b(7);
  const auto p = init_mlp(shape, 1.0, a);
  const auto q = init_mlp(shape, 1.0, b);
  CHECK(p.sup_norm() <= 1.0);
  CHECK(p.flatten() == q.flatten());
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const double lim = std::sqrt(6.0 / (shape.widths()[i] + shape.widths()[i + 1]));
    CHECK(p.weights[i].cwiseAbs().maxCoeff() <= lim);
    CHECK(p.biases[i].isZero());
  }
  Rng bad(1);
  CHECK_THROWS_AS(init_mlp(shape, 0.5, bad), InvalidArgument);
}

TEST_CASE("parameter count of the reference shape") {
  const NetworkShape shape({4, 100, 100, 100, 16});
  // 4*100+100 + 2*(100*100+100) + 100*16+16
  CHECK(shape.parameter_count() == 22316);
  CHECK(shape.depth() == 3);
  CHECK(shape.hidden_size() == 300);
  CHECK(shape.max_width() == 100);
  // enumeration of the flattened vector
  Rng rng(1);
  CHECK(init_mlp(shape, 10.0, rng).flatten().size() == 22316);
}

TEST_CASE("detector shape layout") {
  const auto s = NetworkShape::detector(2, 2, 2, 4, 100, false);
  CHECK(s.input_dim() == 4);
  CHECK(s.output_dim() == 16);
  CHECK(s.depth() == 4);
  const auto c = NetworkShape::detector(2, 2, 2, 4, 100, true);
  CHECK(c.input_dim() == 4 + 16);
}

TEST_CASE("zero weights give a uniform output") {
  const auto p = zero_net({4, 10, 10, 16});
  const Vec out = forward(p, Vec::Random(4));
  for (Index i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(1.0 / 16).epsilon(1e-14));
}

TEST_CASE("softmax shift invariance and normalization") {
  auto p = random_net({4, 20, 20, 16}, 3);
  const Mat x = random_inputs(4, 200, 4);
  auto q = p;
  q.biases.back().array() += 3.7;
  for (Index c = 0; c < x.cols(); ++c) {
    const Vec a = forward(p, x.col(c));
    const Vec b = forward(q, x.col(c));
    CHECK(std::abs(a.sum() - 1.0) < 1e-12);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.array() > 0.0).all());
  }
}

TEST_CASE("forward matches the naive oracle") {
  const auto p = random_net({6, 17, 9, 13, 16}, 5);
  const Mat x = random_inputs(6, 100, 6);
  const Mat batch = forward_batch(p, x);
  for (Index c = 0; c < x.cols(); ++c) {
    const Vec ref = oracle::softmax(oracle::mlp_logits(p.weights, p.biases, x.col(c)));
    CHECK((forward(p, x.col(c)) - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batch.col(c) - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((logits(p, x.col(c)) - oracle::mlp_logits(p.weights, p.biases, x.col(c))).cwiseAbs().maxCoeff() <
          1e-12);
  }
  CHECK_THROWS_AS(forward(p, Vec::Zero(5)), InvalidArgument);
}

TEST_CASE("uniform-output net has loss ln d") {
  const auto p = zero_net({4, 8, 16});
  const Mat x = random_inputs(4, 50, 1);
  const auto labels = random_labels(16, 50, 2);
  CHECK(loss_and_grad(p, x, labels).loss == doctest::Approx(std::log(16.0)).epsilon(1e-12));
  CHECK(mean_cross_entropy(p, x, labels) == doctest::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
  auto p = random_net({4, 12, 10, 16}, 11);
  const Mat x = random_inputs(4, 20, 12);
  const auto labels = random_labels(16, 20, 13);
  const Vec g = loss_and_grad(p, x, labels).grad.flatten();
  const Vec theta = p.flatten();
  REQUIRE(g.size() == theta.size());
  Rng rng(14);
  std::uniform_int_distribution<Index> pick(0, theta.size() - 1);
  double worst = 0.0;
  const double h = 1e-5;
  for (int k = 0; k < 50; ++k) {
    const Index i = pick(rng);
    Vec t = theta;
    t[i] += h;
    p.assign(t);
    const double up = mean_cross_entropy(p, x, labels);
    t[i] -= 2 * h;
    p.assign(t);
    const double dn = mean_cross_entropy(p, x, labels);
    const double fd = (up - dn) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-4});
    worst = std::max(worst, std::abs(fd - g[i]) / denom);
  }
  p.assign(theta);
  CHECK(worst < 1e-5);
}

TEST_CASE("duplicating the batch leaves loss and gradient unchanged") {
  const auto p = random_net({4, 10, 16}, 21);
  const Mat x = random_inputs(4, 30, 22);
  const auto labels = random_labels(16, 30, 23);
  Mat x2(4, 60);
  x2 << x, x;
  auto l2 = labels;
  l2.insert(l2.end(), labels.begin(), labels.end());
  const auto a = loss_and_grad(p, x, labels);
  const auto b = loss_and_grad(p, x2, l2);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-13));
  CHECK((a.grad.flatten() - b.grad.flatten()).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("label permutation equivariance") {
  auto p = random_net({4, 10, 16}, 31);
  const Mat x = random_inputs(4, 40, 32);
  const auto labels = random_labels(16, 40, 33);
  std::vector<Index> perm(16);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(34);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto q = p;
  for (Index k = 0; k < 16; ++k) {
    q.weights.back().row(perm[k]) = p.weights.back().row(k);
    q.biases.back()[perm[k]] = p.biases.back()[k];
  }
  std::vector<std::size_t> permuted(labels.size());
  for (std::size_t m = 0; m < labels.size(); ++m)
    permuted[m] = static_cast<std::size_t>(perm[static_cast<Index>(labels[m] - 1)]) + 1;
  CHECK(mean_cross_entropy(p, x, labels) == doctest::Approx(mean_cross_entropy(q, x, permuted)).epsilon(1e-13));
}

TEST_CASE("training memorizes one sample") {
  Rng rng(41);
  const auto p0 = init_mlp(NetworkShape({4, 20, 20, 16}), 10.0, rng);
  LabeledSet data{random_inputs(4, 1, 42), {7}};
  TrainingConfig cfg;
  cfg.batch_size = 1;
  cfg.iterations = 2000;
  cfg.step_size = 0.05;
  const auto p = train(p0, data, cfg);
  CHECK(mean_cross_entropy(p, data.inputs, data.labels) < 0.01);
  const NeuralDetector det(p, kQpsk, 2, 2, false);
  CHECK(det.decide_index(data.inputs.col(0)) == 7);
  CHECK(det.detect(data.inputs.col(0)).hard_symbols == enumerate_symbols(kQpsk, 2).col(6));
}

TEST_CASE("zero step size is a no-op and training is deterministic") {
  Rng rng(51);
  const auto p0 = init_mlp(NetworkShape({4, 10, 16}), 10.0, rng);
  LabeledSet data{random_inputs(4, 100, 52), random_labels(16, 100, 53)};
  TrainingConfig cfg;
  cfg.batch_size = 10;
  cfg.iterations = 50;
  cfg.step_size = 0.0;
  CHECK(train(p0, data, cfg).flatten() == p0.flatten());
  cfg.step_size = 0.1;
  const auto a = train(p0, data, cfg);
  const auto b = train(p0, data, cfg);
  CHECK(a.flatten() == b.flatten());
  CHECK(a.flatten() != p0.flatten());
  cfg.optimizer = Optimizer::Adam;
  cfg.step_size = 0.01;
  CHECK(train(p0, data, cfg).flatten() == train(p0, data, cfg).flatten());
}

TEST_CASE("training keeps parameters inside the bound") {
  Rng rng(61);
  const auto p0 = init_mlp(NetworkShape({4, 10, 16}), 1.0, rng);
  LabeledSet data{random_inputs(4, 200, 62) * 20.0, random_labels(16, 200, 63)};
  TrainingConfig cfg;
  cfg.batch_size = 20;
  cfg.iterations = 200;
  cfg.step_size = 5.0;
  cfg.bound = 1.0;
  TrainingLog log;
  const auto p = train(p0, data, cfg, &log);
  CHECK(p.sup_norm() <= 1.0);
  CHECK(!log.losses.empty());
}

TEST_CASE("clamp examples") {
  auto p = random_net({3, 4, 2}, 71);
  p = clamp_params(p, 10.0);
  const auto same = clamp_params(p, 10.0);
  CHECK(same.flatten() == p.flatten());
  p.weights[0](0, 0) = 20.0;
  p.biases[1](1) = -20.0;
  const auto c = clamp_params(p, 10.0);
  CHECK(c.weights[0](0, 0) == 10.0);
  CHECK(c.biases[1](1) == -10.0);
  CHECK(c.sup_norm() <= 10.0);
  CHECK_THROWS_AS(clamp_params(p, 0.5), InvalidArgument);
}

TEST_CASE("logits are affine within an activation region") {
  const auto p = random_net({4, 15, 15, 16}, 81);
  const Mat x = random_inputs(4, 1000, 82);
  for (Index c = 0; c < x.cols(); ++c) {
    const auto pat = activation_pattern(p, x.col(c));
    CHECK(pat.states.size() == p.shape.hidden_size());
    const auto [w, b] = region_affine_map(p, pat);
    CHECK((logits(p, x.col(c)) - (w * x.col(c) + b)).cwiseAbs().maxCoeff() < 1e-10);
    // a nearby input with the same pattern
    const Vec y = x.col(c) + 1e-6 * x.col((c + 1) % x.cols());
    if (activation_pattern(p, y).states == pat.states) {
      const Vec diff = logits(p, x.col(c)) - logits(p, y);
      CHECK((diff - w * (x.col(c) - y)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("all-on pattern gives the product of weights") {
  auto p = random_net({3, 5, 4, 6}, 91);
  for (auto& w : p.weights) w = w.cwiseAbs();
  for (auto& b : p.biases) b = b.cwiseAbs();
  const Vec x = Vec::Constant(3, 1.0);
  const auto pat = activation_pattern(p, x);
  CHECK(std::all_of(pat.states.begin(), pat.states.end(), [](auto v) { return v == 1; }));
  const auto [w, b] = region_affine_map(p, pat);
  const Mat prod = p.weights[2] * p.weights[1] * p.weights[0];
  CHECK((w - prod).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("logit bound holds on random parameters in the box") {
  const NetworkShape shape({4, 6, 6, 16});
  const double R = 1.0;
  Rng rng(101);
  std::uniform_real_distribution<double> u(-R, R);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 1000; ++t) {
    MlpParameters p = init_mlp(shape, R, rng);
    for (auto& w : p.weights) w = w.unaryExpr([&](double) { return u(rng); });
    for (auto& b : p.biases) b = b.unaryExpr([&](double) { return u(rng); });
    Vec x(4);
    for (Index i = 0; i < 4; ++i) x[i] = g(rng);
    const double bound = logit_bound(shape, R, x.norm());
    CHECK(logits(p, x).cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("CSI encoding and checks") {
  Rng rng(111);
  const auto shape = NetworkShape::detector(2, 2, 2, 1, 8, true);
  const NeuralDetector det(init_mlp(shape, 10.0, rng), kQpsk, 2, 2, true);
  const Vec x = Vec::Random(4);
  Mat h = Mat::Random(4, 4);
  const Vec in = detector_input(x, &h);
  CHECK(in.size() == 20);
  CHECK(in[4] == h(0, 0));
  CHECK(in[5] == h(1, 0));
  CHECK(in[8] == h(0, 1));
  CHECK_THROWS_AS(det.probabilities(x), InvalidArgument);
  Mat wrong = Mat::Zero(4, 2);
  CHECK_THROWS_AS(det.probabilities(x, &wrong), InvalidArgument);
  CHECK(std::abs(det.probabilities(x, &h).sum() - 1.0) < 1e-12);

  const NeuralDetector plain(init_mlp(NetworkShape::detector(2, 2, 2, 1, 8, false), 10.0, rng), kQpsk, 2,
                             2, false);
  CHECK_THROWS_AS(plain.probabilities(x, &h), InvalidArgument);
  CHECK_THROWS_AS(NeuralDetector(init_mlp(NetworkShape({3, 4, 16}), 10.0, rng), kQpsk, 2, 2, false),
                  InvalidArgument);
}

TEST_CASE("snapshot round trip is exact") {
  const auto p = random_net({4, 7, 16}, 121);
  const NeuralDetector det(p, kQpsk, 2, 2, false);
  const std::string text = serialize_detector(det);
  const auto back = deserialize_detector(text);
  CHECK(back.params().flatten() == p.flatten());
  CHECK(back.params().shape == p.shape);
  CHECK(back.params().bound == p.bound);
  CHECK(!back.uses_csi());
  CHECK(serialize_detector(back) == text);

  const auto j = nlohmann::json::parse(text);
  CHECK(j.at("format_version") == kMlpFormatVersion);
  CHECK(j.at("shape") == std::vector<int>{4, 7, 16});
  // row-major layout of the first layer
  CHECK(j.at("weights")[0][1].get<double>() == p.weights[0](0, 1));
  CHECK(j.at("weights")[0][4].get<double>() == p.weights[0](1, 0));

  auto bumped = j;
  bumped["format_version"] = kMlpFormatVersion + 1;
  CHECK_THROWS_AS(deserialize_detector(bumped.dump()), VersionError);
  CHECK_THROWS_AS(deserialize_detector("{not json"), IoError);
  auto truncated = j;
  truncated["weights"][0].erase(0);
  CHECK_THROWS_AS(deserialize_detector(truncated.dump()), IoError);
}
