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
#include <set>

#include "doctest.h"
#include "mimodet/channels.hpp"
#include "oracles.hpp"

using namespace mimodet;

TEST_CASE("gaussian channel statistics") {
  Rng rng(21);
  double sum_sq = 0;
  std::complex<double> mean = 0;
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    const auto ch = sample_gaussian_channel(1, 1, rng);
    sum_sq += std::norm(ch.Hc()(0, 0));
    mean += ch.Hc()(0, 0);
  }
  CHECK(std::abs(sum_sq / n - 1.0) < 0.02);
  CHECK(std::abs(mean.real() / n) < 0.02);
  CHECK(std::abs(mean.imag() / n) < 0.02);
  Rng a(4), b(4);
  CHECK(sample_gaussian_channel(2, 2, a).H() == sample_gaussian_channel(2, 2, b).H());
  const auto ch = sample_gaussian_channel(3, 2, rng);
  CHECK(ch.H() == oracle::real_channel(ch.Hc()));
  CHECK(ch.dr() == 3);
  CHECK(ch.dt() == 2);
}

TEST_CASE("correlated channel") {
  const Mat r = exponential_correlation(3, 0.7);
  CHECK(r(0, 2) == doctest::Approx(0.49));
  const Mat s = psd_sqrt(r);
  CHECK((s - s.transpose()).norm() < 1e-12);
  CHECK((s * s - r).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(Eigen::SelfAdjointEigenSolver<Mat>(s).eigenvalues().minCoeff() >= -1e-12);
  Rng bad(1);
  CHECK_THROWS_AS(sample_correlated_channel(2, 2, 1.0, bad), InvalidArgument);
  CHECK_THROWS_AS(sample_correlated_channel(2, 2, -0.1, bad), InvalidArgument);

  // Adjacent-antenna correlation, both across receive rows and transmit columns.
  Rng rng(8);
  std::complex<double> rx = 0, tx = 0;
  double p00 = 0, p11 = 0;
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    const auto ch = sample_correlated_channel(2, 2, 0.7, rng);
    const auto& h = ch.Hc();
    rx += h(0, 0) * std::conj(h(1, 0));
    tx += h(0, 0) * std::conj(h(0, 1));
    p00 += std::norm(h(0, 0));
    p11 += std::norm(h(1, 1));
  }
  CHECK(std::abs(rx.real() / n - 0.7) < 0.05);
  CHECK(std::abs(tx.real() / n - 0.7) < 0.05);
  CHECK(std::abs(p00 / n - 1.0) < 0.02);
  CHECK(std::abs(p11 / n - 1.0) < 0.02);

  // rho = 0 matches the i.i.d. model in variance and cross-correlation.
  double v = 0;
  std::complex<double> c = 0;
  for (int t = 0; t < n; ++t) {
    const auto ch = sample_correlated_channel(2, 2, 0.0, rng);
    v += std::norm(ch.Hc()(0, 1));
    c += ch.Hc()(0, 0) * std::conj(ch.Hc()(1, 0));
  }
  CHECK(std::abs(v / n - 1.0) < 3 * std::sqrt(1.0 / n) * 3);
  CHECK(std::abs(c) / n < 3 * std::sqrt(1.0 / n) * 2);
}

TEST_CASE("channel regimes") {
  Rng rng(2);
  const ChannelSource ti(ChannelModel::Gaussian, Regime::TimeInvariant, 2, 2, 0.0, 77);
  const Mat first = ti.next(rng).H();
  bool same = true;
  for (int t = 0; t < 10000; ++t) same = same && ti.next(rng).H() == first;
  CHECK(same);
  const ChannelSource tv(ChannelModel::Gaussian, Regime::TimeVarying, 2, 2, 0.0, 77);
  Mat prev = tv.next(rng).H();
  bool differ = true;
  for (int t = 0; t < 1000; ++t) {
    const Mat cur = tv.next(rng).H();
    differ = differ && cur != prev;
    prev = cur;
  }
  CHECK(differ);
  const auto c = make_constellation(Modulation::Qpsk);
  CHECK(tv.expected_signal_power(c) == doctest::Approx(4.0));
  CHECK(ti.expected_signal_power(c) == doctest::Approx(first.squaredNorm() * 0.5));
}

TEST_CASE("linear transmission") {
  const Mat h = Mat::Identity(2, 2);
  const Vec s = (Vec(2) << 0.3, -0.4).finished();
  const Vec n = (Vec(2) << 0.1, 0.2).finished();
  CHECK(transmit_linear(h, s, n) == (Vec(2) << 0.4, -0.2).finished());
  CHECK(transmit_linear(h, s, Vec::Zero(2)) == s);
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto ch = sample_gaussian_channel(3, 2, rng);
    const Vec sv = Vec::Random(4), nv = Vec::Random(6);
    CHECK((transmit_linear(ch.H(), sv, nv) - (oracle::matvec(ch.H(), sv) + nv)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  CHECK_THROWS_AS(transmit_linear(h, Vec::Zero(3), n), InvalidArgument);
}

TEST_CASE("quantizer thresholds") {
  const QuantizerSpec q1(1);
  CHECK(q1.thresholds() == std::vector<double>{0.0});
  CHECK(q1.step() == 0.5);
  const QuantizerSpec q2(2);
  REQUIRE(q2.thresholds().size() == 3);
  CHECK(q2.thresholds()[0] == doctest::Approx(-std::sqrt(2.0) / 4));
  CHECK(q2.thresholds()[1] == doctest::Approx(0.0));
  CHECK(q2.thresholds()[2] == doctest::Approx(std::sqrt(2.0) / 4));
  for (int b = 1; b <= 8; ++b) {
    const QuantizerSpec q(b);
    CHECK(q.thresholds().size() == (std::size_t{1} << b) - 1);
    for (std::size_t k = 1; k < q.thresholds().size(); ++k)
      CHECK(q.thresholds()[k] - q.thresholds()[k - 1] == doctest::Approx(std::sqrt(double(b)) * std::pow(2.0, -b)));
  }
  CHECK_THROWS_AS(QuantizerSpec(0), InvalidArgument);
  CHECK_THROWS_AS(QuantizerSpec(17), InvalidArgument);
}

TEST_CASE("quantize examples and properties") {
  const QuantizerSpec q1(1);
  CHECK(q1.apply(-0.3) == doctest::Approx(-0.25));
  CHECK(q1.apply(0.3) == doctest::Approx(0.25));
  CHECK(q1.bin_of(0.0) == 1);  // right-closed bins
  const QuantizerSpec q3(3);
  double prev = -1e300;
  bool monotone = true, idempotent = true, partition = true;
  for (int i = 0; i <= 100000; ++i) {
    const double v = -3.0 + 6.0 * i / 100000.0;
    const double y = q3.apply(v);
    monotone = monotone && y >= prev;
    prev = y;
    idempotent = idempotent && q3.apply(y) == y;
    const auto b = q3.bin_of(v);
    const auto [lo, hi] = q3.bounds(b);
    partition = partition && v > lo && v <= hi;
  }
  CHECK(monotone);
  CHECK(idempotent);
  CHECK(partition);
  Rng rng(1);
  const QuantizerSpec q16(16);
  const auto ch = sample_gaussian_channel(2, 2, rng);
  const Vec s = Vec::Constant(4, oracle::kA);
  Rng r1(5), r2(5);
  const Vec lin = transmit_linear(ch, s, NoiseSpec(0.1), r1);
  const Vec qz = transmit_quantized(ch, s, NoiseSpec(0.1), q16, r2);
  const double half = 0.5 * std::sqrt(16.0) * std::pow(2.0, -16);
  for (Index i = 0; i < lin.size(); ++i)
    if (std::abs(lin[i]) < q16.thresholds().back()) CHECK(std::abs(qz[i] - lin[i]) <= half + 1e-15);
  std::set<double> values;
  for (int t = 0; t < 100; ++t) {
    const Vec x = transmit_quantized(ch, s, NoiseSpec(0.5), q1, rng);
    values.insert(x[0]);
  }
  CHECK(values.size() <= 2);
}

TEST_CASE("quantized top-bin probability") {
  // H = I, s = +a: P(x_0 in top bin) = 1 - Phi((r_top - a) / sd).
  const QuantizerSpec q(2);
  const CMat hc = CMat::Identity(1, 1);
  const ChannelRealization ch(hc, "identity");
  const NoiseSpec noise(0.5);
  const Vec s = Vec::Constant(2, oracle::kA);
  Rng rng(12);
  const int n = 200000;
  int top = 0;
  const double top_level = q.level(q.bin_count());
  for (int t = 0; t < n; ++t) top += transmit_quantized(ch, s, noise, q, rng)[0] == top_level;
  const double expected = 1.0 - oracle::phi((q.thresholds().back() - oracle::kA) / noise.per_real_stddev());
  CHECK(std::abs(double(top) / n - expected) < 0.01 * expected);
}

TEST_CASE("transmit-side nonlinearity") {
  Rng rng(3);
  const auto ch = sample_gaussian_channel(2, 2, rng);
  const Vec s = (Vec(4) << oracle::kA, -oracle::kA, oracle::kA, oracle::kA).finished();
  const NoiseSpec noise(0.2);
  Rng a(1), b(1), c(1);
  CHECK(transmit_tx_nonlinear(ch, [](double v) { return v; }, s, noise, a) == transmit_linear(ch, s, noise, b));
  const Vec clipped = transmit_tx_nonlinear(ch, [](double v) { return std::clamp(v, -0.5, 0.5); }, s, noise, c);
  Rng d(1);
  const Vec expect = transmit_linear(ch, (s.array().sign() * 0.5).matrix(), noise, d);
  CHECK((clipped - expect).lpNorm<Eigen::Infinity>() < 1e-12);
  Rng e(2), f(2);
  const Vec t = transmit_tx_nonlinear(ch, [](double v) { return std::tanh(v); }, s, noise, e);
  Vec ts(4);
  for (int i = 0; i < 4; ++i) ts[i] = std::tanh(s[i]);
  const Vec n = draw_noise(noise, 4, f);
  CHECK((t - (oracle::matvec(ch.H(), ts) + n)).lpNorm<Eigen::Infinity>() < 1e-12);
}
