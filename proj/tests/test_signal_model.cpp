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

#include <cmath>
#include <set>

#include "doctest.h"
#include "mimodet/signal_model.hpp"
#include "oracles.hpp"

using namespace mimodet;

TEST_CASE("constellations") {
  const auto q = make_constellation(Modulation::Qpsk);
  REQUIRE(q.size() == 2);
  CHECK(q.point(0) == doctest::Approx(-0.7071067811865476).epsilon(1e-15));
  CHECK(q.point(1) == doctest::Approx(0.7071067811865476).epsilon(1e-15));
  CHECK(q.complex_symbol_energy() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(one_hot_length(static_cast<int>(q.size()), 2) == 16);
  const auto b = make_constellation(Modulation::Bpsk);
  CHECK(b.points() == std::vector<double>{-1.0, 1.0});
  CHECK_THROWS_AS(parse_modulation("qam16"), InvalidArgument);
  CHECK_THROWS_AS(RealConstellation({1.0, 1.0}, "dup"), InvalidArgument);
  CHECK(q.nearest_index(0.0) == 0);  // ties to the smaller point
  CHECK(q.nearest_index(0.1) == 1);
  CHECK_THROWS_AS(q.index_of(0.5), InvalidArgument);
}

TEST_CASE("complex to real vector") {
  CVec v1(1);
  v1 << std::complex<double>(1, 2);
  CHECK(complex_to_real_vector(v1) == (Vec(2) << 1, 2).finished());
  CHECK(complex_to_real_vector(CVec::Zero(2)) == Vec::Zero(4));
  CVec v2(2);
  v2 << std::complex<double>(3, -1), std::complex<double>(-2, 4);
  CHECK(complex_to_real_vector(v2) == (Vec(4) << 3, -2, -1, 4).finished());
}

TEST_CASE("complex to real channel") {
  CMat one(1, 1);
  one << 1.0;
  CHECK(complex_to_real_channel(one) == Mat::Identity(2, 2));
  CMat i(1, 1);
  i << std::complex<double>(0, 1);
  CHECK(complex_to_real_channel(i) == (Mat(2, 2) << 0, -1, 1, 0).finished());
  Rng rng(3);
  std::normal_distribution<double> n;
  for (int t = 0; t < 50; ++t) {
    CMat hc(2, 2);
    CVec s(2), w(2);
    for (int a = 0; a < 2; ++a) {
      s[a] = {n(rng), n(rng)};
      w[a] = {n(rng), n(rng)};
      for (int b = 0; b < 2; ++b) hc(a, b) = {n(rng), n(rng)};
    }
    const Mat h = complex_to_real_channel(hc);
    CHECK((h - oracle::real_channel(hc)).norm() == 0.0);
    const Vec lhs = complex_to_real_vector(hc * s + w);
    const Vec rhs = h * complex_to_real_vector(s) + complex_to_real_vector(w);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("one-hot index examples") {
  const std::vector<int> a{0, 0}, b{1, 0}, c{1, 1, 1, 1};
  CHECK(one_hot_index(a, 2, 1) == 1);
  CHECK(one_hot_index(b, 2, 1) == 2);
  CHECK(one_hot_index(c, 2, 2) == 16);
  const std::vector<int> bad{2, 0};
  CHECK_THROWS_AS(one_hot_index(bad, 2, 1), InvalidArgument);
}

TEST_CASE("one-hot bijection is exhaustive for dt <= 3") {
  const auto c = make_constellation(Modulation::Qpsk);
  for (int dt = 1; dt <= 3; ++dt) {
    const auto digits = oracle::all_digits(2 * dt, 2);
    std::set<std::size_t> seen;
    for (const auto& d : digits) {
      const auto idx = one_hot_index(d, 2, dt);
      CHECK(idx == oracle::one_hot_index(d, 2, dt));
      CHECK(idx >= 1);
      CHECK(idx <= digits.size());
      seen.insert(idx);
      CHECK(one_hot_digits(idx, 2, dt) == d);
      const Vec s = oracle::qpsk_symbols(d);
      const auto t = one_hot_encode(s, c);
      CHECK(t.index == idx);
      CHECK(t.length == digits.size());
      CHECK(one_hot_decode(t, c, dt) == s);
    }
    CHECK(seen.size() == digits.size());
    const Mat all = enumerate_symbols(c, dt);
    for (Index k = 0; k < all.cols(); ++k) CHECK(one_hot_encode(all.col(k), c).index == std::size_t(k + 1));
  }
}

TEST_CASE("one-hot encode examples and errors") {
  const auto c = make_constellation(Modulation::Qpsk);
  const Vec s = Vec::Constant(2, -oracle::kA);
  CHECK(one_hot_encode(s, c).index == 1);
  CHECK(one_hot_decode({1, 4}, c, 1) == s);
  CHECK_THROWS_AS(one_hot_encode(Vec::Constant(2, 0.3), c), InvalidArgument);
  CHECK_THROWS_AS(one_hot_decode({17, 16}, c, 2), InvalidArgument);
}

TEST_CASE("SNR bookkeeping") {
  const auto c = make_constellation(Modulation::Qpsk);
  const Mat i2 = Mat::Identity(2, 2);
  const NoiseSpec unit(1.0);
  CHECK(unit.per_real_variance() == 0.5);
  CHECK(analytic_snr_db(i2, c, unit) == doctest::Approx(0.0).epsilon(1e-12));
  Rng rng(11);
  CHECK(std::abs(compute_snr_db(i2, c, unit, 100000, rng)) < 0.1);
  CHECK(std::abs(compute_snr_db(2.0 * i2, c, unit, 100000, rng) - 10 * std::log10(4.0)) < 0.1);
  CHECK(analytic_snr_db(i2, c, NoiseSpec(4.0)) == doctest::Approx(-10 * std::log10(4.0)));
  const auto n = NoiseSpec::from_snr_db(8.0, 4.0, 2);
  CHECK(10 * std::log10(4.0 / (2 * n.sigma_n_sq())) == doctest::Approx(8.0));
  CHECK_THROWS_AS(NoiseSpec(0.0), InvalidArgument);
}

TEST_CASE("noise statistics") {
  Rng rng(5);
  const Vec v = draw_noise(NoiseSpec(2.0), 1000000, rng);
  CHECK(std::abs(v.mean()) < 0.005);
  const double var = (v.array() - v.mean()).square().sum() / double(v.size() - 1);
  CHECK(std::abs(var - 1.0) < 0.01);
  Rng a(9), b(9);
  CHECK(draw_noise(NoiseSpec(1.0), 8, a) == draw_noise(NoiseSpec(1.0), 8, b));
}
