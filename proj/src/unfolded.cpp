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

#include "mimodet/unfolded.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "mimodet/io.hpp"

namespace mimodet {

using json = nlohmann::json;

bool SicNetParameters::all_finite() const noexcept {
  for (double v : tau)
    if (!std::isfinite(v)) return false;
  for (double v : xi)
    if (!std::isfinite(v)) return false;
  return true;
}

SicNetParameters init_sicnet(int layers) {
  if (layers < 1) throw InvalidArgument("SIC-Net needs at least one layer");
  return SicNetParameters{std::vector<double>(static_cast<std::size_t>(layers), 1.0),
                          std::vector<double>(static_cast<std::size_t>(layers), 0.0)};
}

UnfoldedLoss parse_unfolded_loss(const std::string& name) {
  if (name == "mse") return UnfoldedLoss::Mse;
  if (name == "kl") return UnfoldedLoss::Kl;
  throw ConfigError("unknown unfolded loss '" + name + "'");
}

void UnfoldedTrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(step_size >= 0.0) || !std::isfinite(step_size))
    throw ConfigError("step size must be nonnegative and finite");
}

SicNet::SicNet(const RealConstellation& c, int dt)
    : c_(c), dt_(dt), alphabet_(enumerate_symbols(c, 1)) {
  if (dt < 1) throw InvalidArgument("d_t must be positive");
}

namespace {

struct LayerCache {
  Vec prev;                 // s^(q-1)
  std::vector<Vec> y;       // per-antenna interference-cancelled observation
  std::vector<Vec> probs;
  Vec mean;                 // stacked expected symbols
};

void check(const SicNetParameters& p, const Mat& h, const Vec& x, int dt) {
  if (p.tau.size() != p.xi.size() || p.tau.empty())
    throw InvalidArgument("SIC-Net parameters need Q >= 1 matching tau and xi");
  if (h.cols() != 2 * dt || h.rows() != x.size())
    throw InvalidArgument("dimension mismatch in SIC-Net");
}

// Runs all layers, filling one cache per layer when requested.
Vec run_layers(const SicNetParameters& p, const Mat& h, const Vec& x, double sigma_n_sq,
               const Mat& alphabet, std::vector<LayerCache>* caches, std::vector<Vec>* last_probs) {
  const Index dt = h.cols() / 2;
  Vec soft = Vec::Zero(h.cols());
  std::vector<Vec> probs;
  for (int q = 0; q < p.layers(); ++q) {
    sic_antenna_probabilities(h, x, soft, sigma_n_sq, alphabet, probs);
    const Vec mean = sic_expected_symbols(probs, alphabet);
    const double tau = p.tau[static_cast<std::size_t>(q)];
    const double xi = p.xi[static_cast<std::size_t>(q)];
    Vec next = tau * (mean + xi * soft);
    if (caches) {
      LayerCache lc;
      lc.prev = soft;
      const Vec resid = x - h * soft;
      for (Index i = 0; i < dt; ++i)
        lc.y.push_back(resid + h.col(i) * soft[i] + h.col(dt + i) * soft[dt + i]);
      lc.probs = probs;
      lc.mean = mean;
      caches->push_back(std::move(lc));
    }
    soft = std::move(next);
  }
  if (last_probs) *last_probs = std::move(probs);
  return soft;
}

std::vector<Index> true_antenna_symbols(const Vec& s, const RealConstellation& c, Index dt) {
  std::vector<Index> k(static_cast<std::size_t>(dt));
  const Index m = static_cast<Index>(c.size());
  for (Index i = 0; i < dt; ++i)
    k[static_cast<std::size_t>(i)] =
        static_cast<Index>(c.index_of(s[dt + i])) * m + static_cast<Index>(c.index_of(s[i]));
  return k;
}

}  // namespace

SicNetOutput SicNet::forward(const SicNetParameters& p, const Mat& h, const Vec& x,
                             const NoiseSpec& noise) const {
  check(p, h, x, dt_);
  SicNetOutput out;
  out.soft = run_layers(p, h, x, noise.sigma_n_sq(), alphabet_, nullptr, &out.probs);
  return out;
}

double SicNet::loss(const SicNetParameters& p, const UnfoldedSample& sample,
                    const NoiseSpec& noise, UnfoldedLoss kind) const {
  const SicNetOutput out = forward(p, sample.h, sample.x, noise);
  const Index dt = dt_;
  if (kind == UnfoldedLoss::Mse) return (out.soft - sample.s).squaredNorm() / static_cast<double>(2 * dt);
  const auto k = true_antenna_symbols(sample.s, c_, dt);
  double l = 0.0;
  for (Index i = 0; i < dt; ++i)
    l -= std::log(std::max(out.probs[static_cast<std::size_t>(i)][k[static_cast<std::size_t>(i)]], 1e-300));
  return l;
}

SicNetGradient SicNet::loss_and_grad(const SicNetParameters& p, const UnfoldedSample& sample,
                                     const NoiseSpec& noise, UnfoldedLoss kind) const {
  check(p, sample.h, sample.x, dt_);
  const Mat& h = sample.h;
  const Index dt = dt_;
  const Index nk = alphabet_.cols();
  const double sigma2 = noise.sigma_n_sq();
  std::vector<LayerCache> caches;
  std::vector<Vec> last_probs;
  const Vec soft = run_layers(p, h, sample.x, sigma2, alphabet_, &caches, &last_probs);

  SicNetGradient g;
  const std::size_t nq = p.tau.size();
  g.tau.assign(nq, 0.0);
  g.xi.assign(nq, 0.0);

  Vec gs = Vec::Zero(2 * dt);  // dL/ds^(q)
  std::vector<Vec> dlogit_direct;
  if (kind == UnfoldedLoss::Mse) {
    g.loss = (soft - sample.s).squaredNorm() / static_cast<double>(2 * dt);
    gs = (soft - sample.s) * (2.0 / static_cast<double>(2 * dt));
  } else {
    const auto k = true_antenna_symbols(sample.s, c_, dt);
    g.loss = 0.0;
    for (Index i = 0; i < dt; ++i) {
      const Vec& pr = last_probs[static_cast<std::size_t>(i)];
      const Index ki = k[static_cast<std::size_t>(i)];
      g.loss -= std::log(std::max(pr[ki], 1e-300));
      Vec d = pr;
      d[ki] -= 1.0;
      dlogit_direct.push_back(std::move(d));
    }
  }

  Mat hi(h.rows(), 2);
  for (std::size_t qi = nq; qi-- > 0;) {
    const LayerCache& lc = caches[qi];
    const double tau = p.tau[qi];
    const double xi = p.xi[qi];
    double dtau = 0.0, dxi = 0.0;
    Vec gprev = (tau * xi) * gs;
    Vec dy_sum = Vec::Zero(h.rows());
    std::vector<Vec> dy(static_cast<std::size_t>(dt));
    for (Index i = 0; i < dt; ++i) {
      const Eigen::Vector2d gi(gs[i], gs[dt + i]);
      const Eigen::Vector2d mi(lc.mean[i], lc.mean[dt + i]);
      const Eigen::Vector2d pi(lc.prev[i], lc.prev[dt + i]);
      dtau += gi.dot(mi + xi * pi);
      dxi += tau * gi.dot(pi);

      const Vec& pr = lc.probs[static_cast<std::size_t>(i)];
      Vec dp = (alphabet_.transpose() * gi) * tau;
      Vec dl = pr.cwiseProduct((dp.array() - pr.dot(dp)).matrix());
      if (qi + 1 == nq && !dlogit_direct.empty()) dl += dlogit_direct[static_cast<std::size_t>(i)];

      hi.col(0) = h.col(i);
      hi.col(1) = h.col(dt + i);
      const Vec& y = lc.y[static_cast<std::size_t>(i)];
      Vec dyi = Vec::Zero(h.rows());
      for (Index k = 0; k < nk; ++k) dyi -= (2.0 * dl[k] / sigma2) * (y - hi * alphabet_.col(k));
      dy_sum += dyi;
      dy[static_cast<std::size_t>(i)] = std::move(dyi);
    }
    // y_i = x - sum_{j != i} H_j s_j^(q-1)
    const Vec back = h.transpose() * dy_sum;
    for (Index j = 0; j < dt; ++j) {
      const Vec& dyj = dy[static_cast<std::size_t>(j)];
      gprev[j] += -back[j] + h.col(j).dot(dyj);
      gprev[dt + j] += -back[dt + j] + h.col(dt + j).dot(dyj);
    }
    g.tau[qi] = dtau;
    g.xi[qi] = dxi;
    gs = std::move(gprev);
  }
  return g;
}

DetectionResult SicNet::detect(const SicNetParameters& p, const Mat& h, const Vec& x,
                               const NoiseSpec& noise) const {
  SicNetOutput out = forward(p, h, x, noise);
  DetectionResult r;
  r.detector = "sicnet";
  r.iterations = p.layers();
  r.hard_symbols = sic_hard_decision(out.probs, alphabet_);
  r.antenna_probabilities = std::move(out.probs);
  return r;
}

double sicnet_empirical_loss(const SicNet& net, const SicNetParameters& p,
                             const std::vector<UnfoldedSample>& data, const NoiseSpec& noise,
                             UnfoldedLoss loss) {
  if (data.empty()) throw InvalidArgument("empty unfolded data set");
  double acc = 0.0;
  for (const auto& smp : data) acc += net.loss(p, smp, noise, loss);
  return acc / static_cast<double>(data.size());
}

SicNetParameters sicnet_train(SicNetParameters params, const SicNet& net,
                              const std::vector<UnfoldedSample>& data, const NoiseSpec& noise,
                              const UnfoldedTrainingConfig& cfg, UnfoldedTrainingReport* report) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("empty unfolded data set");
  const std::size_t n = data.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  const std::size_t nq = params.tau.size();
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;

  UnfoldedTrainingReport rep;
  rep.initial_loss = sicnet_empirical_loss(net, params, data, noise, cfg.loss);
  double window = 0.0;
  std::size_t wcount = 0;
  const std::size_t per_pass = (n + batch - 1) / batch;
  std::vector<double> gt(nq), gx(nq);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (cursor + batch > n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    std::fill(gt.begin(), gt.end(), 0.0);
    std::fill(gx.begin(), gx.end(), 0.0);
    double bl = 0.0;
    for (std::size_t k = 0; k < batch; ++k) {
      const SicNetGradient g = net.loss_and_grad(params, data[order[cursor + k]], noise, cfg.loss);
      bl += g.loss;
      for (std::size_t q = 0; q < nq; ++q) {
        gt[q] += g.tau[q];
        gx[q] += g.xi[q];
      }
    }
    cursor += batch;
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t q = 0; q < nq; ++q) {
      params.tau[q] -= cfg.step_size * gt[q] * inv;
      params.xi[q] -= cfg.step_size * gx[q] * inv;
    }
    if (!params.all_finite() || !std::isfinite(bl))
      throw NumericalError("SIC-Net training diverged at iteration " + std::to_string(it));
    window += bl * inv;
    if (++wcount == per_pass) {
      rep.losses.push_back(window / static_cast<double>(wcount));
      window = 0.0;
      wcount = 0;
    }
  }
  rep.final_loss = sicnet_empirical_loss(net, params, data, noise, cfg.loss);
  rep.warning = rep.final_loss > rep.initial_loss + 1e-6;
  if (report) *report = std::move(rep);
  return params;
}

std::string serialize_sicnet(const SicNetParameters& p) {
  json j;
  j["format"] = "mimodet-sicnet";
  j["format_version"] = kSicNetFormatVersion;
  j["Q"] = p.layers();
  j["tau"] = p.tau;
  j["xi"] = p.xi;
  return j.dump() + "\n";
}

SicNetParameters deserialize_sicnet(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed SIC-Net snapshot: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "mimodet-sicnet")
      throw IoError("snapshot is not a SIC-Net model");
    const int version = j.at("format_version").get<int>();
    if (version != kSicNetFormatVersion)
      throw VersionError("unsupported SIC-Net snapshot version " + std::to_string(version));
    SicNetParameters p{j.at("tau").get<std::vector<double>>(), j.at("xi").get<std::vector<double>>()};
    const int q = j.at("Q").get<int>();
    if (q < 1 || p.layers() != q || p.xi.size() != p.tau.size())
      throw IoError("SIC-Net snapshot has inconsistent layer count");
    return p;
  } catch (const json::exception& e) {
    throw IoError(std::string("incomplete SIC-Net snapshot: ") + e.what());
  }
}

void save_sicnet(const SicNetParameters& p, const std::string& path) {
  write_text_file(path, serialize_sicnet(p));
}

SicNetParameters load_sicnet(const std::string& path) {
  return deserialize_sicnet(read_text_file(path));
}

}  // namespace mimodet
