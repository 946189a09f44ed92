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

#include "mimodet/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mimodet/io.hpp"

namespace mimodet {

using json = nlohmann::json;

NetworkShape::NetworkShape(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw InvalidArgument("network needs input and output widths");
  for (int w : widths_)
    if (w < 1) throw InvalidArgument("layer widths must be positive");
}

NetworkShape NetworkShape::detector(int dr, int dt, std::size_t alphabet_size, int hidden_layers,
                                    int width, bool csi) {
  if (hidden_layers < 1) throw InvalidArgument("need at least one hidden layer");
  std::vector<int> w;
  w.push_back(2 * dr + (csi ? 4 * dr * dt : 0));
  for (int i = 0; i < hidden_layers; ++i) w.push_back(width);
  w.push_back(static_cast<int>(one_hot_length(static_cast<int>(alphabet_size), dt)));
  return NetworkShape(std::move(w));
}

std::size_t NetworkShape::hidden_size() const noexcept {
  return std::accumulate(widths_.begin() + 1, widths_.end() - 1, std::size_t{0});
}

std::size_t NetworkShape::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i)
    n += static_cast<std::size_t>(widths_[i + 1]) * static_cast<std::size_t>(widths_[i] + 1);
  return n;
}

int NetworkShape::max_width() const noexcept {
  return *std::max_element(widths_.begin(), widths_.end());
}

double MlpParameters::sup_norm() const {
  double m = 0.0;
  for (const auto& w : weights) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& b : biases) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

bool MlpParameters::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

Vec MlpParameters::flatten() const {
  Vec theta(static_cast<Index>(shape.parameter_count()));
  Index o = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    theta.segment(o, weights[i].size()) = weights[i].reshaped();
    o += weights[i].size();
    theta.segment(o, biases[i].size()) = biases[i];
    o += biases[i].size();
  }
  return theta;
}

void MlpParameters::assign(const Vec& theta) {
  if (theta.size() != static_cast<Index>(shape.parameter_count()))
    throw InvalidArgument("parameter vector length mismatch");
  Index o = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i].reshaped() = theta.segment(o, weights[i].size());
    o += weights[i].size();
    biases[i] = theta.segment(o, biases[i].size());
    o += biases[i].size();
  }
}

Vec Gradient::flatten() const {
  Index n = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
  Vec g(n);
  Index o = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    g.segment(o, weights[i].size()) = weights[i].reshaped();
    o += weights[i].size();
    g.segment(o, biases[i].size()) = biases[i];
    o += biases[i].size();
  }
  return g;
}

MlpParameters init_mlp(const NetworkShape& shape, double bound, Rng& rng) {
  if (!(bound >= 1.0)) throw InvalidArgument("parameter bound R must be >= 1");
  MlpParameters p;
  p.shape = shape;
  p.bound = bound;
  const auto& d = shape.widths();
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    const double a = std::min(bound, std::sqrt(6.0 / static_cast<double>(d[i] + d[i + 1])));
    std::uniform_real_distribution<double> u(-a, a);
    Mat w(d[i + 1], d[i]);
    for (Index c = 0; c < w.cols(); ++c)
      for (Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vec::Zero(d[i + 1]));
  }
  return p;
}

void clamp_inplace(MlpParameters& params, double bound) {
  if (!(bound >= 1.0)) throw InvalidArgument("parameter bound R must be >= 1");
  for (auto& w : params.weights) w = w.cwiseMax(-bound).cwiseMin(bound);
  for (auto& b : params.biases) b = b.cwiseMax(-bound).cwiseMin(bound);
}

MlpParameters clamp_params(MlpParameters params, double bound) {
  clamp_inplace(params, bound);
  return params;
}

namespace {

void check_input(const MlpParameters& p, Index rows) {
  if (rows != p.shape.input_dim()) throw InvalidArgument("input dimension does not match d_0");
}

Mat logits_batch(const MlpParameters& p, const Mat& inputs) {
  check_input(p, inputs.rows());
  Mat a = inputs;
  const std::size_t last = p.weights.size() - 1;
  for (std::size_t i = 0; i < last; ++i) {
    Mat z = p.weights[i] * a;
    z.colwise() += p.biases[i];
    a = z.cwiseMax(0.0);
  }
  Mat out = p.weights[last] * a;
  out.colwise() += p.biases[last];
  return out;
}

void softmax_columns(Mat& z) {
  for (Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    const double m = col.maxCoeff();
    col = (col.array() - m).exp();
    col /= col.sum();
  }
}

}  // namespace

Vec logits(const MlpParameters& p, const Vec& input) { return logits_batch(p, input); }

Vec forward(const MlpParameters& p, const Vec& input) {
  Vec z = logits(p, input);
  softmax_inplace(z);
  return z;
}

Mat forward_batch(const MlpParameters& p, const Mat& inputs) {
  Mat z = logits_batch(p, inputs);
  softmax_columns(z);
  return z;
}

namespace {

// Forward pass keeping the activations needed for backpropagation.
struct Activations {
  std::vector<Mat> post;  // post[0] = input, post[i] = relu(z_{i-1})
  Mat out;                // final logits
};

void forward_cache(const MlpParameters& p, const Mat& inputs, Activations& act) {
  const std::size_t layers = p.weights.size();
  act.post.resize(layers);
  act.post[0] = inputs;
  for (std::size_t i = 0; i + 1 < layers; ++i) {
    Mat z = p.weights[i] * act.post[i];
    z.colwise() += p.biases[i];
    act.post[i + 1] = z.cwiseMax(0.0);
  }
  act.out.noalias() = p.weights[layers - 1] * act.post[layers - 1];
  act.out.colwise() += p.biases[layers - 1];
}

void check_labels(const MlpParameters& p, const Mat& inputs, std::span<const std::size_t> labels) {
  check_input(p, inputs.rows());
  if (labels.empty() || static_cast<Index>(labels.size()) != inputs.cols())
    throw InvalidArgument("batch must be nonempty with one label per input");
  const auto classes = static_cast<std::size_t>(p.shape.output_dim());
  for (std::size_t l : labels)
    if (l < 1 || l > classes) throw InvalidArgument("label outside [1, d_{l+1}]");
}

double cross_entropy_from_logits(const Mat& z, std::span<const std::size_t> labels) {
  double loss = 0.0;
  for (Index c = 0; c < z.cols(); ++c) {
    const auto col = z.col(c);
    const double m = col.maxCoeff();
    const double lse = m + std::log((col.array() - m).exp().sum());
    loss += lse - col[static_cast<Index>(labels[static_cast<std::size_t>(c)] - 1)];
  }
  return loss / static_cast<double>(z.cols());
}

}  // namespace

double mean_cross_entropy(const MlpParameters& p, const Mat& inputs,
                          std::span<const std::size_t> labels) {
  check_labels(p, inputs, labels);
  return cross_entropy_from_logits(logits_batch(p, inputs), labels);
}

namespace {

void backprop(const MlpParameters& p, Activations& act, std::span<const std::size_t> labels,
              LossAndGrad& out) {
  const std::size_t layers = p.weights.size();
  const Index batch = act.out.cols();
  out.loss = cross_entropy_from_logits(act.out, labels);

  Mat delta = act.out;
  softmax_columns(delta);
  for (Index c = 0; c < batch; ++c) delta(static_cast<Index>(labels[c] - 1), c) -= 1.0;
  delta /= static_cast<double>(batch);

  out.grad.weights.resize(layers);
  out.grad.biases.resize(layers);
  for (std::size_t i = layers; i-- > 0;) {
    out.grad.weights[i].noalias() = delta * act.post[i].transpose();
    out.grad.biases[i] = delta.rowwise().sum();
    if (i == 0) break;
    Mat back = p.weights[i].transpose() * delta;
    // ReLU derivative; a neuron with zero output passes no gradient
    delta = (act.post[i].array() > 0.0).select(back, 0.0);
  }
}

}  // namespace

LossAndGrad loss_and_grad(const MlpParameters& p, const Mat& inputs,
                          std::span<const std::size_t> labels) {
  check_labels(p, inputs, labels);
  Activations act;
  forward_cache(p, inputs, act);
  LossAndGrad out;
  backprop(p, act, labels, out);
  return out;
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(step_size >= 0.0) || !std::isfinite(step_size))
    throw ConfigError("step size must be nonnegative and finite");
  if (!(bound >= 1.0)) throw ConfigError("parameter bound R must be >= 1");
  if (!(decay_factor > 0.0)) throw ConfigError("decay factor must be positive");
}

MlpParameters train(MlpParameters params, const LabeledSet& data, const TrainingConfig& cfg,
                    TrainingLog* log) {
  cfg.validate();
  if (data.size() < 1) throw InvalidArgument("training set is empty");
  check_labels(params, data.inputs, data.labels);

  Rng rng(cfg.seed);
  const Index n = data.size();
  const Index batch = std::min<Index>(static_cast<Index>(cfg.batch_size), n);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Index cursor = n;  // forces a shuffle on the first step

  const std::size_t layers = params.weights.size();
  std::vector<Mat> m_w, v_w;
  std::vector<Vec> m_b, v_b;
  if (cfg.optimizer == Optimizer::Adam) {
    for (std::size_t i = 0; i < layers; ++i) {
      m_w.push_back(Mat::Zero(params.weights[i].rows(), params.weights[i].cols()));
      v_w.push_back(m_w.back());
      m_b.push_back(Vec::Zero(params.biases[i].size()));
      v_b.push_back(m_b.back());
    }
  }

  const std::size_t per_pass = static_cast<std::size_t>((n + batch - 1) / batch);
  const std::size_t window = cfg.log_every ? cfg.log_every : per_pass;
  double window_loss = 0.0;
  std::size_t window_count = 0;

  Mat xb(params.shape.input_dim(), batch);
  std::vector<std::size_t> lb(static_cast<std::size_t>(batch));
  Activations act;
  LossAndGrad lg;
  double step = cfg.step_size;
  double b1t = 1.0, b2t = 1.0;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (cfg.decay_every && it > 0 && it % cfg.decay_every == 0) step *= cfg.decay_factor;
    if (cursor + batch > n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    for (Index k = 0; k < batch; ++k) {
      const Index src = order[static_cast<std::size_t>(cursor + k)];
      xb.col(k) = data.inputs.col(src);
      lb[static_cast<std::size_t>(k)] = data.labels[static_cast<std::size_t>(src)];
    }
    cursor += batch;

    forward_cache(params, xb, act);
    backprop(params, act, lb, lg);
    if (!std::isfinite(lg.loss))
      throw NumericalError("training loss became non-finite at iteration " + std::to_string(it));

    if (cfg.optimizer == Optimizer::Sgd) {
      for (std::size_t i = 0; i < layers; ++i) {
        params.weights[i] -= step * lg.grad.weights[i];
        params.biases[i] -= step * lg.grad.biases[i];
      }
    } else {
      b1t *= cfg.adam_beta1;
      b2t *= cfg.adam_beta2;
      const double lr = step * std::sqrt(1.0 - b2t) / (1.0 - b1t);
      const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2, eps = cfg.adam_eps;
      for (std::size_t i = 0; i < layers; ++i) {
        m_w[i] = b1 * m_w[i] + (1.0 - b1) * lg.grad.weights[i];
        v_w[i] = b2 * v_w[i] + (1.0 - b2) * lg.grad.weights[i].cwiseAbs2();
        params.weights[i].array() -= lr * m_w[i].array() / (v_w[i].array().sqrt() + eps);
        m_b[i] = b1 * m_b[i] + (1.0 - b1) * lg.grad.biases[i];
        v_b[i] = b2 * v_b[i] + (1.0 - b2) * lg.grad.biases[i].cwiseAbs2();
        params.biases[i].array() -= lr * m_b[i].array() / (v_b[i].array().sqrt() + eps);
      }
    }
    clamp_inplace(params, cfg.bound);

    window_loss += lg.loss;
    if (++window_count == window) {
      if (log) log->losses.push_back(window_loss / static_cast<double>(window_count));
      window_loss = 0.0;
      window_count = 0;
    }
  }
  if (log && window_count > 0) log->losses.push_back(window_loss / static_cast<double>(window_count));
  params.bound = cfg.bound;
  return params;
}

ActivationPattern activation_pattern(const MlpParameters& p, const Vec& input) {
  check_input(p, input.size());
  ActivationPattern pat;
  pat.states.reserve(p.shape.hidden_size());
  Vec a = input;
  for (std::size_t i = 0; i + 1 < p.weights.size(); ++i) {
    Vec z = p.weights[i] * a + p.biases[i];
    for (Index k = 0; k < z.size(); ++k) pat.states.push_back(z[k] > 0.0 ? 1 : 0);
    a = z.cwiseMax(0.0);
  }
  return pat;
}

std::pair<Mat, Vec> region_affine_map(const MlpParameters& p, const ActivationPattern& pattern) {
  if (pattern.states.size() != p.shape.hidden_size())
    throw InvalidArgument("activation pattern length must equal d_u");
  Mat w = p.weights[0];
  Vec b = p.biases[0];
  std::size_t offset = 0;
  for (std::size_t i = 1; i < p.weights.size(); ++i) {
    const Index width = p.weights[i].cols();
    Vec mask(width);
    for (Index k = 0; k < width; ++k) mask[k] = pattern.states[offset + static_cast<std::size_t>(k)];
    offset += static_cast<std::size_t>(width);
    const Mat masked = p.weights[i] * mask.asDiagonal();
    w = masked * w;
    b = masked * b + p.biases[i];
  }
  return {std::move(w), std::move(b)};
}

double logit_bound(const NetworkShape& shape, double bound, double input_norm) {
  const double alpha = bound * static_cast<double>(shape.max_width());
  if (!(alpha > 1.0)) throw InvalidArgument("logit bound requires alpha = R ||d||_inf > 1");
  const double beta = alpha / (alpha - 1.0);
  return std::pow(alpha, shape.depth() + 1) * (input_norm + beta) - beta;
}

Vec detector_input(const Vec& x, const Mat* h) {
  if (!h) return x;
  Vec in(x.size() + h->size());
  in.head(x.size()) = x;
  in.tail(h->size()) = h->reshaped();
  return in;
}

NeuralDetector::NeuralDetector(MlpParameters params, const RealConstellation& c, int dr, int dt,
                               bool csi)
    : params_(std::move(params)), c_(c), dr_(dr), dt_(dt), csi_(csi) {
  const NetworkShape expect_in = NetworkShape::detector(dr, dt, c.size(), 1, 1, csi);
  if (params_.shape.input_dim() != expect_in.input_dim() ||
      params_.shape.output_dim() != expect_in.output_dim())
    throw InvalidArgument("network shape does not match detector dimensions");
  symbols_ = enumerate_symbols(c, dt);
}

void NeuralDetector::check_csi(const Mat* h) const {
  if (csi_ && !h) throw InvalidArgument("CSI network requires H");
  if (!csi_ && h) throw InvalidArgument("network was built without CSI input");
  if (h && (h->rows() != 2 * dr_ || h->cols() != 2 * dt_))
    throw InvalidArgument("H has the wrong dimensions for this network");
}

Vec NeuralDetector::probabilities(const Vec& x, const Mat* h) const {
  check_csi(h);
  return forward(params_, detector_input(x, h));
}

std::size_t NeuralDetector::decide_index(const Vec& x, const Mat* h) const {
  check_csi(h);
  const Vec z = logits(params_, detector_input(x, h));
  Index best = 0;
  for (Index k = 1; k < z.size(); ++k)
    if (z[k] > z[best]) best = k;
  return static_cast<std::size_t>(best) + 1;
}

DetectionResult NeuralDetector::detect(const Vec& x, const Mat* h) const {
  Vec p = probabilities(x, h);
  Index best = 0;
  for (Index k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  DetectionResult r;
  r.detector = csi_ ? "dl-csi" : "dl";
  r.hard_symbols = symbols_.col(best);
  r.posterior = std::vector<double>(p.data(), p.data() + p.size());
  return r;
}

std::vector<std::size_t> NeuralDetector::decide_batch(const Mat& inputs) const {
  const Mat z = logits_batch(params_, inputs);
  std::vector<std::size_t> out(static_cast<std::size_t>(z.cols()));
  for (Index c = 0; c < z.cols(); ++c) {
    Index best = 0;
    for (Index k = 1; k < z.rows(); ++k)
      if (z(k, c) > z(best, c)) best = k;
    out[static_cast<std::size_t>(c)] = static_cast<std::size_t>(best) + 1;
  }
  return out;
}

std::string serialize_detector(const NeuralDetector& d) {
  const MlpParameters& p = d.params();
  json j;
  j["format"] = "mimodet-mlp";
  j["format_version"] = kMlpFormatVersion;
  j["shape"] = p.shape.widths();
  j["R"] = p.bound;
  j["csi"] = d.uses_csi();
  j["d_r"] = d.dr();
  j["d_t"] = d.dt();
  j["modulation"] = d.constellation().label();
  json ws = json::array(), bs = json::array();
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(p.weights[i].size()));
    for (Index r = 0; r < p.weights[i].rows(); ++r)
      for (Index c = 0; c < p.weights[i].cols(); ++c) row_major.push_back(p.weights[i](r, c));
    ws.push_back(std::move(row_major));
    bs.push_back(std::vector<double>(p.biases[i].data(), p.biases[i].data() + p.biases[i].size()));
  }
  j["weights"] = std::move(ws);
  j["biases"] = std::move(bs);
  return j.dump() + "\n";
}

NeuralDetector deserialize_detector(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed model snapshot: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "mimodet-mlp")
      throw IoError("snapshot is not an MLP model");
    const int version = j.at("format_version").get<int>();
    if (version != kMlpFormatVersion)
      throw VersionError("unsupported MLP snapshot version " + std::to_string(version));
    MlpParameters p;
    p.shape = NetworkShape(j.at("shape").get<std::vector<int>>());
    p.bound = j.at("R").get<double>();
    const auto& d = p.shape.widths();
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    if (ws.size() + 1 != d.size() || bs.size() + 1 != d.size())
      throw IoError("snapshot layer count does not match shape");
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
      const auto w = ws[i].get<std::vector<double>>();
      const auto b = bs[i].get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(d[i + 1]) * static_cast<std::size_t>(d[i]) ||
          b.size() != static_cast<std::size_t>(d[i + 1]))
        throw IoError("snapshot layer size does not match shape");
      Mat m(d[i + 1], d[i]);
      std::size_t o = 0;
      for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = w[o++];
      p.weights.push_back(std::move(m));
      p.biases.push_back(Eigen::Map<const Vec>(b.data(), static_cast<Index>(b.size())));
    }
    const auto c = make_constellation(parse_modulation(j.at("modulation").get<std::string>()));
    return NeuralDetector(std::move(p), c, j.at("d_r").get<int>(), j.at("d_t").get<int>(),
                          j.at("csi").get<bool>());
  } catch (const json::exception& e) {
    throw IoError(std::string("incomplete model snapshot: ") + e.what());
  }
}

void save_model(const NeuralDetector& d, const std::string& path) {
  write_text_file(path, serialize_detector(d));
}

NeuralDetector load_model(const std::string& path) { return deserialize_detector(read_text_file(path)); }

}  // namespace mimodet
