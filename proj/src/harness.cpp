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

#include "mimodet/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mimodet/io.hpp"

namespace mimodet {

using json = nlohmann::json;

// ---------------------------------------------------------------- scenario

ChannelSource Scenario::make_source(std::uint64_t channel_seed) const {
  return ChannelSource(channel, regime, dr, dt, channel == ChannelModel::Correlated ? rho : 0.0,
                       channel_seed);
}

ObservationModel Scenario::observation_model() const {
  if (observation == ObservationKind::Quantized)
    return ObservationModel::quantized(QuantizerSpec(quantizer_bits));
  return ObservationModel::linear();
}

double Scenario::tx_map(double v) const {
  if (tx_kind == TxNonlinearity::Tanh) return std::tanh(tx_param * v);
  return std::clamp(v, -tx_param, tx_param);
}

Mat Scenario::effective_channel(const Mat& h) const {
  if (observation != ObservationKind::TxNonlinear) return h;
  const double a = constellation().points().back();
  return h * (tx_map(a) / a);
}

Vec Scenario::transmit(const ChannelRealization& ch, const Vec& s, const NoiseSpec& noise,
                       Rng& rng) const {
  switch (observation) {
    case ObservationKind::Linear:
      return transmit_linear(ch, s, noise, rng);
    case ObservationKind::Quantized:
      return transmit_quantized(ch, s, noise, QuantizerSpec(quantizer_bits), rng);
    case ObservationKind::TxNonlinear:
      return transmit_tx_nonlinear(ch, [this](double v) { return tx_map(v); }, s, noise, rng);
  }
  throw InvalidArgument("unknown observation kind");
}

Mat perturb_csi(const Mat& h, const ImperfectCsiSpec& spec, Rng& rng) {
  if (!(spec.sigma_e >= 0.0)) throw InvalidArgument("sigma_e must be nonnegative");
  if (spec.sigma_e == 0.0) return h;
  std::normal_distribution<double> n(0.0, spec.sigma_e);
  Mat out = h;
  for (Index c = 0; c < out.cols(); ++c)
    for (Index r = 0; r < out.rows(); ++r) out(r, c) += n(rng);
  return out;
}

// ---------------------------------------------------------------- detectors

bool DetectorToken::learned() const noexcept {
  return kind == DetectorKind::SicNet || kind == DetectorKind::Dl || kind == DetectorKind::DlCsi;
}

DetectorToken parse_detector(const std::string& token, CsiMode mode) {
  DetectorToken t;
  t.name = token;
  std::string base = token;
  std::optional<bool> imperfect;
  if (const auto colon = token.find(':'); colon != std::string::npos) {
    base = token.substr(0, colon);
    const std::string q = token.substr(colon + 1);
    if (q == "perfect") imperfect = false;
    else if (q == "imperfect") imperfect = true;
    else throw ConfigError("unknown CSI qualifier in detector '" + token + "'");
  }
  static const std::map<std::string, DetectorKind> kinds = {
      {"map", DetectorKind::Map},       {"zf", DetectorKind::Zf}, {"amp", DetectorKind::Amp},
      {"sic", DetectorKind::Sic},       {"sicnet", DetectorKind::SicNet},
      {"dl", DetectorKind::Dl},         {"dl-csi", DetectorKind::DlCsi}};
  const auto it = kinds.find(base);
  if (it == kinds.end()) throw ConfigError("unknown detector '" + token + "'");
  t.kind = it->second;
  if (!t.uses_csi()) {
    if (imperfect) throw ConfigError("detector '" + base + "' takes no CSI qualifier");
    return t;
  }
  if (mode == CsiMode::None)
    throw ConfigError("detector '" + token + "' needs CSI but csi mode is none");
  t.imperfect_csi = imperfect.value_or(mode == CsiMode::Imperfect);
  return t;
}

// ---------------------------------------------------------------- config JSON

namespace {

std::string regime_name(Regime r) { return r == Regime::TimeInvariant ? "time-invariant" : "time-varying"; }

std::string observation_name(ObservationKind k) {
  switch (k) {
    case ObservationKind::Linear: return "linear";
    case ObservationKind::Quantized: return "quantized";
    case ObservationKind::TxNonlinear: return "tx-nonlinear";
  }
  return "linear";
}

std::string csi_name(CsiMode m) {
  switch (m) {
    case CsiMode::None: return "none";
    case CsiMode::Perfect: return "perfect";
    case CsiMode::Imperfect: return "imperfect";
  }
  return "perfect";
}

std::string axis_name(SweepAxis a) { return a == SweepAxis::Width ? "width" : "sample_size"; }

// Object reader that rejects unknown keys and wraps type errors.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }
  ~Reader() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + ": missing required field '" + key + "'");
    return as<T>(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown field '" + k + "'");
  }

 private:
  template <class T>
  T as(const std::string& key) {
    try {
      const json& v = j_.at(key);
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && v.get<long long>() < 0)
          throw ConfigError(where_ + "." + key + " must be nonnegative");
        if (v.is_number_float()) {
          const double d = v.get<double>();
          if (d < 0 || d != std::floor(d)) throw ConfigError(where_ + "." + key + " must be a nonnegative integer");
          return static_cast<T>(d);
        }
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Regime parse_regime(const std::string& s) {
  if (s == "time-invariant") return Regime::TimeInvariant;
  if (s == "time-varying") return Regime::TimeVarying;
  throw ConfigError("unknown regime '" + s + "'");
}

ObservationKind parse_observation(const std::string& s) {
  if (s == "linear") return ObservationKind::Linear;
  if (s == "quantized") return ObservationKind::Quantized;
  if (s == "tx-nonlinear") return ObservationKind::TxNonlinear;
  throw ConfigError("unknown observation model '" + s + "'");
}

ChannelModel parse_channel(const std::string& s) {
  if (s == "gaussian") return ChannelModel::Gaussian;
  if (s == "correlated") return ChannelModel::Correlated;
  throw ConfigError("unknown channel model '" + s + "'");
}

CsiMode parse_csi(const std::string& s) {
  if (s == "none") return CsiMode::None;
  if (s == "perfect") return CsiMode::Perfect;
  if (s == "imperfect") return CsiMode::Imperfect;
  throw ConfigError("unknown csi mode '" + s + "'");
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::Sgd;
  if (s == "adam") return Optimizer::Adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

void read_scenario(Reader& r, Scenario& sc) {
  sc.regime = parse_regime(r.get<std::string>("regime", regime_name(sc.regime)));
  sc.observation = parse_observation(r.get<std::string>("observation", observation_name(sc.observation)));
  sc.quantizer_bits = r.get<int>("quantizer_bits", sc.quantizer_bits);
  if (r.has("tx_nonlinearity")) {
    Reader t(r.at("tx_nonlinearity"), r.path("tx_nonlinearity"));
    const auto kind = t.get<std::string>("kind", "tanh");
    if (kind == "tanh") sc.tx_kind = TxNonlinearity::Tanh;
    else if (kind == "clip") sc.tx_kind = TxNonlinearity::Clip;
    else throw ConfigError("unknown tx nonlinearity '" + kind + "'");
    sc.tx_param = t.get<double>("param", sc.tx_param);
    t.finish();
  }
  sc.channel = parse_channel(r.get<std::string>("channel", sc.channel == ChannelModel::Gaussian ? "gaussian" : "correlated"));
  sc.rho = r.get<double>("rho", sc.rho);
  try {
    sc.modulation = parse_modulation(r.get<std::string>("modulation", "qpsk"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  sc.dr = r.get<int>("dr", sc.dr);
  sc.dt = r.get<int>("dt", sc.dt);
  r.finish();
}

void read_network(Reader& r, NetworkSpec& n) {
  n.hidden_layers = r.get<int>("hidden_layers", n.hidden_layers);
  n.width = r.get<int>("width", n.width);
  auto& t = n.training;
  t.bound = r.get<double>("bound", t.bound);
  t.batch_size = r.get<std::size_t>("batch_size", t.batch_size);
  t.step_size = r.get<double>("step_size", t.step_size);
  t.iterations = r.get<std::size_t>("iterations", t.iterations);
  t.decay_every = r.get<std::size_t>("decay_every", t.decay_every);
  t.decay_factor = r.get<double>("decay_factor", t.decay_factor);
  t.optimizer = parse_optimizer(r.get<std::string>("optimizer", t.optimizer == Optimizer::Sgd ? "sgd" : "adam"));
  t.adam_beta1 = r.get<double>("adam_beta1", t.adam_beta1);
  t.adam_beta2 = r.get<double>("adam_beta2", t.adam_beta2);
  t.adam_eps = r.get<double>("adam_eps", t.adam_eps);
  t.log_every = r.get<std::size_t>("log_every", t.log_every);
  r.finish();
}

void read_unfolded(Reader& r, UnfoldedSpec& u) {
  u.layers = r.get<int>("layers", u.layers);
  u.train_size = r.get<std::size_t>("train_size", u.train_size);
  try {
    u.training.loss = parse_unfolded_loss(r.get<std::string>("loss", u.training.loss == UnfoldedLoss::Mse ? "mse" : "kl"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  u.training.batch_size = r.get<std::size_t>("batch_size", u.training.batch_size);
  u.training.step_size = r.get<double>("step_size", u.training.step_size);
  u.training.iterations = r.get<std::size_t>("iterations", u.training.iterations);
  r.finish();
}

void read_test(Reader& r, TestSpec& t) {
  t.min_vectors = r.get<std::size_t>("min_vectors", t.min_vectors);
  t.max_vectors = r.get<std::size_t>("max_vectors", t.max_vectors);
  t.min_errors = r.get<std::size_t>("min_errors", t.min_errors);
  t.block_size = r.get<std::size_t>("block_size", t.block_size);
  t.threads = r.get<int>("threads", t.threads);
  r.finish();
}

void read_sweep(Reader& r, SweepSpec& s) {
  const auto axis = r.require<std::string>("axis");
  if (axis == "width") s.axis = SweepAxis::Width;
  else if (axis == "sample_size" || axis == "sample-size") s.axis = SweepAxis::SampleSize;
  else throw ConfigError("unknown sweep axis '" + axis + "'");
  s.grid = r.require<std::vector<double>>("grid");
  s.snr_db = r.get<double>("snr_db", s.snr_db);
  s.kl_inputs = r.get<std::size_t>("kl_inputs", s.kl_inputs);
  r.finish();
}

void read_bounds(Reader& r, BoundsSpec& b) {
  b.epsilons = r.get<std::vector<double>>("epsilons", b.epsilons);
  b.sample_sizes = r.get<std::vector<double>>("sample_sizes", b.sample_sizes);
  if (r.has("delta")) b.delta = r.get<double>("delta", 0.0);
  b.delta_factor = r.get<double>("delta_factor", b.delta_factor);
  b.moment_samples = r.get<std::size_t>("moment_samples", b.moment_samples);
  if (r.has("ln_cu")) b.ln_cu = r.get<double>("ln_cu", 0.0);
  b.delta_u = r.get<double>("delta_u", b.delta_u);
  b.p_omega = r.get<double>("p_omega", b.p_omega);
  r.finish();
}

}  // namespace

std::uint64_t ExperimentSpec::frozen_channel_seed() const {
  return channel_seed.value_or(derive_seed(seed, "channel"));
}

void ExperimentSpec::validate() const {
  const auto& sc = scenario;
  if (sc.dr < 1 || sc.dt < 1) throw ConfigError("antenna counts must be positive");
  if (sc.observation == ObservationKind::Quantized && (sc.quantizer_bits < 1 || sc.quantizer_bits > 16))
    throw ConfigError("quantizer_bits must lie in 1..16");
  if (sc.channel == ChannelModel::Correlated && !(sc.rho >= 0.0 && sc.rho < 1.0))
    throw ConfigError("rho must lie in [0, 1)");
  if (sc.observation == ObservationKind::TxNonlinear && !(sc.tx_param > 0.0))
    throw ConfigError("tx nonlinearity parameter must be positive");
  if (snr_db.empty()) throw ConfigError("SNR grid must be nonempty");
  for (double v : snr_db)
    if (!std::isfinite(v)) throw ConfigError("SNR values must be finite");
  if (test.min_vectors < 1000) throw ConfigError("test size must be at least 1000");
  if (test.max_vectors < test.min_vectors) throw ConfigError("test.max_vectors must be >= test.min_vectors");
  if (test.block_size < 1) throw ConfigError("test.block_size must be positive");
  if (test.threads < 1) throw ConfigError("test.threads must be positive");
  if (!(imperfect.sigma_e >= 0.0)) throw ConfigError("sigma_e must be nonnegative");
  if (train_size < 1) throw ConfigError("train_size must be positive");
  if (network.hidden_layers < 1 || network.width < 1) throw ConfigError("network dimensions must be positive");
  if (unfolded.layers < 1 || unfolded.train_size < 1) throw ConfigError("unfolded dimensions must be positive");
  if (amp_iterations < 1 || sic_iterations < 1) throw ConfigError("iteration counts must be positive");
  try {
    network.training.validate();
    unfolded.training.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const auto c = sc.constellation();
  const std::size_t classes = one_hot_length(static_cast<int>(c.size()), sc.dt);
  std::set<std::string> names;
  for (const auto& d : detectors) {
    if (!names.insert(d.name).second) throw ConfigError("duplicate detector '" + d.name + "'");
    if (d.uses_csi() && csi == CsiMode::None)
      throw ConfigError("detector '" + d.name + "' needs CSI but csi mode is none");
    if (d.kind == DetectorKind::SicNet && sc.observation != ObservationKind::Linear)
      throw ConfigError("sicnet is only supported in linear scenarios");
    if (d.kind == DetectorKind::Zf && sc.dr < sc.dt) throw ConfigError("zf requires dr >= dt");
    if ((d.kind == DetectorKind::Map || d.kind == DetectorKind::Dl || d.kind == DetectorKind::DlCsi) &&
        classes > kEnumerationLimit)
      throw ConfigError("detector '" + d.name + "' exceeds the enumeration limit");
  }
  if (sweep) {
    if (sweep->grid.empty()) throw ConfigError("sweep grid must be nonempty");
    for (double g : sweep->grid)
      if (!(g >= 1.0) || g != std::floor(g)) throw ConfigError("sweep grid values must be positive integers");
    const bool has_mlp = std::any_of(detectors.begin(), detectors.end(), [](const DetectorToken& d) {
      return d.kind == DetectorKind::Dl || d.kind == DetectorKind::DlCsi;
    });
    if (!has_mlp) throw ConfigError("sweep requires a dl or dl-csi detector");
    if (classes > kEnumerationLimit) throw ConfigError("sweep MAP reference exceeds the enumeration limit");
  }
  for (double e : bounds.epsilons)
    if (!(e > 0.0)) throw ConfigError("bounds epsilons must be positive");
  for (double n : bounds.sample_sizes)
    if (!(n > 0.0)) throw ConfigError("bounds sample sizes must be positive");
  if (bounds.moment_samples < 2) throw ConfigError("bounds.moment_samples must be >= 2");
  if (!(bounds.p_omega >= 0.0 && bounds.p_omega <= 1.0)) throw ConfigError("p_omega must lie in [0, 1]");
}

ExperimentSpec parse_experiment(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentSpec s;
  Reader r(j, "config");
  s.name = r.get<std::string>("name", s.name);
  s.seed = r.get<std::uint64_t>("seed", s.seed);
  if (r.has("channel_seed")) s.channel_seed = r.get<std::uint64_t>("channel_seed", 0);
  if (r.has("scenario")) {
    Reader sr(r.at("scenario"), "scenario");
    read_scenario(sr, s.scenario);
  }
  s.snr_db = r.get<std::vector<double>>("snr_db", s.snr_db);
  if (r.has("csi")) {
    Reader cr(r.at("csi"), "csi");
    s.csi = parse_csi(cr.get<std::string>("mode", "perfect"));
    s.imperfect.sigma_e = cr.get<double>("sigma_e", s.imperfect.sigma_e);
    cr.finish();
  }
  for (const auto& name : r.get<std::vector<std::string>>("detectors", {}))
    s.detectors.push_back(parse_detector(name, s.csi));
  s.train_size = r.get<std::size_t>("train_size", s.train_size);
  if (r.has("test")) {
    Reader tr(r.at("test"), "test");
    read_test(tr, s.test);
  }
  if (r.has("network")) {
    Reader nr(r.at("network"), "network");
    read_network(nr, s.network);
  }
  if (r.has("unfolded")) {
    Reader ur(r.at("unfolded"), "unfolded");
    read_unfolded(ur, s.unfolded);
  }
  s.amp_iterations = r.get<int>("amp_iterations", s.amp_iterations);
  s.sic_iterations = r.get<int>("sic_iterations", s.sic_iterations);
  if (r.has("sweep")) {
    Reader wr(r.at("sweep"), "sweep");
    SweepSpec sw;
    read_sweep(wr, sw);
    s.sweep = sw;
  }
  if (r.has("bounds")) {
    Reader br(r.at("bounds"), "bounds");
    read_bounds(br, s.bounds);
  }
  s.model_dir = r.get<std::string>("model_dir", s.model_dir);
  r.finish();
  s.validate();
  return s;
}

ExperimentSpec load_experiment(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment(text);
}

std::string experiment_to_json(const ExperimentSpec& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  if (s.channel_seed) j["channel_seed"] = *s.channel_seed;
  const auto& sc = s.scenario;
  j["scenario"] = {{"regime", regime_name(sc.regime)},
                   {"observation", observation_name(sc.observation)},
                   {"quantizer_bits", sc.quantizer_bits},
                   {"tx_nonlinearity",
                    {{"kind", sc.tx_kind == TxNonlinearity::Tanh ? "tanh" : "clip"}, {"param", sc.tx_param}}},
                   {"channel", sc.channel == ChannelModel::Gaussian ? "gaussian" : "correlated"},
                   {"rho", sc.rho},
                   {"modulation", sc.modulation == Modulation::Qpsk ? "qpsk" : "bpsk"},
                   {"dr", sc.dr},
                   {"dt", sc.dt}};
  j["snr_db"] = s.snr_db;
  j["csi"] = {{"mode", csi_name(s.csi)}, {"sigma_e", s.imperfect.sigma_e}};
  json dets = json::array();
  for (const auto& d : s.detectors) dets.push_back(d.name);
  j["detectors"] = dets;
  j["train_size"] = s.train_size;
  j["test"] = {{"min_vectors", s.test.min_vectors}, {"max_vectors", s.test.max_vectors},
               {"min_errors", s.test.min_errors},   {"block_size", s.test.block_size},
               {"threads", s.test.threads}};
  const auto& t = s.network.training;
  j["network"] = {{"hidden_layers", s.network.hidden_layers},
                  {"width", s.network.width},
                  {"bound", t.bound},
                  {"batch_size", t.batch_size},
                  {"step_size", t.step_size},
                  {"iterations", t.iterations},
                  {"decay_every", t.decay_every},
                  {"decay_factor", t.decay_factor},
                  {"optimizer", t.optimizer == Optimizer::Sgd ? "sgd" : "adam"},
                  {"adam_beta1", t.adam_beta1},
                  {"adam_beta2", t.adam_beta2},
                  {"adam_eps", t.adam_eps},
                  {"log_every", t.log_every}};
  const auto& u = s.unfolded;
  j["unfolded"] = {{"layers", u.layers},
                   {"train_size", u.train_size},
                   {"loss", u.training.loss == UnfoldedLoss::Mse ? "mse" : "kl"},
                   {"batch_size", u.training.batch_size},
                   {"step_size", u.training.step_size},
                   {"iterations", u.training.iterations}};
  j["amp_iterations"] = s.amp_iterations;
  j["sic_iterations"] = s.sic_iterations;
  if (s.sweep)
    j["sweep"] = {{"axis", axis_name(s.sweep->axis)},
                  {"grid", s.sweep->grid},
                  {"snr_db", s.sweep->snr_db},
                  {"kl_inputs", s.sweep->kl_inputs}};
  const auto& b = s.bounds;
  json bj = {{"epsilons", b.epsilons},         {"sample_sizes", b.sample_sizes},
             {"delta_factor", b.delta_factor}, {"moment_samples", b.moment_samples},
             {"delta_u", b.delta_u},           {"p_omega", b.p_omega}};
  if (b.delta) bj["delta"] = *b.delta;
  if (b.ln_cu) bj["ln_cu"] = *b.ln_cu;
  j["bounds"] = bj;
  j["model_dir"] = s.model_dir;
  return j.dump(2);
}

// ---------------------------------------------------------------- datasets

NoiseSpec noise_at(const ExperimentSpec& spec, const ChannelSource& source, double snr_db) {
  return NoiseSpec::from_snr_db(snr_db, source.expected_signal_power(spec.scenario.constellation()),
                                spec.scenario.dr);
}

namespace {

Dataset draw_samples(const ExperimentSpec& spec, const ChannelSource& source, DatasetKind kind,
                     std::size_t size, const NoiseSpec& noise, Rng& rng) {
  const auto c = spec.scenario.constellation();
  Dataset d;
  d.kind = kind;
  d.x.reserve(size);
  d.s.reserve(size);
  d.labels.reserve(size);
  if (kind != DatasetKind::Z) d.h.reserve(size);
  for (std::size_t k = 0; k < size; ++k) {
    const ChannelRealization ch = source.next(rng);
    Vec s = draw_symbols(c, spec.scenario.dt, rng);
    d.x.push_back(spec.scenario.transmit(ch, s, noise, rng));
    d.labels.push_back(one_hot_encode(s, c).index);
    d.s.push_back(std::move(s));
    if (kind != DatasetKind::Z) d.h.push_back(ch.H());
  }
  return d;
}

}  // namespace

LabeledSet Dataset::labeled() const {
  if (x.empty()) throw InvalidArgument("empty dataset");
  const bool csi = kind != DatasetKind::Z;
  LabeledSet out;
  const Index rows = x.front().size() + (csi ? h.front().size() : 0);
  out.inputs.resize(rows, static_cast<Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k)
    out.inputs.col(static_cast<Index>(k)) = detector_input(x[k], csi ? &h[k] : nullptr);
  out.labels = labels;
  return out;
}

std::vector<UnfoldedSample> Dataset::unfolded() const {
  if (kind == DatasetKind::Z) throw InvalidArgument("unfolded samples need channel matrices");
  std::vector<UnfoldedSample> out;
  out.reserve(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out.push_back({x[k], h[k], s[k]});
  return out;
}

Dataset generate_dataset(const ExperimentSpec& spec, DatasetKind kind, std::size_t size, double snr_db,
                         Rng& rng) {
  if (size < 1) throw InvalidArgument("dataset size must be positive");
  if (kind == DatasetKind::Omega && spec.scenario.observation != ObservationKind::Linear)
    throw InvalidArgument("Omega datasets are only defined for linear scenarios");
  const ChannelSource source = spec.scenario.make_source(spec.frozen_channel_seed());
  return draw_samples(spec, source, kind, size, noise_at(spec, source, snr_db), rng);
}

// ---------------------------------------------------------------- runner

const BerCurve* ResultsBundle::curve(const std::string& detector) const {
  for (const auto& c : curves)
    if (c.detector == detector) return &c;
  return nullptr;
}

namespace {

std::uint64_t snr_key(double snr_db) { return std::bit_cast<std::uint64_t>(snr_db); }

struct TestBlock {
  std::vector<Vec> x, s;
  std::vector<Mat> h, h_est;
};

TestBlock make_block(const ExperimentSpec& spec, const ChannelSource& source, const NoiseSpec& noise,
                     std::uint64_t key, std::uint64_t block, std::size_t n) {
  Rng rng = make_rng(spec.seed, "test", key, block);
  Rng csi_rng = make_rng(spec.seed, "test-csi", key, block);
  const auto c = spec.scenario.constellation();
  TestBlock b;
  b.x.reserve(n);
  b.s.reserve(n);
  b.h.reserve(n);
  b.h_est.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const ChannelRealization ch = source.next(rng);
    Vec s = draw_symbols(c, spec.scenario.dt, rng);
    b.x.push_back(spec.scenario.transmit(ch, s, noise, rng));
    b.s.push_back(std::move(s));
    b.h.push_back(ch.H());
    b.h_est.push_back(perturb_csi(ch.H(), spec.imperfect, csi_rng));
  }
  return b;
}

/// Hard decisions for every vector of a block.
using BlockDecider = std::function<std::vector<Vec>(const TestBlock&)>;

struct Evaluator {
  std::string name;
  BlockDecider decide;
};

struct Tally {
  std::size_t bits = 0, errors = 0;
};

/// Runs blocks in rounds (one per worker), merges in block order and stops
/// at the first block after which every evaluator has min_errors errors and
/// min_vectors have been seen, or the trial cap is reached. The outcome does
/// not depend on the thread count.
std::vector<BerPoint> evaluate_point(const ExperimentSpec& spec, const ChannelSource& source,
                                     const NoiseSpec& noise, std::uint64_t key,
                                     const std::vector<Evaluator>& evals) {
  const auto c = spec.scenario.constellation();
  const std::size_t bs = spec.test.block_size;
  const std::size_t workers = static_cast<std::size_t>(spec.test.threads);
  std::vector<Tally> total(evals.size());
  std::size_t vectors = 0;
  std::uint64_t next_block = 0;
  bool done = false, capped = false;

  auto run_block = [&](std::uint64_t block, std::size_t n) {
    const TestBlock b = make_block(spec, source, noise, key, block, n);
    std::vector<Tally> t(evals.size());
    for (std::size_t e = 0; e < evals.size(); ++e) {
      const auto decisions = evals[e].decide(b);
      for (std::size_t k = 0; k < n; ++k) {
        t[e].errors += bit_errors(decisions[k], b.s[k], c);
        t[e].bits += static_cast<std::size_t>(b.s[k].size()) * c.bits_per_symbol();
      }
    }
    return t;
  };

  while (!done) {
    std::vector<std::size_t> sizes;
    std::size_t planned = vectors;
    for (std::size_t w = 0; w < workers && planned < spec.test.max_vectors; ++w) {
      const std::size_t n = std::min(bs, spec.test.max_vectors - planned);
      sizes.push_back(n);
      planned += n;
    }
    std::vector<std::vector<Tally>> results(sizes.size());
    std::vector<std::exception_ptr> errors(sizes.size());
    if (sizes.size() == 1) {
      results[0] = run_block(next_block, sizes[0]);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < sizes.size(); ++w)
        pool.emplace_back([&, w] {
          try {
            results[w] = run_block(next_block + w, sizes[w]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t w = 0; w < sizes.size(); ++w) {
      for (std::size_t e = 0; e < evals.size(); ++e) {
        total[e].bits += results[w][e].bits;
        total[e].errors += results[w][e].errors;
      }
      vectors += sizes[w];
      const bool enough = std::all_of(total.begin(), total.end(),
                                      [&](const Tally& t) { return t.errors >= spec.test.min_errors; });
      if (vectors >= spec.test.min_vectors && enough) {
        done = true;
        break;
      }
      if (vectors >= spec.test.max_vectors) {
        done = true;
        capped = true;
        break;
      }
    }
    next_block += sizes.size();
  }

  std::vector<BerPoint> out(evals.size());
  for (std::size_t e = 0; e < evals.size(); ++e) {
    auto& p = out[e];
    p.bits = total[e].bits;
    p.errors = total[e].errors;
    p.vectors = vectors;
    p.ber = static_cast<double>(p.errors) / static_cast<double>(p.bits);
    p.ci = ci_halfwidth(p.ber, p.bits);
    p.capped = capped && p.errors < spec.test.min_errors;
  }
  return out;
}

const Mat& csi_of(const TestBlock& b, std::size_t k, bool imperfect) {
  return imperfect ? b.h_est[k] : b.h[k];
}

Evaluator model_based(const ExperimentSpec& spec, const DetectorToken& d, const NoiseSpec& noise,
                      std::shared_ptr<const PosteriorEngine> engine) {
  const Scenario sc = spec.scenario;
  const auto c = sc.constellation();
  const bool imp = d.imperfect_csi;
  switch (d.kind) {
    case DetectorKind::Map: {
      const ObservationModel model = sc.observation_model();
      return {d.name, [=](const TestBlock& b) {
                std::vector<Vec> out;
                out.reserve(b.x.size());
                for (std::size_t k = 0; k < b.x.size(); ++k) {
                  const Mat h = sc.effective_channel(csi_of(b, k, imp));
                  out.push_back(engine->symbols().col(engine->map_offset(h, b.x[k], noise, model)));
                }
                return out;
              }};
    }
    case DetectorKind::Zf:
      return {d.name, [=](const TestBlock& b) {
                std::vector<Vec> out;
                out.reserve(b.x.size());
                for (std::size_t k = 0; k < b.x.size(); ++k) {
                  Vec soft;
                  try {
                    soft = zf_detect(csi_of(b, k, imp), b.x[k]);
                  } catch (const NumericalError&) {
                    // Ill-conditioned channel: no usable inverse, decide on zero.
                    soft = Vec::Zero(b.s[k].size());
                  }
                  out.push_back(hard_decide(soft, c));
                }
                return out;
              }};
    case DetectorKind::Amp: {
      const int iters = spec.amp_iterations;
      return {d.name, [=](const TestBlock& b) {
                std::vector<Vec> out;
                out.reserve(b.x.size());
                for (std::size_t k = 0; k < b.x.size(); ++k)
                  out.push_back(amp_detect(csi_of(b, k, imp), b.x[k], noise, c, iters).hard_symbols);
                return out;
              }};
    }
    case DetectorKind::Sic: {
      const int iters = spec.sic_iterations;
      return {d.name, [=](const TestBlock& b) {
                std::vector<Vec> out;
                out.reserve(b.x.size());
                for (std::size_t k = 0; k < b.x.size(); ++k)
                  out.push_back(sic_detect(csi_of(b, k, imp), b.x[k], noise, c, iters).hard_symbols);
                return out;
              }};
    }
    default:
      throw InvalidArgument("not a model-based detector");
  }
}

Evaluator mlp_evaluator(const std::string& name, std::shared_ptr<const NeuralDetector> det,
                        bool imperfect, std::shared_ptr<const PosteriorEngine> engine) {
  return {name, [=](const TestBlock& b) {
            const bool csi = det->uses_csi();
            const Index n = static_cast<Index>(b.x.size());
            Mat inputs(det->params().shape.input_dim(), n);
            for (Index k = 0; k < n; ++k) {
              const auto i = static_cast<std::size_t>(k);
              inputs.col(k) = detector_input(b.x[i], csi ? &csi_of(b, i, imperfect) : nullptr);
            }
            const auto idx = det->decide_batch(inputs);
            std::vector<Vec> out;
            out.reserve(idx.size());
            for (auto u : idx) out.push_back(engine->symbols().col(static_cast<Index>(u - 1)));
            return out;
          }};
}

Evaluator sicnet_evaluator(const std::string& name, std::shared_ptr<const SicNet> net,
                           SicNetParameters params, bool imperfect, const NoiseSpec& noise) {
  return {name, [=](const TestBlock& b) {
            std::vector<Vec> out;
            out.reserve(b.x.size());
            for (std::size_t k = 0; k < b.x.size(); ++k)
              out.push_back(net->detect(params, csi_of(b, k, imperfect), b.x[k], noise).hard_symbols);
            return out;
          }};
}

std::string snapshot_name(const std::string& base, double snr_db, const std::string& suffix = "") {
  return "models/" + base + suffix + "_snr" + format_double(snr_db) + ".json";
}

// Trains or loads the learned detectors needed at one operating point.
class ModelFactory {
 public:
  ModelFactory(const ExperimentSpec& spec, ResultsBundle& bundle) : spec_(spec), bundle_(bundle) {}

  std::shared_ptr<const NeuralDetector> mlp(bool csi, double snr_db, int width, std::size_t train_size,
                                            const std::string& suffix) {
    const std::string base = csi ? "dl-csi" : "dl";
    const std::string file = snapshot_name(base, snr_db, suffix);
    if (auto it = mlps_.find(file); it != mlps_.end()) return it->second;
    std::shared_ptr<const NeuralDetector> det;
    if (!spec_.model_dir.empty()) {
      det = std::make_shared<NeuralDetector>(
          load_model((std::filesystem::path(spec_.model_dir) / file).string()));
      if (det->uses_csi() != csi) throw ConfigError("snapshot '" + file + "' has the wrong CSI mode");
      bundle_.log.push_back("loaded " + file);
    } else {
      det = train_mlp(csi, snr_db, width, train_size, base + suffix);
    }
    bundle_.snapshots.push_back({file, serialize_detector(*det)});
    mlps_.emplace(file, det);
    return det;
  }

  SicNetParameters sicnet(double snr_db, const NoiseSpec& noise) {
    const std::string file = snapshot_name("sicnet", snr_db);
    if (auto it = sicnets_.find(file); it != sicnets_.end()) return it->second;
    SicNetParameters p;
    if (!spec_.model_dir.empty()) {
      p = load_sicnet((std::filesystem::path(spec_.model_dir) / file).string());
      bundle_.log.push_back("loaded " + file);
    } else {
      const auto key = snr_key(snr_db);
      Rng rng = make_rng(spec_.seed, "train-omega", key);
      const Dataset omega = generate_dataset(spec_, DatasetKind::Omega, spec_.unfolded.train_size, snr_db, rng);
      UnfoldedTrainingConfig cfg = spec_.unfolded.training;
      cfg.seed = derive_seed(spec_.seed, "sicnet-shuffle", key);
      const SicNet net(spec_.scenario.constellation(), spec_.scenario.dt);
      UnfoldedTrainingReport rep;
      p = sicnet_train(init_sicnet(spec_.unfolded.layers), net, omega.unfolded(), noise, cfg, &rep);
      bundle_.log.push_back("trained sicnet at " + format_double(snr_db) + " dB: loss " +
                            format_double(rep.initial_loss) + " -> " + format_double(rep.final_loss));
      if (rep.warning)
        bundle_.log.push_back("warning: sicnet empirical loss increased at " + format_double(snr_db) + " dB");
    }
    bundle_.snapshots.push_back({file, serialize_sicnet(p)});
    sicnets_.emplace(file, p);
    return p;
  }

 private:
  std::shared_ptr<const NeuralDetector> train_mlp(bool csi, double snr_db, int width,
                                                  std::size_t train_size, const std::string& label) {
    const auto& sc = spec_.scenario;
    const auto c = sc.constellation();
    const auto key = snr_key(snr_db);
    Rng data_rng = make_rng(spec_.seed, "train", key);
    const Dataset data =
        generate_dataset(spec_, csi ? DatasetKind::ZCsi : DatasetKind::Z, train_size, snr_db, data_rng);
    const auto shape = NetworkShape::detector(sc.dr, sc.dt, c.size(), spec_.network.hidden_layers, width, csi);
    Rng init_rng = make_rng(spec_.seed, "init", key, hash_tag(label));
    TrainingConfig cfg = spec_.network.training;
    cfg.seed = derive_seed(spec_.seed, "shuffle", key, hash_tag(label));
    TrainingLog log;
    MlpParameters p = train(init_mlp(shape, cfg.bound, init_rng), data.labeled(), cfg, &log);
    std::ostringstream msg;
    msg << "trained " << label << " at " << format_double(snr_db) << " dB on " << train_size
        << " samples, width " << width << ", " << cfg.iterations << " iterations";
    if (!log.losses.empty())
      msg << ", loss " << format_double(log.losses.front()) << " -> " << format_double(log.losses.back());
    bundle_.log.push_back(msg.str());
    return std::make_shared<NeuralDetector>(std::move(p), c, sc.dr, sc.dt, csi);
  }

  const ExperimentSpec& spec_;
  ResultsBundle& bundle_;
  std::map<std::string, std::shared_ptr<const NeuralDetector>> mlps_;
  std::map<std::string, SicNetParameters> sicnets_;
};

void require_detectors(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.detectors.empty()) throw ConfigError("no detectors configured");
}

std::string stop_reason(const BerPoint& p) {
  return p.capped ? "trial cap" : "error target";
}

}  // namespace

ResultsBundle train_experiment(const ExperimentSpec& spec) {
  require_detectors(spec);
  ResultsBundle b;
  b.experiment = spec.name;
  b.seed = spec.seed;
  ModelFactory models(spec, b);
  const ChannelSource source = spec.scenario.make_source(spec.frozen_channel_seed());
  for (double snr : spec.snr_db) {
    const NoiseSpec noise = noise_at(spec, source, snr);
    for (const auto& d : spec.detectors) {
      try {
        if (d.kind == DetectorKind::Dl || d.kind == DetectorKind::DlCsi)
          models.mlp(d.kind == DetectorKind::DlCsi, snr, spec.network.width, spec.train_size, "");
        else if (d.kind == DetectorKind::SicNet)
          models.sicnet(snr, noise);
      } catch (const NumericalError& e) {
        b.failures.push_back(d.name + " at " + format_double(snr) + " dB: " + e.what());
      }
    }
  }
  return b;
}

ResultsBundle run_experiment(const ExperimentSpec& spec) {
  require_detectors(spec);
  ResultsBundle b;
  b.experiment = spec.name;
  b.seed = spec.seed;
  const auto& sc = spec.scenario;
  const auto engine = std::make_shared<const PosteriorEngine>(sc.constellation(), sc.dt);
  const auto sicnet = std::make_shared<const SicNet>(sc.constellation(), sc.dt);
  const ChannelSource source = sc.make_source(spec.frozen_channel_seed());
  ModelFactory models(spec, b);
  for (const auto& d : spec.detectors) b.curves.push_back({d.name, "snr_db", {}});

  for (double snr : spec.snr_db) {
    const NoiseSpec noise = noise_at(spec, source, snr);
    std::vector<Evaluator> evals;
    std::vector<std::size_t> curve_of;
    for (std::size_t i = 0; i < spec.detectors.size(); ++i) {
      const auto& d = spec.detectors[i];
      try {
        switch (d.kind) {
          case DetectorKind::Dl:
          case DetectorKind::DlCsi:
            evals.push_back(mlp_evaluator(
                d.name, models.mlp(d.kind == DetectorKind::DlCsi, snr, spec.network.width, spec.train_size, ""),
                d.imperfect_csi, engine));
            break;
          case DetectorKind::SicNet:
            evals.push_back(sicnet_evaluator(d.name, sicnet, models.sicnet(snr, noise), d.imperfect_csi, noise));
            break;
          default:
            evals.push_back(model_based(spec, d, noise, engine));
        }
        curve_of.push_back(i);
      } catch (const NumericalError& e) {
        b.failures.push_back(d.name + " at " + format_double(snr) + " dB: " + e.what());
      }
    }
    if (evals.empty()) continue;
    const auto points = evaluate_point(spec, source, noise, snr_key(snr), evals);
    for (std::size_t e = 0; e < evals.size(); ++e) {
      BerPoint p = points[e];
      p.axis_value = snr;
      p.snr_db = snr;
      b.curves[curve_of[e]].points.push_back(p);
      b.log.push_back(evals[e].name + " at " + format_double(snr) + " dB: ber " + format_double(p.ber) + " (" +
                      std::to_string(p.errors) + "/" + std::to_string(p.bits) + " bits, stopped by " +
                      stop_reason(p) + ")");
    }
  }
  for (auto& c : b.curves)
    std::stable_sort(c.points.begin(), c.points.end(),
                     [](const BerPoint& x, const BerPoint& y) { return x.axis_value < y.axis_value; });
  return b;
}

ResultsBundle sweep(const ExperimentSpec& spec) {
  require_detectors(spec);
  if (!spec.sweep) throw ConfigError("config has no sweep section");
  const SweepSpec& sw = *spec.sweep;
  ResultsBundle b;
  b.experiment = spec.name;
  b.seed = spec.seed;
  const auto& sc = spec.scenario;
  const auto c = sc.constellation();
  const auto engine = std::make_shared<const PosteriorEngine>(c, sc.dt);
  const ChannelSource source = sc.make_source(spec.frozen_channel_seed());
  const NoiseSpec noise = noise_at(spec, source, sw.snr_db);
  const std::string axis = axis_name(sw.axis);
  ModelFactory models(spec, b);

  const auto learned = *std::find_if(spec.detectors.begin(), spec.detectors.end(), [](const DetectorToken& d) {
    return d.kind == DetectorKind::Dl || d.kind == DetectorKind::DlCsi;
  });
  const bool csi = learned.kind == DetectorKind::DlCsi;

  std::vector<double> grid = sw.grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<Evaluator> evals;
  std::vector<double> evaluated;
  std::vector<std::shared_ptr<const NeuralDetector>> nets;
  // The reference always sees the true channel.
  evals.push_back(model_based(spec, DetectorToken{"map", DetectorKind::Map, false}, noise, engine));
  for (double g : grid) {
    const int width = sw.axis == SweepAxis::Width ? static_cast<int>(g) : spec.network.width;
    const std::size_t size = sw.axis == SweepAxis::SampleSize ? static_cast<std::size_t>(g) : spec.train_size;
    const std::string suffix = "_" + axis + format_double(g);
    try {
      auto det = models.mlp(csi, sw.snr_db, width, size, suffix);
      evals.push_back(mlp_evaluator(learned.name, det, learned.imperfect_csi, engine));
      nets.push_back(det);
      evaluated.push_back(g);
    } catch (const NumericalError& e) {
      b.failures.push_back(learned.name + " at " + axis + " " + format_double(g) + ": " + e.what());
    }
  }
  const auto points = evaluate_point(spec, source, noise, snr_key(sw.snr_db), evals);

  BerCurve map_curve{"map", axis, {}}, dl_curve{learned.name, axis, {}};
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    BerPoint m = points[0];
    m.axis_value = evaluated[i];
    m.snr_db = sw.snr_db;
    map_curve.points.push_back(m);
    BerPoint p = points[i + 1];
    p.axis_value = evaluated[i];
    p.snr_db = sw.snr_db;
    dl_curve.points.push_back(p);
    b.log.push_back(learned.name + " at " + axis + " " + format_double(evaluated[i]) + ": ber " +
                    format_double(p.ber) + " (" + std::to_string(p.errors) + "/" + std::to_string(p.bits) +
                    " bits, stopped by " + stop_reason(p) + ")");
  }
  b.log.push_back("map reference: ber " + format_double(points[0].ber) + " (" + std::to_string(points[0].errors) +
                  "/" + std::to_string(points[0].bits) + " bits, stopped by " + stop_reason(points[0]) + ")");
  b.curves.push_back(std::move(map_curve));
  b.curves.push_back(std::move(dl_curve));

  // Exact-over-u KL against the true posterior; needs the receiver-side
  // conditioning of the oracle to match the network's, which holds with CSI
  // input or a frozen channel.
  if (sw.kl_inputs > 0 && (csi || sc.regime == Regime::TimeInvariant)) {
    Rng rng = make_rng(spec.seed, "kl", snr_key(sw.snr_db));
    const Dataset test = draw_samples(spec, source, DatasetKind::ZCsi, sw.kl_inputs, noise, rng);
    const ObservationModel model = sc.observation_model();
    std::vector<Vec> oracle;
    oracle.reserve(test.size());
    for (std::size_t k = 0; k < test.size(); ++k) {
      const auto t = engine->posterior(sc.effective_channel(test.h[k]), test.x[k], noise, model);
      oracle.push_back(Eigen::Map<const Vec>(t.probabilities.data(), static_cast<Index>(t.size())));
    }
    for (std::size_t i = 0; i < nets.size(); ++i) {
      const auto& det = *nets[i];
      const auto est = empirical_kl([&](std::size_t k) { return oracle[k]; },
                                    [&](std::size_t k) {
                                      return det.probabilities(test.x[k], csi ? &test.h[k] : nullptr);
                                    },
                                    test.size());
      b.kl.push_back({learned.name, axis, evaluated[i], sw.snr_db, est.value, est.std_error});
    }
  }
  return b;
}

// ---------------------------------------------------------------- output

std::string results_csv(const ResultsBundle& b) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& c : b.curves)
    for (const auto& p : c.points)
      out << b.experiment << ',' << c.detector << ',' << c.axis_name << ',' << format_double(p.axis_value) << ','
          << format_double(p.snr_db) << ',' << format_double(p.ber) << ',' << p.bits << ',' << p.errors << ','
          << format_double(p.ci) << ',' << b.seed << '\n';
  return out.str();
}

namespace {

std::string file_token(std::string s) {
  for (char& ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
  return s;
}

}  // namespace

void save_results(const ResultsBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  ensure_directory(dir);
  write_text_file((fs::path(dir) / "results.csv").string(), results_csv(b));
  ensure_directory((fs::path(dir) / "curves").string());
  for (const auto& c : b.curves) {
    std::ostringstream dat;
    dat << "# " << c.axis_name << " ber\n";
    for (const auto& p : c.points) dat << format_double(p.axis_value) << ' ' << format_double(p.ber) << '\n';
    const std::string name = file_token(b.experiment + "_" + c.detector + "_" + c.axis_name) + ".dat";
    write_text_file((fs::path(dir) / "curves" / name).string(), dat.str());
  }
  if (!b.kl.empty()) {
    std::ostringstream kl;
    kl << "experiment,detector,axis_name,axis_value,snr_db,kl,kl_std_error,seed\n";
    for (const auto& k : b.kl)
      kl << b.experiment << ',' << k.detector << ',' << k.axis_name << ',' << format_double(k.axis_value) << ','
         << format_double(k.snr_db) << ',' << format_double(k.kl) << ',' << format_double(k.kl_se) << ','
         << b.seed << '\n';
    write_text_file((fs::path(dir) / "kl.csv").string(), kl.str());
  }
  std::ostringstream log;
  for (const auto& l : b.log) log << l << '\n';
  for (const auto& f : b.failures) log << "failure: " << f << '\n';
  write_text_file((fs::path(dir) / "log.txt").string(), log.str());
  if (!b.snapshots.empty()) ensure_directory((fs::path(dir) / "models").string());
  for (const auto& s : b.snapshots) write_text_file((fs::path(dir) / s.file).string(), s.json);
}

std::string bounds_report(const ExperimentSpec& spec) {
  spec.validate();
  const auto& sc = spec.scenario;
  const auto c = sc.constellation();
  const bool csi = std::any_of(spec.detectors.begin(), spec.detectors.end(),
                               [](const DetectorToken& d) { return d.kind == DetectorKind::DlCsi; });
  const auto shape =
      NetworkShape::detector(sc.dr, sc.dt, c.size(), spec.network.hidden_layers, spec.network.width, csi);
  TheoryBoundInputs in = TheoryBoundInputs::from_shape(shape, spec.network.training.bound);
  const double snr = spec.sweep ? spec.sweep->snr_db : spec.snr_db.front();
  Rng rng = make_rng(spec.seed, "moments", snr_key(snr));
  const Dataset d = generate_dataset(spec, csi ? DatasetKind::ZCsi : DatasetKind::Z, spec.bounds.moment_samples,
                                     snr, rng);
  std::vector<double> norms;
  norms.reserve(d.size());
  for (std::size_t k = 0; k < d.size(); ++k)
    norms.push_back(detector_input(d.x[k], csi ? &d.h[k] : nullptr).norm());
  estimate_input_moments(in, norms);
  in.delta = spec.bounds.delta.value_or(spec.bounds.delta_factor * std::sqrt(in.mu));
  if (!(in.delta * in.delta > in.mu)) throw ConfigError("bounds.delta must satisfy delta^2 > E||x||^2");

  json j;
  j["experiment"] = spec.name;
  j["snr_db"] = snr;
  j["csi_input"] = csi;
  j["shape"] = shape.widths();
  j["R"] = in.R;
  j["max_width"] = in.max_width;
  j["depth"] = in.depth;
  j["parameter_count"] = in.parameter_count;
  j["alpha"] = in.alpha();
  j["beta"] = in.beta();
  j["mu"] = in.mu;
  j["sigma_sq"] = in.sigma_sq;
  j["nu"] = in.nu;
  j["delta"] = in.delta;
  j["delta1"] = in.delta1();
  j["delta2"] = in.delta2();
  json cover = json::array(), tail = json::array(), mdl = json::array();
  for (double eps : spec.bounds.epsilons) {
    cover.push_back({{"epsilon", eps}, {"ln_covering_bound", covering_bound(in, eps)}});
    for (double n : spec.bounds.sample_sizes) {
      const auto t = generalization_tail_bound(in, n, eps);
      tail.push_back({{"epsilon", eps},
                      {"samples", n},
                      {"raw", t.raw},
                      {"clipped", t.clipped},
                      {"preconditions_met", t.preconditions_met},
                      {"min_samples_nu", t.min_samples_nu},
                      {"min_samples_cover", t.min_samples_cover}});
      if (spec.bounds.ln_cu)
        mdl.push_back({{"epsilon", eps},
                       {"samples", n},
                       {"bound", modeldriven_tail_bound(*spec.bounds.ln_cu, n, eps, spec.bounds.delta_u,
                                                        spec.bounds.p_omega)}});
    }
  }
  j["covering"] = cover;
  j["generalization_tail"] = tail;
  if (spec.bounds.ln_cu) j["modeldriven_tail"] = mdl;
  return j.dump(2) + "\n";
}

std::string summarize_results(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("results file has an unexpected header");
  struct Row {
    std::string experiment, detector, axis;
    double value = 0, snr = 0, ber = 0, ci = 0;
    std::size_t bits = 0, errors = 0;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw IoError("malformed results row: " + line);
    try {
      rows.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[8]),
                      std::stoull(f[6]), std::stoull(f[7])});
    } catch (const std::exception&) {
      throw IoError("malformed results row: " + line);
    }
  }
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %-18s %-12s %10s %8s %12s %12s %10s\n", "experiment", "detector", "axis",
                "value", "snr_db", "ber", "ci", "vs_map");
  out << buf;
  for (const auto& r : rows) {
    std::string ratio = "-";
    for (const auto& m : rows)
      if (m.experiment == r.experiment && m.detector == "map" && m.axis == r.axis && m.value == r.value &&
          m.snr == r.snr && m.ber > 0) {
        std::snprintf(buf, sizeof buf, "%.3f", r.ber / m.ber);
        ratio = buf;
      }
    std::snprintf(buf, sizeof buf, "%-16s %-18s %-12s %10s %8s %12.4e %12.4e %10s\n", r.experiment.c_str(),
                  r.detector.c_str(), r.axis.c_str(), format_double(r.value).c_str(), format_double(r.snr).c_str(),
                  r.ber, r.ci, ratio.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace mimodet
