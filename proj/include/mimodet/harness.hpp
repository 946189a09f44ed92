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

// Experiment harness: scenario description, dataset generation, imperfect
// CSI, the paired seeded Monte-Carlo runner, sweeps and result persistence.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mimodet/channels.hpp"
#include "mimodet/classical.hpp"
#include "mimodet/common.hpp"
#include "mimodet/metrics.hpp"
#include "mimodet/neural.hpp"
#include "mimodet/signal_model.hpp"
#include "mimodet/unfolded.hpp"

namespace mimodet {

enum class ObservationKind { Linear, Quantized, TxNonlinear };
enum class TxNonlinearity { Tanh, Clip };

/// Physical model shared by training and test streams.
struct Scenario {
  Regime regime = Regime::TimeVarying;
  ObservationKind observation = ObservationKind::Linear;
  int quantizer_bits = 3;
  TxNonlinearity tx_kind = TxNonlinearity::Tanh;
  double tx_param = 1.0;  // tanh gain or clip level
  ChannelModel channel = ChannelModel::Gaussian;
  double rho = 0.5;
  Modulation modulation = Modulation::Qpsk;
  int dr = 2;
  int dt = 2;

  RealConstellation constellation() const { return make_constellation(modulation); }
  ChannelSource make_source(std::uint64_t channel_seed) const;
  ObservationModel observation_model() const;
  double tx_map(double v) const;
  /// Channel as seen by an exhaustive detector that knows the model. For
  /// the odd transmit maps on a symmetric two-point alphabet this is the
  /// channel scaled by f(a)/a.
  Mat effective_channel(const Mat& h) const;
  Vec transmit(const ChannelRealization& ch, const Vec& s, const NoiseSpec& noise, Rng& rng) const;
};

struct ImperfectCsiSpec {
  double sigma_e = 0.1;
};

/// H + E with E i.i.d. N(0, sigma_e^2) per real entry.
Mat perturb_csi(const Mat& h, const ImperfectCsiSpec& spec, Rng& rng);

enum class CsiMode { None, Perfect, Imperfect };

enum class DetectorKind { Map, Zf, Amp, Sic, SicNet, Dl, DlCsi };

struct DetectorToken {
  std::string name;  // as written in the config, e.g. "map:imperfect"
  DetectorKind kind = DetectorKind::Map;
  bool imperfect_csi = false;

  bool learned() const noexcept;
  bool uses_csi() const noexcept { return kind != DetectorKind::Dl; }
};

/// Parses "map", "zf", "amp", "sic", "sicnet", "dl", "dl-csi", optionally
/// suffixed with ":perfect" or ":imperfect". The default CSI quality comes
/// from `mode`.
DetectorToken parse_detector(const std::string& token, CsiMode mode);

struct NetworkSpec {
  int hidden_layers = 4;
  int width = 100;
  TrainingConfig training;  // bound, batch, step, iterations, optimizer
};

struct UnfoldedSpec {
  int layers = 5;
  std::size_t train_size = 5000;
  UnfoldedTrainingConfig training;
};

struct TestSpec {
  std::size_t min_vectors = 10000;
  std::size_t max_vectors = 2000000;
  std::size_t min_errors = 100;
  std::size_t block_size = 1000;
  int threads = 1;
};

enum class SweepAxis { Width, SampleSize };

struct SweepSpec {
  SweepAxis axis = SweepAxis::Width;
  std::vector<double> grid;
  double snr_db = 8.0;
  /// Test inputs used for the exact-over-u KL estimate of each grid model.
  std::size_t kl_inputs = 5000;
};

struct BoundsSpec {
  std::vector<double> epsilons{0.1};
  std::vector<double> sample_sizes{1e3, 1e4, 1e5, 4e5};
  std::optional<double> delta;  // defaults to delta_factor * sqrt(mu)
  double delta_factor = 2.0;
  std::size_t moment_samples = 10000;
  std::optional<double> ln_cu;  // enables the model-driven bound
  double delta_u = 1.0;
  double p_omega = 0.0;
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> channel_seed;
  Scenario scenario;
  std::vector<double> snr_db;
  std::vector<DetectorToken> detectors;
  CsiMode csi = CsiMode::Perfect;
  ImperfectCsiSpec imperfect;
  std::size_t train_size = 200000;
  TestSpec test;
  NetworkSpec network;
  UnfoldedSpec unfolded;
  int amp_iterations = 10;
  int sic_iterations = 5;
  std::optional<SweepSpec> sweep;
  BoundsSpec bounds;
  std::string model_dir;  // load snapshots from here instead of training

  std::uint64_t frozen_channel_seed() const;
  void validate() const;
};

ExperimentSpec parse_experiment(const std::string& json_text);
ExperimentSpec load_experiment(const std::string& path);
/// Canonical JSON rendering; parse_experiment(to_json(s)) reproduces s.
std::string experiment_to_json(const ExperimentSpec& spec);

enum class DatasetKind { Z, ZCsi, Omega };

struct Dataset {
  DatasetKind kind = DatasetKind::Z;
  std::vector<Vec> x;
  std::vector<Mat> h;  // empty for Z
  std::vector<Vec> s;
  std::vector<std::size_t> labels;  // 1-based one-hot indices

  std::size_t size() const noexcept { return x.size(); }
  /// Network inputs (with or without CSI) and class labels.
  LabeledSet labeled() const;
  std::vector<UnfoldedSample> unfolded() const;
};

/// i.i.d. samples at one SNR. Samples are drawn sequentially, so a smaller
/// size from the same rng state is a prefix of a larger one.
Dataset generate_dataset(const ExperimentSpec& spec, DatasetKind kind, std::size_t size,
                         double snr_db, Rng& rng);

NoiseSpec noise_at(const ExperimentSpec& spec, const ChannelSource& source, double snr_db);

struct BerPoint {
  double axis_value = 0.0;
  double snr_db = 0.0;
  double ber = 0.0;
  std::size_t bits = 0;
  std::size_t errors = 0;
  std::size_t vectors = 0;
  double ci = 0.0;
  bool capped = false;  // stopped by the trial cap before min_errors
};

struct BerCurve {
  std::string detector;
  std::string axis_name;  // "snr_db", "width" or "sample_size"
  std::vector<BerPoint> points;
};

struct KlPoint {
  std::string detector;
  std::string axis_name;
  double axis_value = 0.0;
  double snr_db = 0.0;
  double kl = 0.0;
  double kl_se = 0.0;
};

struct Snapshot {
  std::string file;  // path relative to the output directory
  std::string json;
};

struct ResultsBundle {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<BerCurve> curves;
  std::vector<KlPoint> kl;
  std::vector<Snapshot> snapshots;
  std::vector<std::string> log;
  std::vector<std::string> failures;

  const BerCurve* curve(const std::string& detector) const;
};

/// Trains (or loads) the learned detectors for every SNR point and returns
/// their snapshots without evaluating.
ResultsBundle train_experiment(const ExperimentSpec& spec);
/// Full SNR-axis experiment on a paired test stream.
ResultsBundle run_experiment(const ExperimentSpec& spec);
/// One model per grid point of spec.sweep, all evaluated on one paired
/// test stream together with the MAP reference.
ResultsBundle sweep(const ExperimentSpec& spec);

inline constexpr const char* kCsvHeader =
    "experiment,detector,axis_name,axis_value,snr_db,ber,bit_count,error_count,ci_halfwidth,seed";

std::string results_csv(const ResultsBundle& b);
/// Writes results.csv, curves/*.dat, kl.csv (if any), log.txt and models/.
void save_results(const ResultsBundle& b, const std::string& dir);

/// JSON document with covering and tail bound values for the configured network.
std::string bounds_report(const ExperimentSpec& spec);
/// Plain-text summary of a results.csv with ratios to the MAP curve.
std::string summarize_results(const std::string& csv_text);

}  // namespace mimodet
