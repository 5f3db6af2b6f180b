// Copyright 2026 The MPKM Authors. All Rights Reserved.
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

#ifndef MPKM_TRAINER_HPP_
#define MPKM_TRAINER_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mpkm/filterbank.hpp"
#include "mpkm/kernel_machine.hpp"

// Training for the MP kernel machine: gradients flow through the water
// filling operator (uniform weight over the support set), the margin
// gamma1 is annealed downward over epochs, and features are extracted with
// the same MP filtering used at inference so the classifier learns against
// the approximation error rather than an idealized bank. Quantization-aware
// mode runs the forward pass on grid-snapped weights with straight-through
// gradients.

namespace mpkm::train {

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 150;
  int batch_size = 16;
  // (epoch, gamma1) knots; value holds from its epoch until the next knot.
  // Empty selects the default geometric 2.0 -> 0.5 anneal.
  std::vector<std::pair<int, double>> gamma1_schedule;
  double gamma_f = 8.0;
  std::uint64_t seed = 1;
  bool quant_aware = false;
  int bits = 8;
  double momentum = 0.9;
  double temperature = 0.25;  // logistic loss on p / T
  double init_scale = 0.1;
  fb::FilterMode feature_mode = fb::FilterMode::kMp;
  int num_threads = 0;  // 0 = hardware concurrency
};

struct LabeledClip {
  std::vector<double> samples;
  int label = -1;  // +1 positive class, -1 rest
  bool is_test = false;
  std::string id;
};

struct LabeledDataset {
  std::vector<LabeledClip> clips;

  std::size_t count(int label, bool test) const;
  std::size_t train_size() const;
  std::size_t test_size() const;
};

std::vector<std::pair<int, double>> geometric_gamma_schedule(
    int epochs, double start = 2.0, double end = 0.5, int knots = 8);

// Raw accumulated band energies for every clip (threaded, deterministic
// order) and standardization against given stats.
std::vector<std::vector<double>> all_band_energies(
    const LabeledDataset& dataset, const fb::FilterBankModel& bank,
    fb::FilterMode mode, double gamma_f, int num_threads = 0);
std::vector<std::vector<double>> standardize_rows(
    const std::vector<std::vector<double>>& energies,
    const fb::StandardizationStats& stats);

// Band energies for every clip, stats fit on the training rows only, and
// standardized features for all clips.
struct FeatureSet {
  std::vector<std::vector<double>> phi;  // aligned with dataset.clips
  fb::StandardizationStats stats;
};
FeatureSet extract_features(const LabeledDataset& dataset,
                            const fb::FilterBankModel& bank,
                            fb::FilterMode mode, double gamma_f,
                            int num_threads = 0);

// Readout parameters fit by SGD with momentum on features alone; the piece
// train() delegates to and what synthetic-feature tests drive directly.
struct FitResult {
  std::vector<double> w_plus, w_minus;
  double b_plus = 0.0, b_minus = 0.0;
  double gamma1 = 0.0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};
FitResult fit_weights(const std::vector<std::vector<double>>& phi,
                      const std::vector<int>& labels, const TrainConfig& cfg,
                      std::ostream* log_csv = nullptr);

// Loss and gradient of one sample; exposed for finite-difference checks.
struct SampleGrad {
  double loss = 0.0;
  double p = 0.0;
  std::vector<double> d_w_plus, d_w_minus;
  double d_b_plus = 0.0, d_b_minus = 0.0;
};
SampleGrad sample_gradient(const std::vector<double>& phi, int label,
                           const std::vector<double>& w_plus,
                           const std::vector<double>& w_minus, double b_plus,
                           double b_minus, double gamma1, double temperature);

km::TrainedModel train(const LabeledDataset& dataset,
                       const fb::FilterBankModel& bank, const TrainConfig& cfg,
                       std::ostream* log_csv = nullptr);

// Rounds weights, biases, stats and filter coefficients to the format grid
// (stats use per-tensor fraction placement so large energies stay in range),
// tags the model, and leaves everything else untouched. Out-of-range values
// saturate; the return-by-value model carries the snapped fields.
km::TrainedModel quantize_model(const km::TrainedModel& model,
                                const fx::FixedPointFormat& fmt);

// Accuracy of the float MP readout over precomputed features.
double accuracy_on_features(const km::TrainedModel& model,
                            const std::vector<std::vector<double>>& phi,
                            const std::vector<int>& labels);

struct SweepRow {
  int width = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};
// Trains at the config seed, then quantizes and re-evaluates the full float
// pipeline (quantized coefficients and stats included) per width.
std::vector<SweepRow> bitwidth_sweep(const LabeledDataset& dataset,
                                     const fb::FilterBankModel& bank,
                                     const TrainConfig& cfg,
                                     const std::vector<int>& widths,
                                     std::ostream* csv = nullptr);

}  // namespace mpkm::train

#endif  // MPKM_TRAINER_HPP_
