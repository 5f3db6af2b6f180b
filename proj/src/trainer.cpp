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

#include "mpkm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "mpkm/margin.hpp"

namespace mpkm::train {

namespace {

void parallel_for(std::size_t n, int num_threads,
                  const std::function<void(std::size_t)>& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  unsigned workers = num_threads > 0 ? static_cast<unsigned>(num_threads)
                                     : (hw > 0 ? hw : 1);
  workers = std::min<unsigned>(workers, n > 0 ? static_cast<unsigned>(n) : 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

double gamma_at_epoch(const std::vector<std::pair<int, double>>& schedule,
                      int epoch) {
  double g = schedule.front().second;
  for (const auto& [e, v] : schedule) {
    if (e <= epoch) g = v;
  }
  return g;
}

void validate_schedule(const std::vector<std::pair<int, double>>& schedule) {
  double prev = std::numeric_limits<double>::infinity();
  int prev_epoch = -1;
  for (const auto& [e, v] : schedule) {
    if (v <= 0.0)
      throw std::invalid_argument("gamma1 schedule: non-positive value");
    if (v > prev)
      throw std::invalid_argument("gamma1 schedule: values must not increase");
    if (e <= prev_epoch)
      throw std::invalid_argument("gamma1 schedule: epochs must increase");
    prev = v;
    prev_epoch = e;
  }
}

std::vector<double> snap_to_grid(const std::vector<double>& v,
                                 const fx::FixedPointFormat& fmt) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = fx::to_double(fx::quantize(v[i], fmt), fmt);
  return out;
}

// Same word length, fraction bits chosen so the tensor's range fits.
fx::FixedPointFormat ranged_format(const std::vector<double>& v,
                                   int word_bits) {
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::fabs(x));
  int frac = word_bits - 1;
  while (frac > 0 &&
         std::round(std::ldexp(peak, frac)) >
             static_cast<double>((std::int64_t{1} << (word_bits - 1)) - 1))
    --frac;
  return {word_bits, frac};
}

}  // namespace

std::size_t LabeledDataset::count(int label, bool test) const {
  std::size_t c = 0;
  for (const auto& clip : clips)
    if (clip.label == label && clip.is_test == test) ++c;
  return c;
}

std::size_t LabeledDataset::train_size() const {
  return count(+1, false) + count(-1, false);
}

std::size_t LabeledDataset::test_size() const {
  return count(+1, true) + count(-1, true);
}

std::vector<std::pair<int, double>> geometric_gamma_schedule(int epochs,
                                                             double start,
                                                             double end,
                                                             int knots) {
  knots = std::max(2, std::min(knots, epochs));
  std::vector<std::pair<int, double>> s;
  for (int k = 0; k < knots; ++k) {
    const double frac = static_cast<double>(k) / (knots - 1);
    const int epoch = static_cast<int>(
        std::lround(frac * std::max(epochs - 1, 1)));
    s.emplace_back(epoch, start * std::pow(end / start, frac));
  }
  return s;
}

std::vector<std::vector<double>> all_band_energies(
    const LabeledDataset& dataset, const fb::FilterBankModel& bank,
    fb::FilterMode mode, double gamma_f, int num_threads) {
  const std::size_t n = dataset.clips.size();
  std::vector<std::vector<double>> energies(n);
  parallel_for(n, num_threads, [&](std::size_t i) {
    energies[i] =
        fb::band_energies(dataset.clips[i].samples, bank, mode, gamma_f);
  });
  return energies;
}

std::vector<std::vector<double>> standardize_rows(
    const std::vector<std::vector<double>>& energies,
    const fb::StandardizationStats& stats) {
  std::vector<std::vector<double>> phi(energies.size());
  for (std::size_t i = 0; i < energies.size(); ++i) {
    phi[i].resize(energies[i].size());
    for (std::size_t p = 0; p < energies[i].size(); ++p) {
      const double sigma = std::max(stats.sigma[p], 1e-6);
      phi[i][p] = (energies[i][p] - stats.mu[p]) / sigma;
    }
  }
  return phi;
}

FeatureSet extract_features(const LabeledDataset& dataset,
                            const fb::FilterBankModel& bank,
                            fb::FilterMode mode, double gamma_f,
                            int num_threads) {
  const std::vector<std::vector<double>> energies =
      all_band_energies(dataset, bank, mode, gamma_f, num_threads);

  std::vector<std::vector<double>> train_rows;
  for (std::size_t i = 0; i < energies.size(); ++i)
    if (!dataset.clips[i].is_test) train_rows.push_back(energies[i]);
  if (train_rows.size() < 2)
    throw std::invalid_argument("extract_features: training split too small");

  FeatureSet fs;
  fs.stats = fb::fit_standardization(train_rows);
  fs.phi = standardize_rows(energies, fs.stats);
  return fs;
}

SampleGrad sample_gradient(const std::vector<double>& phi, int label,
                           const std::vector<double>& w_plus,
                           const std::vector<double>& w_minus, double b_plus,
                           double b_minus, double gamma1, double temperature) {
  const std::size_t p = phi.size();
  std::vector<double> args_plus(2 * p + 1), args_minus(2 * p + 1);
  for (std::size_t i = 0; i < p; ++i) {
    args_plus[i] = w_plus[i] + phi[i];
    args_plus[p + i] = w_minus[i] - phi[i];
    args_minus[i] = w_plus[i] - phi[i];
    args_minus[p + i] = w_minus[i] + phi[i];
  }
  args_plus[2 * p] = b_plus;
  args_minus[2 * p] = b_minus;

  const double z_plus = mp::mp_exact(args_plus, gamma1);
  const double z_minus = mp::mp_exact(args_minus, gamma1);
  const double zs[2] = {z_plus, z_minus};
  const double z = mp::mp_exact(zs, 1.0);

  SampleGrad g;
  const double p_plus = fb::hwr(z_plus - z);
  const double p_minus = fb::hwr(z_minus - z);
  g.p = p_plus - p_minus;

  const double y = static_cast<double>(label);
  const double margin = -y * g.p / temperature;
  // log(1 + e^m) and its sigmoid, overflow-safe
  g.loss = margin > 30.0 ? margin : std::log1p(std::exp(margin));
  const double sig =
      margin > 0 ? 1.0 / (1.0 + std::exp(-margin))
                 : std::exp(margin) / (1.0 + std::exp(margin));
  const double dl_dp = -y * sig / temperature;

  // p as a function of the two scores through the normalizing water level
  const mp::MpGradient gz = mp::mp_gradient(zs, 1.0);
  const double in_plus = z_plus > z ? 1.0 : 0.0;
  const double in_minus = z_minus > z ? 1.0 : 0.0;
  const double dp_dzp = in_plus * (1.0 - gz.partials[0]) +
                        in_minus * gz.partials[0];
  const double dp_dzm = -in_minus * (1.0 - gz.partials[1]) -
                        in_plus * gz.partials[1];

  const mp::MpGradient ga = mp::mp_gradient(args_plus, gamma1);
  const mp::MpGradient gb = mp::mp_gradient(args_minus, gamma1);

  g.d_w_plus.assign(p, 0.0);
  g.d_w_minus.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    g.d_w_plus[i] =
        dl_dp * (dp_dzp * ga.partials[i] + dp_dzm * gb.partials[i]);
    g.d_w_minus[i] =
        dl_dp * (dp_dzp * ga.partials[p + i] + dp_dzm * gb.partials[p + i]);
  }
  g.d_b_plus = dl_dp * dp_dzp * ga.partials[2 * p];
  g.d_b_minus = dl_dp * dp_dzm * gb.partials[2 * p];
  return g;
}

FitResult fit_weights(const std::vector<std::vector<double>>& phi,
                      const std::vector<int>& labels, const TrainConfig& cfg,
                      std::ostream* log_csv) {
  if (phi.empty()) throw std::invalid_argument("fit_weights: empty dataset");
  if (phi.size() != labels.size())
    throw std::invalid_argument("fit_weights: feature/label size mismatch");
  if (cfg.epochs < 1) throw std::invalid_argument("fit_weights: epochs < 1");
  const std::size_t p = phi.front().size();
  const std::size_t n = phi.size();

  std::vector<std::pair<int, double>> schedule =
      cfg.gamma1_schedule.empty() ? geometric_gamma_schedule(cfg.epochs)
                                  : cfg.gamma1_schedule;
  validate_schedule(schedule);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> init(-cfg.init_scale, cfg.init_scale);
  FitResult r;
  r.w_plus.resize(p);
  r.w_minus.resize(p);
  for (auto& v : r.w_plus) v = init(rng);
  for (auto& v : r.w_minus) v = init(rng);
  r.b_plus = init(rng);
  r.b_minus = init(rng);

  std::vector<double> vel_wp(p, 0.0), vel_wm(p, 0.0);
  double vel_bp = 0.0, vel_bm = 0.0;

  const fx::FixedPointFormat grid{cfg.bits, std::max(cfg.bits - 4, 0)};
  auto forward_weights = [&](const std::vector<double>& w) {
    return cfg.quant_aware ? snap_to_grid(w, grid) : w;
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::max(1, cfg.batch_size);

  if (log_csv) *log_csv << "epoch,loss,train_acc,gamma1\n";
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double gamma1 = gamma_at_epoch(schedule, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(batch)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(batch));
      std::vector<double> gwp(p, 0.0), gwm(p, 0.0);
      double gbp = 0.0, gbm = 0.0;
      const std::vector<double> fwp = forward_weights(r.w_plus);
      const std::vector<double> fwm = forward_weights(r.w_minus);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        const SampleGrad g =
            sample_gradient(phi[i], labels[i], fwp, fwm, r.b_plus, r.b_minus,
                            gamma1, cfg.temperature);
        epoch_loss += g.loss;
        if ((g.p > 0.0 ? +1 : -1) == labels[i]) ++correct;
        for (std::size_t j = 0; j < p; ++j) {
          gwp[j] += g.d_w_plus[j];
          gwm[j] += g.d_w_minus[j];
        }
        gbp += g.d_b_plus;
        gbm += g.d_b_minus;
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t j = 0; j < p; ++j) {
        vel_wp[j] = cfg.momentum * vel_wp[j] - cfg.learning_rate * gwp[j] * scale;
        vel_wm[j] = cfg.momentum * vel_wm[j] - cfg.learning_rate * gwm[j] * scale;
        r.w_plus[j] += vel_wp[j];
        r.w_minus[j] += vel_wm[j];
      }
      vel_bp = cfg.momentum * vel_bp - cfg.learning_rate * gbp * scale;
      vel_bm = cfg.momentum * vel_bm - cfg.learning_rate * gbm * scale;
      r.b_plus += vel_bp;
      r.b_minus += vel_bm;
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("fit_weights: loss diverged at epoch " +
                               std::to_string(epoch));
    r.final_loss = epoch_loss;
    r.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    r.gamma1 = gamma1;
    if (log_csv)
      *log_csv << epoch << ',' << epoch_loss << ',' << r.train_accuracy << ','
               << gamma1 << "\n";
  }
  if (cfg.quant_aware) {
    r.w_plus = snap_to_grid(r.w_plus, grid);
    r.w_minus = snap_to_grid(r.w_minus, grid);
  }
  return r;
}

km::TrainedModel train(const LabeledDataset& dataset,
                       const fb::FilterBankModel& bank, const TrainConfig& cfg,
                       std::ostream* log_csv) {
  if (dataset.count(+1, false) == 0 || dataset.count(-1, false) == 0)
    throw std::invalid_argument("train: empty class in training split");

  const FeatureSet fs = extract_features(dataset, bank, cfg.feature_mode,
                                         cfg.gamma_f, cfg.num_threads);
  std::vector<std::vector<double>> train_phi;
  std::vector<int> train_labels;
  for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
    if (!dataset.clips[i].is_test) {
      train_phi.push_back(fs.phi[i]);
      train_labels.push_back(dataset.clips[i].label);
    }
  }
  const FitResult fit = fit_weights(train_phi, train_labels, cfg, log_csv);

  km::TrainedModel model;
  model.bank = bank;
  model.stats = fs.stats;
  model.w_plus = fit.w_plus;
  model.w_minus = fit.w_minus;
  model.b_plus = fit.b_plus;
  model.b_minus = fit.b_minus;
  model.gamma1 = fit.gamma1;
  model.gamma_n = 1.0;
  model.gamma_f = cfg.gamma_f;
  return model;
}

km::TrainedModel quantize_model(const km::TrainedModel& model,
                                const fx::FixedPointFormat& fmt) {
  fx::validate(fmt);
  km::TrainedModel q = model;
  const auto snap_scalar = [](double v, const fx::FixedPointFormat& f) {
    return fx::to_double(fx::quantize(v, f), f);
  };

  q.w_plus = snap_to_grid(model.w_plus, fmt);
  q.w_minus = snap_to_grid(model.w_minus, fmt);
  q.b_plus = snap_scalar(model.b_plus, fmt);
  q.b_minus = snap_scalar(model.b_minus, fmt);
  q.gamma1 = snap_scalar(model.gamma1, fmt);
  if (q.gamma1 <= 0.0) q.gamma1 = fmt.lsb();
  q.gamma_f = snap_scalar(model.gamma_f, fmt);
  if (q.gamma_f <= 0.0) q.gamma_f = fmt.lsb();

  for (auto& taps : q.bank.bp_coeffs) taps = snap_to_grid(taps, fmt);
  for (auto& taps : q.bank.lp_coeffs) taps = snap_to_grid(taps, fmt);

  // Stats live on the accumulated-energy scale; keep the word length but
  // place the binary point per tensor so the range fits.
  const fx::FixedPointFormat mu_fmt =
      ranged_format(model.stats.mu, fmt.word_bits);
  const fx::FixedPointFormat sg_fmt =
      ranged_format(model.stats.sigma, fmt.word_bits);
  q.stats.mu = snap_to_grid(model.stats.mu, mu_fmt);
  q.stats.sigma = snap_to_grid(model.stats.sigma, sg_fmt);

  q.quant = fx::make_quant_info(fmt.word_bits);
  q.quant->storage = fmt;
  return q;
}

double accuracy_on_features(const km::TrainedModel& model,
                            const std::vector<std::vector<double>>& phi,
                            const std::vector<int>& labels) {
  if (phi.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    fb::KernelVector kv{phi[i]};
    const auto [zp, zm] = km::score(kv, model);
    const km::Decision d = km::decide(zp, zm, model.gamma_n);
    if ((d.positive ? +1 : -1) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(phi.size());
}

std::vector<SweepRow> bitwidth_sweep(const LabeledDataset& dataset,
                                     const fb::FilterBankModel& bank,
                                     const TrainConfig& cfg,
                                     const std::vector<int>& widths,
                                     std::ostream* csv) {
  const km::TrainedModel base = train(dataset, bank, cfg);

  std::vector<SweepRow> rows;
  if (csv) *csv << "width,train_acc,test_acc\n";
  for (int w : widths) {
    const fx::FixedPointFormat fmt{w, std::max(w - 4, 0)};
    const km::TrainedModel q = quantize_model(base, fmt);
    // Re-extract with the quantized coefficients and standardize with the
    // model's quantized stats so rounding shows up in the features too.
    const std::vector<std::vector<double>> energies = all_band_energies(
        dataset, q.bank, cfg.feature_mode, q.gamma_f, cfg.num_threads);
    const std::vector<std::vector<double>> phi =
        standardize_rows(energies, q.stats);

    std::vector<std::vector<double>> phi_train, phi_test;
    std::vector<int> labels_train, labels_test;
    for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
      if (dataset.clips[i].is_test) {
        phi_test.push_back(phi[i]);
        labels_test.push_back(dataset.clips[i].label);
      } else {
        phi_train.push_back(phi[i]);
        labels_train.push_back(dataset.clips[i].label);
      }
    }
    SweepRow row;
    row.width = w;
    row.train_accuracy = accuracy_on_features(q, phi_train, labels_train);
    row.test_accuracy = accuracy_on_features(q, phi_test, labels_test);
    rows.push_back(row);
    if (csv)
      *csv << w << ',' << row.train_accuracy << ',' << row.test_accuracy
           << "\n";
  }
  return rows;
}

}  // namespace mpkm::train
