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

#include "mpkm/filterbank.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mpkm/kernels.hpp"
#include "mpkm/margin.hpp"

namespace mpkm::fb {

namespace {

constexpr double kSigmaFloor = 1e-6;

double greenwood_freq(const GreenwoodParams& g, double u) {
  return g.scale * (std::pow(10.0, g.slope * u) - g.offset);
}

double greenwood_place(const GreenwoodParams& g, double f) {
  return std::log10(f / g.scale + g.offset) / g.slope;
}

double sinc(double t) {
  if (t == 0.0) return 1.0;
  const double pt = std::numbers::pi * t;
  return std::sin(pt) / pt;
}

// Hamming windowed-sinc low-pass prototype; only the first half is computed
// and mirrored so the taps are symmetric to the last bit.
std::vector<double> windowed_sinc_lp(int taps, double cutoff, double rate) {
  const double fn = cutoff / rate;
  const double center = 0.5 * static_cast<double>(taps - 1);
  std::vector<double> h(taps);
  for (int i = 0; i < (taps + 1) / 2; ++i) {
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i /
                                            static_cast<double>(taps - 1));
    const double v = 2.0 * fn * sinc(2.0 * fn * (i - center)) * w;
    h[i] = v;
    h[taps - 1 - i] = v;
  }
  return h;
}

std::vector<double> design_bandpass(int taps, double f_low, double f_high,
                                    double center, double rate) {
  std::vector<double> h = windowed_sinc_lp(taps, f_high, rate);
  const std::vector<double> lo = windowed_sinc_lp(taps, f_low, rate);
  for (int i = 0; i < taps; ++i) h[i] -= lo[i];
  const double gain = magnitude_response(h, center, rate);
  if (gain <= 0.0) throw std::domain_error("bandpass design has zero gain");
  for (double& v : h) v /= gain;
  return h;
}

std::vector<double> design_antialias_lp(int taps, double pre_decimation_rate) {
  std::vector<double> h =
      windowed_sinc_lp(taps, pre_decimation_rate / 4.0, pre_decimation_rate);
  double sum = 0.0;
  for (double v : h) sum += v;
  for (double& v : h) v /= sum;  // unity DC gain
  return h;
}

void validate_config(const FilterBankConfig& c) {
  if (c.total_filters != c.filters_per_octave * c.num_octaves)
    throw std::invalid_argument(
        "filterbank: total_filters != filters_per_octave * num_octaves");
  if (c.total_filters <= 0 || c.bp_taps < 2 || c.lp_taps < 2)
    throw std::invalid_argument("filterbank: non-positive sizes");
  if (c.freq_low <= 0.0 || c.freq_high <= c.freq_low)
    throw std::invalid_argument("filterbank: bad frequency range");
  if (c.freq_high >= c.base_sample_rate / 2.0)
    throw std::invalid_argument("filterbank: freq_high at or above Nyquist");
}

}  // namespace

FilterBankModel design_bank(const FilterBankConfig& config) {
  validate_config(config);
  const int p_total = config.total_filters;
  const int per_oct = config.filters_per_octave;

  FilterBankModel bank;
  bank.config = config;
  bank.center_freqs.resize(p_total);
  bank.octave_of.resize(p_total);
  bank.band_low.resize(p_total);
  bank.band_high.resize(p_total);

  // Centers at Greenwood places sampled at equally spaced cell midpoints,
  // stored in descending frequency order so octave 0 holds the highest band.
  const double u_low = greenwood_place(config.greenwood, config.freq_low);
  const double u_high = greenwood_place(config.greenwood, config.freq_high);
  const double du = (u_high - u_low) / static_cast<double>(p_total);
  for (int i = 0; i < p_total; ++i) {
    const double u = u_low + (static_cast<double>(p_total - 1 - i) + 0.5) * du;
    bank.center_freqs[i] = greenwood_freq(config.greenwood, u);
    bank.octave_of[i] = i / per_oct;
  }

  // Band edges equally spaced within each octave group.
  for (int o = 0; o < config.num_octaves; ++o) {
    const double top = bank.center_freqs[o * per_oct];
    const double bottom = bank.center_freqs[(o + 1) * per_oct - 1];
    const double width =
        per_oct > 1 ? (top - bottom) / static_cast<double>(per_oct - 1)
                    : 0.5 * top;
    for (int j = 0; j < per_oct; ++j) {
      const int p = o * per_oct + j;
      bank.band_low[p] = std::max(bank.center_freqs[p] - 0.5 * width, 1.0);
      bank.band_high[p] = bank.center_freqs[p] + 0.5 * width;
    }
  }

  bank.bp_coeffs.resize(p_total);
  for (int p = 0; p < p_total; ++p) {
    const double rate = bank.octave_rate(bank.octave_of[p]);
    if (bank.band_high[p] >= rate / 2.0)
      throw std::domain_error(
          "filterbank: filter " + std::to_string(p) + " cutoff " +
          std::to_string(bank.band_high[p]) + " Hz is above Nyquist " +
          std::to_string(rate / 2.0) + " Hz at its octave rate");
    bank.bp_coeffs[p] = design_bandpass(config.bp_taps, bank.band_low[p],
                                        bank.band_high[p],
                                        bank.center_freqs[p], rate);
  }

  bank.lp_coeffs.resize(config.num_octaves - 1);
  for (int s = 0; s + 1 < config.num_octaves; ++s) {
    bank.lp_coeffs[s] =
        design_antialias_lp(config.lp_taps, bank.octave_rate(s));
  }
  return bank;
}

std::vector<double> fir_exact(std::span<const double> x,
                              std::span<const double> taps) {
  if (taps.empty()) throw std::invalid_argument("fir_exact: empty taps");
  const std::size_t n = x.size();
  const std::size_t m = taps.size();
  std::vector<double> rev(taps.rbegin(), taps.rend());
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 >= m) {
      y[i] = kernels::dot(rev.data(), x.data() + (i + 1 - m), m);
    } else {
      double acc = 0.0;  // zero-padded history
      for (std::size_t k = 0; k <= i; ++k) acc += taps[k] * x[i - k];
      y[i] = acc;
    }
  }
  return y;
}

std::vector<double> fir_mp(std::span<const double> x,
                           std::span<const double> taps, double gamma_f) {
  if (taps.empty()) throw std::invalid_argument("fir_mp: empty taps");
  if (gamma_f <= 0.0)
    throw std::invalid_argument("fir_mp: gamma_f must be positive");
  const std::size_t n = x.size();
  const std::size_t m = taps.size();
  std::vector<double> rev(taps.rbegin(), taps.rend());
  std::vector<double> window(m, 0.0);
  std::vector<double> scratch(m);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* win;
    if (i + 1 >= m) {
      win = x.data() + (i + 1 - m);
    } else {
      std::fill(window.begin(), window.end() - (i + 1), 0.0);
      for (std::size_t k = 0; k <= i; ++k) window[m - 1 - k] = x[i - k];
      win = window.data();
    }
    y[i] = mp::mp_inner_product_mirrored(rev.data(), win, m, gamma_f,
                                         scratch.data());
  }
  return y;
}

std::vector<double> decimate(std::span<const double> x,
                             std::span<const double> lp_taps, FilterMode mode,
                             double gamma_f) {
  const std::vector<double> filtered = mode == FilterMode::kExact
                                           ? fir_exact(x, lp_taps)
                                           : fir_mp(x, lp_taps, gamma_f);
  std::vector<double> out((filtered.size() + 1) / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = filtered[2 * i];
  return out;
}

double accumulate(std::span<const double> d) {
  double acc = 0.0;
  for (double v : d) acc += v;
  return acc;
}

StandardizationStats fit_standardization(
    const std::vector<std::vector<double>>& rows) {
  const std::size_t m = rows.size();
  if (m < 2)
    throw std::invalid_argument(
        "fit_standardization: need at least 2 training rows");
  const std::size_t p = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != p)
      throw std::invalid_argument("fit_standardization: ragged rows");

  StandardizationStats stats;
  stats.mu.assign(p, 0.0);
  stats.sigma.assign(p, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < p; ++j) stats.mu[j] += r[j];
  for (double& v : stats.mu) v /= static_cast<double>(m);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < p; ++j) {
      const double d = r[j] - stats.mu[j];
      stats.sigma[j] += d * d;
    }
  for (double& v : stats.sigma)
    v = std::sqrt(v / static_cast<double>(m - 1));
  return stats;
}

std::vector<double> band_energies(std::span<const double> x,
                                  const FilterBankModel& bank, FilterMode mode,
                                  double gamma_f) {
  const int num_octaves = bank.config.num_octaves;
  std::vector<std::vector<double>> streams(num_octaves);
  streams[0].assign(x.begin(), x.end());
  for (int o = 1; o < num_octaves; ++o)
    streams[o] = decimate(streams[o - 1], bank.lp_coeffs[o - 1], mode, gamma_f);

  std::vector<double> s(bank.config.total_filters);
  for (int p = 0; p < bank.config.total_filters; ++p) {
    const auto& stream = streams[bank.octave_of[p]];
    const std::vector<double> out =
        mode == FilterMode::kExact
            ? fir_exact(stream, bank.bp_coeffs[p])
            : fir_mp(stream, bank.bp_coeffs[p], gamma_f);
    s[p] = kernels::hwr_sum(out.data(), out.size());
  }
  return s;
}

KernelVector extract_kernel(std::span<const double> x,
                            const FilterBankModel& bank,
                            const StandardizationStats& stats, FilterMode mode,
                            double gamma_f) {
  if (!stats.fitted())
    throw std::logic_error("extract_kernel: standardization stats not fitted");
  if (stats.mu.size() != static_cast<std::size_t>(bank.config.total_filters))
    throw std::invalid_argument("extract_kernel: stats/bank size mismatch");
  const std::vector<double> s = band_energies(x, bank, mode, gamma_f);
  KernelVector kv;
  kv.phi.resize(s.size());
  for (std::size_t p = 0; p < s.size(); ++p) {
    const double sigma =
        stats.sigma[p] > kSigmaFloor ? stats.sigma[p] : kSigmaFloor;
    kv.phi[p] = (s[p] - stats.mu[p]) / sigma;
  }
  return kv;
}

double magnitude_response(std::span<const double> taps, double freq,
                          double rate) {
  const double omega = 2.0 * std::numbers::pi * freq / rate;
  double re = 0.0, im = 0.0;
  for (std::size_t k = 0; k < taps.size(); ++k) {
    re += taps[k] * std::cos(omega * static_cast<double>(k));
    im -= taps[k] * std::sin(omega * static_cast<double>(k));
  }
  return std::hypot(re, im);
}

}  // namespace mpkm::fb
