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

#ifndef MPKM_FILTERBANK_HPP_
#define MPKM_FILTERBANK_HPP_

#include <span>
#include <vector>

// Octave-decimated FIR band-pass bank. Filters are grouped into octaves of
// descending center frequency; each octave runs at half the previous
// octave's sample rate, fed through a short anti-aliasing low-pass, so a
// single low filter order serves every band. Center frequencies follow the
// Greenwood cochlear place-frequency map. Each band channel rectifies and
// accumulates its output and standardizes it against training statistics,
// which makes the bank double as the kernel function of the classifier.

namespace mpkm::fb {

struct GreenwoodParams {
  double scale = 165.4;   // A in f(u) = A * (10^(a u) - k)
  double slope = 2.1;     // a
  double offset = 0.88;   // k
};

struct FilterBankConfig {
  int total_filters = 30;
  int filters_per_octave = 5;
  int num_octaves = 6;
  int bp_taps = 16;
  int lp_taps = 6;
  double base_sample_rate = 16000.0;
  GreenwoodParams greenwood;
  double freq_low = 50.0;
  double freq_high = 6500.0;
};

struct FilterBankModel {
  FilterBankConfig config;
  std::vector<std::vector<double>> bp_coeffs;  // per filter, symmetric
  std::vector<std::vector<double>> lp_coeffs;  // per decimation stage, DC = 1
  std::vector<double> center_freqs;            // Hz, strictly descending
  std::vector<double> band_low;                // passband edges, Hz
  std::vector<double> band_high;
  std::vector<int> octave_of;

  double octave_rate(int octave) const {
    return config.base_sample_rate / static_cast<double>(1 << octave);
  }
};

// Per-filter mean and Bessel-corrected standard deviation of the accumulated
// band energies, fit on the training split only.
struct StandardizationStats {
  std::vector<double> mu;
  std::vector<double> sigma;
  bool fitted() const { return !mu.empty(); }
};

// The standardized band-energy vector; doubles as the classifier kernel.
struct KernelVector {
  std::vector<double> phi;
};

enum class FilterMode { kExact, kMp };

// Places Greenwood centers, spaces band edges evenly within each octave, and
// designs Hamming windowed-sinc band-pass taps at each octave's decimated
// rate plus one anti-aliasing low-pass per decimation stage. Throws
// std::invalid_argument on config violations and std::domain_error (naming
// the filter index) when a band edge lands above its octave's Nyquist.
FilterBankModel design_bank(const FilterBankConfig& config);

// y(n) = sum_k h(k) x(n-k) with zero-padded history; |y| == |x|.
std::vector<double> fir_exact(std::span<const double> x,
                              std::span<const double> taps);

// Same filtering with each inner product replaced by its MP approximation
// over the differential rails of taps and input window.
std::vector<double> fir_mp(std::span<const double> x,
                           std::span<const double> taps, double gamma_f);

// Anti-alias low-pass (exact or MP) followed by keep-every-second-sample.
std::vector<double> decimate(std::span<const double> x,
                             std::span<const double> lp_taps, FilterMode mode,
                             double gamma_f);

inline double hwr(double q) { return q > 0.0 ? q : 0.0; }

// Plain sum; accumulation stays exact even in MP mode since addition is a
// permitted primitive.
double accumulate(std::span<const double> d);

// rows: one accumulated-energy vector per training clip. Requires >= 2 rows.
StandardizationStats fit_standardization(
    const std::vector<std::vector<double>>& rows);

// Runs the decimation chain once and every band channel on top of it,
// returning the un-standardized accumulated energies s_p.
std::vector<double> band_energies(std::span<const double> x,
                                  const FilterBankModel& bank, FilterMode mode,
                                  double gamma_f);

// band_energies + standardization. Throws std::logic_error on unfitted stats.
KernelVector extract_kernel(std::span<const double> x,
                            const FilterBankModel& bank,
                            const StandardizationStats& stats, FilterMode mode,
                            double gamma_f);

// |H(f)| of a tap vector at the given rate; analysis helper.
double magnitude_response(std::span<const double> taps, double freq,
                          double rate);

}  // namespace mpkm::fb

#endif  // MPKM_FILTERBANK_HPP_
