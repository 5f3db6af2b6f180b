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

#ifndef MPKM_KERNEL_MACHINE_HPP_
#define MPKM_KERNEL_MACHINE_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpkm/filterbank.hpp"
#include "mpkm/fixedpoint.hpp"

// MP-domain kernel machine readout. The standardized band-energy vector Phi
// enters as differential rails (K+ = Phi, K- = -Phi); the class scores are
// MP reductions over the weight-plus-kernel rail sums, and the decision is
// the rectified difference of the scores against their shared water level.

namespace mpkm::km {

struct TrainedModel {
  fb::FilterBankModel bank;
  fb::StandardizationStats stats;
  std::vector<double> w_plus;
  std::vector<double> w_minus;
  double b_plus = 0.0;
  double b_minus = 0.0;
  double gamma1 = 1.0;
  double gamma_n = 1.0;  // normalization margin, fixed at 1
  double gamma_f = 8.0;  // filtering margin
  std::optional<fx::QuantInfo> quant;

  int num_filters() const { return bank.config.total_filters; }
};

struct Decision {
  double p = 0.0;
  double p_plus = 0.0;
  double p_minus = 0.0;
  bool positive = false;  // tie p == 0 resolves to negative
};

enum class InferMode { kExact, kMp, kFixed };

// z+ = MP([w+ + K+, w- + K-, b+], gamma1) and the rail-crossed z-. The
// multiset order is fixed (w+ block, w- block, bias) so fixed-point
// evaluation is reproducible.
std::pair<double, double> score(const fb::KernelVector& phi,
                                const TrainedModel& model);

// z = MP([z+, z-], gamma_n); p+- are the rectified excesses over z. With two
// inputs the water-filling constraint makes p+ + p- equal gamma_n exactly.
Decision decide(double z_plus, double z_minus, double gamma_n = 1.0);

// extract_kernel -> score -> decide; kFixed routes through the fixed-point
// engine instead.
Decision infer(std::span<const double> audio, const TrainedModel& model,
               InferMode mode);

// w'Phi + b with exact multiply-accumulate. Test oracle only; never part of
// the multiplierless path.
double linear_reference(const fb::KernelVector& phi, std::span<const double> w,
                        double b);

// One CSV row: clip id, p, p+, p-, label.
std::string decision_csv_row(const std::string& id, const Decision& d);
inline const char* kDecisionCsvHeader = "clip_id,p,p_plus,p_minus,label";

}  // namespace mpkm::km

#endif  // MPKM_KERNEL_MACHINE_HPP_
