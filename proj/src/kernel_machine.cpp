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

#include "mpkm/kernel_machine.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mpkm/margin.hpp"

namespace mpkm::km {

namespace {

// [w+ + K+, w- + K-, bias] with K+ = phi, K- = -phi; `sign` flips the kernel
// rails for the crossed score.
void assemble_score_args(const TrainedModel& model,
                         std::span<const double> phi, double sign, double bias,
                         std::vector<double>& out) {
  const std::size_t p = phi.size();
  out.resize(2 * p + 1);
  for (std::size_t i = 0; i < p; ++i) out[i] = model.w_plus[i] + sign * phi[i];
  for (std::size_t i = 0; i < p; ++i)
    out[p + i] = model.w_minus[i] - sign * phi[i];
  out[2 * p] = bias;
}

}  // namespace

std::pair<double, double> score(const fb::KernelVector& phi,
                                const TrainedModel& model) {
  const std::size_t p = phi.phi.size();
  if (model.w_plus.size() != p || model.w_minus.size() != p)
    throw std::invalid_argument("score: weight/kernel dimension mismatch");
  std::vector<double> args;
  assemble_score_args(model, phi.phi, +1.0, model.b_plus, args);
  const double z_plus = mp::mp_exact_inplace(args, model.gamma1);
  assemble_score_args(model, phi.phi, -1.0, model.b_minus, args);
  const double z_minus = mp::mp_exact_inplace(args, model.gamma1);
  return {z_plus, z_minus};
}

Decision decide(double z_plus, double z_minus, double gamma_n) {
  const double zs[2] = {z_plus, z_minus};
  const double z = mp::mp_exact(zs, gamma_n);
  Decision d;
  d.p_plus = fb::hwr(z_plus - z);
  d.p_minus = fb::hwr(z_minus - z);
  d.p = d.p_plus - d.p_minus;
  d.positive = d.p > 0.0;
  return d;
}

Decision infer(std::span<const double> audio, const TrainedModel& model,
               InferMode mode) {
  if (mode == InferMode::kFixed) {
    fx::FxContext ctx;
    if (!model.quant)
      throw std::logic_error("infer: fixed mode requires a quantized model");
    ctx.fmt = model.quant->datapath;
    return fx::fixed_pipeline(audio, model, ctx);
  }
  const fb::FilterMode fmode = mode == InferMode::kExact
                                   ? fb::FilterMode::kExact
                                   : fb::FilterMode::kMp;
  const fb::KernelVector phi =
      fb::extract_kernel(audio, model.bank, model.stats, fmode, model.gamma_f);
  const auto [z_plus, z_minus] = score(phi, model);
  return decide(z_plus, z_minus, model.gamma_n);
}

double linear_reference(const fb::KernelVector& phi, std::span<const double> w,
                        double b) {
  if (phi.phi.size() != w.size())
    throw std::invalid_argument("linear_reference: dimension mismatch");
  double acc = b;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * phi.phi[i];
  return acc;
}

std::string decision_csv_row(const std::string& id, const Decision& d) {
  std::ostringstream os;
  os.precision(17);
  os << id << ',' << d.p << ',' << d.p_plus << ',' << d.p_minus << ','
     << (d.positive ? "positive" : "negative");
  return os.str();
}

}  // namespace mpkm::km
