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

#include "mpkm/fixedpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mpkm/kernel_machine.hpp"

namespace mpkm::fx {

namespace {

// Energy accumulator carries this many bits beyond the datapath; the kernel
// tap keeps the upper datapath-width bits, i.e. shifts right by this amount.
constexpr int kAccumulatorExtraBits = 10;

inline int ceil_log2(std::size_t m) {
  return m <= 1 ? 0 : std::bit_width(m - 1);
}

inline raw_t width_max(int bits) { return (raw_t{1} << (bits - 1)) - 1; }
inline raw_t width_min(int bits) { return -(raw_t{1} << (bits - 1)); }

inline void note_width(FxContext& ctx, raw_t v) {
  const std::uint64_t mag =
      v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1
            : static_cast<std::uint64_t>(v);
  const int bits = std::bit_width(mag) + 1;  // sign bit
  auto& w = ctx.trace.max_width_bits[static_cast<int>(ctx.stage)];
  if (bits > w) w = bits;
}

// Register-boundary clamp; saturation is a mux, not an arithmetic op, so it
// only bumps the saturation counter.
inline raw_t clamp_width(FxContext& ctx, raw_t v, int bits) {
  if (bits >= 63) {
    note_width(ctx, v);
    return v;
  }
  const raw_t hi = width_max(bits), lo = width_min(bits);
  if (v > hi || v < lo) {
    ++ctx.trace.saturations;
    v = ctx.wrap
            ? static_cast<raw_t>(static_cast<std::int64_t>(
                  static_cast<std::uint64_t>(v) << (64 - bits)) >>
                  (64 - bits))
            : (v > hi ? hi : lo);
  }
  note_width(ctx, v);
  return v;
}

inline raw_t fx_abs(FxContext& ctx, raw_t v, int width_bits) {
  ++ctx.trace.compares;
  if (v >= 0) return v;
  ++ctx.trace.subs;
  return clamp_width(ctx, -v, width_bits);
}

struct Residual {
  raw_t err = 0;
  std::size_t support = 0;
};

Residual residual_at(FxContext& ctx, std::span<const raw_t> values, raw_t z,
                     raw_t gamma, int acc_bits) {
  Residual r;
  r.err = 0;
  for (raw_t v : values) {
    const raw_t d = fx_sub(ctx, v, z, acc_bits);
    if (fx_gt(ctx, d, 0)) {
      r.err = fx_add(ctx, r.err, d, acc_bits);
      ++r.support;
    }
  }
  r.err = fx_sub(ctx, r.err, gamma, acc_bits);
  return r;
}

}  // namespace

double FixedPointFormat::lsb() const { return std::ldexp(1.0, -frac_bits); }

void validate(const FixedPointFormat& fmt) {
  if (fmt.word_bits < 2 || fmt.word_bits > 32)
    throw std::invalid_argument("fixed point: word_bits out of [2,32]");
  if (fmt.frac_bits < 0 || fmt.frac_bits >= fmt.word_bits)
    throw std::invalid_argument("fixed point: frac_bits out of [0,word)");
}

QuantInfo make_quant_info(int storage_bits) {
  QuantInfo q;
  q.storage.word_bits = storage_bits;
  q.storage.frac_bits = std::max(storage_bits - 4, 0);  // range +-8
  q.datapath.word_bits = std::min(storage_bits + 2, 32);
  q.datapath.frac_bits = q.storage.frac_bits;
  validate(q.storage);
  validate(q.datapath);
  return q;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kLowPass: return "low_pass";
    case Stage::kBandPass: return "band_pass";
    case Stage::kAccumulate: return "accumulate";
    case Stage::kStandardize: return "standardize";
    case Stage::kClassifier: return "classifier";
  }
  return "?";
}

void OpTrace::merge(const OpTrace& other) {
  adds += other.adds;
  subs += other.subs;
  compares += other.compares;
  shifts += other.shifts;
  multiplies += other.multiplies;
  saturations += other.saturations;
  for (int i = 0; i < kNumStages; ++i)
    max_width_bits[i] = std::max(max_width_bits[i], other.max_width_bits[i]);
}

std::string OpTrace::csv() const {
  std::ostringstream os;
  os << "counter,value\n"
     << "add," << adds << "\nsub," << subs << "\ncompare," << compares
     << "\nshift," << shifts << "\nmultiply," << multiplies << "\nsaturation,"
     << saturations << "\n";
  for (int i = 0; i < kNumStages; ++i)
    os << "max_width_" << stage_name(static_cast<Stage>(i)) << ","
       << max_width_bits[i] << "\n";
  return os.str();
}

std::string OpTrace::table() const {
  std::ostringstream os;
  os << "op counts: add=" << adds << " sub=" << subs
     << " compare=" << compares << " shift=" << shifts
     << " multiply=" << multiplies << " saturation=" << saturations << "\n"
     << "max register width (bits):";
  for (int i = 0; i < kNumStages; ++i)
    os << ' ' << stage_name(static_cast<Stage>(i)) << '='
       << max_width_bits[i];
  os << "\n";
  return os.str();
}

raw_t quantize(double v, const FixedPointFormat& fmt, bool* saturated) {
  const double scaled = std::round(std::ldexp(v, fmt.frac_bits));
  bool sat = false;
  raw_t raw;
  if (scaled >= static_cast<double>(fmt.max_raw())) {
    raw = fmt.max_raw();
    sat = scaled > static_cast<double>(fmt.max_raw());
  } else if (scaled <= static_cast<double>(fmt.min_raw())) {
    raw = fmt.min_raw();
    sat = scaled < static_cast<double>(fmt.min_raw());
  } else {
    raw = static_cast<raw_t>(scaled);
  }
  if (saturated) *saturated = sat;
  return raw;
}

double to_double(raw_t raw, const FixedPointFormat& fmt) {
  return std::ldexp(static_cast<double>(raw), -fmt.frac_bits);
}

raw_t fx_add(FxContext& ctx, raw_t a, raw_t b, int width_bits) {
  ++ctx.trace.adds;
  return clamp_width(ctx, a + b, width_bits);
}

raw_t fx_sub(FxContext& ctx, raw_t a, raw_t b, int width_bits) {
  ++ctx.trace.subs;
  return clamp_width(ctx, a - b, width_bits);
}

bool fx_gt(FxContext& ctx, raw_t a, raw_t b) {
  ++ctx.trace.compares;
  return a > b;
}

raw_t fx_shift(FxContext& ctx, raw_t v, int s, int width_bits) {
  ++ctx.trace.shifts;
  raw_t r;
  if (s > 0) {
    if (s >= 63) return clamp_width(ctx, v < 0 ? -1 : 0, width_bits);
    ++ctx.trace.adds;  // round-half-up bias
    r = (v + (raw_t{1} << (s - 1))) >> s;
  } else if (s < 0) {
    r = v << std::min(-s, 62);
  } else {
    r = v;
  }
  return clamp_width(ctx, r, width_bits);
}

raw_t fx_shift_trunc(FxContext& ctx, raw_t v, int s, int width_bits) {
  ++ctx.trace.shifts;
  const raw_t r = s >= 63 ? (v < 0 ? -1 : 0) : (v >> s);
  return clamp_width(ctx, r, width_bits);
}

raw_t fx_mp(FxContext& ctx, std::span<const raw_t> values, raw_t gamma,
            int iters) {
  if (values.empty()) throw std::invalid_argument("fx_mp: empty value set");
  if (gamma < 0) throw std::invalid_argument("fx_mp: negative gamma");
  const std::size_t n = values.size();
  const int acc_bits = ctx.fmt.word_bits + ceil_log2(n) + 2;

  raw_t vmax = values[0];
  for (std::size_t i = 1; i < n; ++i)
    if (fx_gt(ctx, values[i], vmax)) vmax = values[i];
  if (gamma == 0) return vmax;

  raw_t z = fx_sub(ctx, vmax, fx_shift(ctx, gamma, ceil_log2(n), acc_bits),
                   acc_bits);
  Residual cur = residual_at(ctx, values, z, gamma, acc_bits);
  int deepen = 0;
  for (int t = 0; t < iters; ++t) {
    const int shift =
        ceil_log2(std::max<std::size_t>(cur.support, 1)) + deepen;
    const raw_t z_next =
        fx_add(ctx, z, fx_shift(ctx, cur.err, shift, acc_bits), acc_bits);
    const Residual next = residual_at(ctx, values, z_next, gamma, acc_bits);
    const raw_t next_mag = fx_abs(ctx, next.err, acc_bits);
    const raw_t cur_mag = fx_abs(ctx, cur.err, acc_bits);
    if (!fx_gt(ctx, next_mag, cur_mag)) {
      z = z_next;
      cur = next;
      deepen = 0;
    } else {
      ++deepen;
    }
  }
  return z;
}

ShiftAddApprox approx_shift_add(double c, int terms) {
  ShiftAddApprox a;
  double rem = c;
  for (int t = 0; t < terms && rem != 0.0; ++t) {
    const double mag = std::fabs(rem);
    // nearest signed power of two to the remainder
    int e = static_cast<int>(std::floor(std::log2(mag)));
    if (std::ldexp(1.0, e + 1) - mag < mag - std::ldexp(1.0, e)) ++e;
    if (e > 40 || e < -40) break;
    const int sign = rem > 0.0 ? 1 : -1;
    a.terms.emplace_back(-e, sign);  // store as right-shift amount
    rem -= sign * std::ldexp(1.0, e);
  }
  return a;
}

double ShiftAddApprox::value() const {
  double v = 0.0;
  for (const auto& [shift, sign] : terms)
    v += sign * std::ldexp(1.0, -shift);
  return v;
}

int mp_layer_output_bits(int in_bits, int fanin) {
  return in_bits + 1 + ceil_log2(static_cast<std::size_t>(fanin));
}

int mac_layer_output_bits(int in_bits, int fanin) {
  return 2 * in_bits + ceil_log2(static_cast<std::size_t>(fanin));
}

int mp_network_output_bits(int in_bits, int fanin, int layers) {
  int w = in_bits;
  for (int l = 0; l < layers; ++l) w = mp_layer_output_bits(w, fanin);
  return w;
}

int mac_network_output_bits(int in_bits, int fanin, int layers) {
  int w = in_bits;
  for (int l = 0; l < layers; ++l) w = mac_layer_output_bits(w, fanin);
  return w;
}

AuditReport audit(const OpTrace& trace) {
  AuditReport r;
  r.pass = trace.multiplies == 0;
  std::ostringstream os;
  os << trace.table();
  os << "multiplierless audit: "
     << (r.pass ? "PASS (multiply count = 0)"
                : "FAIL (multiply count = " + std::to_string(trace.multiplies) +
                      ")")
     << "\n";
  r.text = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Fixed pipeline
// ---------------------------------------------------------------------------

namespace {

struct FixedTables {
  FixedPointFormat dp;
  int acc_bits;
  std::vector<std::vector<raw_t>> bp;  // reversed taps, datapath scale
  std::vector<std::vector<raw_t>> lp;
  std::vector<raw_t> w_plus, w_minus;
  raw_t b_plus = 0, b_minus = 0;
  raw_t gamma1 = 0, gamma_f = 0, gamma_n = 0;
  std::vector<raw_t> mu_tap;
  std::vector<ShiftAddApprox> std_scale;  // applied to (tap - mu_tap)
};

FixedTables build_tables(const km::TrainedModel& model) {
  if (!model.quant)
    throw std::logic_error("fixed_pipeline: model is not quantized");
  FixedTables t;
  t.dp = model.quant->datapath;
  validate(t.dp);
  t.acc_bits = t.dp.word_bits + kAccumulatorExtraBits;

  auto qv = [&](double v) { return quantize(v, t.dp); };
  const auto& bank = model.bank;
  t.bp.resize(bank.bp_coeffs.size());
  for (std::size_t p = 0; p < bank.bp_coeffs.size(); ++p) {
    const auto& taps = bank.bp_coeffs[p];
    t.bp[p].resize(taps.size());
    for (std::size_t k = 0; k < taps.size(); ++k)
      t.bp[p][k] = qv(taps[taps.size() - 1 - k]);
  }
  t.lp.resize(bank.lp_coeffs.size());
  for (std::size_t s = 0; s < bank.lp_coeffs.size(); ++s) {
    const auto& taps = bank.lp_coeffs[s];
    t.lp[s].resize(taps.size());
    for (std::size_t k = 0; k < taps.size(); ++k)
      t.lp[s][k] = qv(taps[taps.size() - 1 - k]);
  }
  t.w_plus.resize(model.w_plus.size());
  t.w_minus.resize(model.w_minus.size());
  for (std::size_t i = 0; i < model.w_plus.size(); ++i) {
    t.w_plus[i] = qv(model.w_plus[i]);
    t.w_minus[i] = qv(model.w_minus[i]);
  }
  t.b_plus = qv(model.b_plus);
  t.b_minus = qv(model.b_minus);
  t.gamma1 = std::max<raw_t>(qv(model.gamma1), 1);
  t.gamma_f = std::max<raw_t>(qv(model.gamma_f), 1);
  t.gamma_n = std::max<raw_t>(qv(model.gamma_n), 1);

  const int p_total = bank.config.total_filters;
  t.mu_tap.resize(p_total);
  t.std_scale.resize(p_total);
  for (int p = 0; p < p_total; ++p) {
    // mean at the tapped-accumulator scale: mu * 2^frac >> extra bits
    t.mu_tap[p] = static_cast<raw_t>(std::llround(
        std::ldexp(model.stats.mu[p],
                   t.dp.frac_bits - kAccumulatorExtraBits)));
    const double sigma = std::max(model.stats.sigma[p], 1e-6);
    // (tap - mu_tap) carries frac - extra bits; rescaling by
    // 2^extra / sigma lands phi on the datapath grid.
    t.std_scale[p] = approx_shift_add(
        std::ldexp(1.0, kAccumulatorExtraBits) / sigma, 3);
  }
  return t;
}

// MP-domain FIR at fixed point; emits every `stride`-th output sample.
std::vector<raw_t> fir_mp_fixed(FxContext& ctx, std::span<const raw_t> x,
                                std::span<const raw_t> taps_rev, raw_t gamma_f,
                                int stride, const FixedTables& t) {
  const std::size_t n = x.size();
  const std::size_t m = taps_rev.size();
  std::vector<raw_t> rails(2 * m);
  std::vector<raw_t> out;
  out.reserve(n / stride + 1);
  const int w = t.dp.word_bits;
  for (std::size_t i = 0; i < n; i += stride) {
    raw_t z[2];
    for (int term = 0; term < 2; ++term) {
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t src = i + 1 + j;  // x index + m
        const raw_t xj = src >= m && src - m <= i ? x[src - m] : 0;
        const raw_t rail = term == 0 ? fx_add(ctx, taps_rev[j], xj, w + 1)
                                     : fx_sub(ctx, taps_rev[j], xj, w + 1);
        rails[j] = rail;
        rails[m + j] = fx_sub(ctx, 0, rail, w + 1);
      }
      z[term] = fx_mp(ctx, rails, gamma_f);
    }
    out.push_back(fx_sub(ctx, z[0], z[1], w));
  }
  return out;
}

}  // namespace

km::Decision fixed_pipeline(std::span<const double> audio,
                            const km::TrainedModel& model, FxContext& ctx) {
  const FixedTables t = build_tables(model);
  ctx.fmt = t.dp;
  const auto& bank = model.bank;
  const int num_octaves = bank.config.num_octaves;
  const int p_total = bank.config.total_filters;
  const int w = t.dp.word_bits;

  std::vector<raw_t> input(audio.size());
  for (std::size_t i = 0; i < audio.size(); ++i)
    input[i] = quantize(audio[i], t.dp);

  // Decimation chain: MP low-pass evaluated at the kept samples only.
  std::vector<std::vector<raw_t>> streams(num_octaves);
  streams[0] = std::move(input);
  ctx.stage = Stage::kLowPass;
  for (int o = 1; o < num_octaves; ++o)
    streams[o] =
        fir_mp_fixed(ctx, streams[o - 1], t.lp[o - 1], t.gamma_f, 2, t);

  // Band channels: MP band-pass, rectify, accumulate, tap upper bits.
  std::vector<raw_t> phi(p_total);
  for (int p = 0; p < p_total; ++p) {
    ctx.stage = Stage::kBandPass;
    const std::vector<raw_t> y = fir_mp_fixed(
        ctx, streams[bank.octave_of[p]], t.bp[p], t.gamma_f, 1, t);
    ctx.stage = Stage::kAccumulate;
    raw_t acc = 0;
    for (raw_t v : y)
      if (fx_gt(ctx, v, 0)) acc = fx_add(ctx, acc, v, t.acc_bits);
    const raw_t tap = fx_shift_trunc(ctx, acc, kAccumulatorExtraBits, w);

    ctx.stage = Stage::kStandardize;
    const raw_t centered = fx_sub(ctx, tap, t.mu_tap[p], w + 2);
    raw_t scaled = 0;
    for (const auto& [shift, sign] : t.std_scale[p].terms) {
      const raw_t term = fx_shift(ctx, centered, shift, w + 2);
      scaled = sign > 0 ? fx_add(ctx, scaled, term, w + 2)
                        : fx_sub(ctx, scaled, term, w + 2);
    }
    phi[p] = clamp_width(ctx, scaled, w);
  }

  // MP classifier readout.
  ctx.stage = Stage::kClassifier;
  std::vector<raw_t> args(2 * p_total + 1);
  raw_t z_pm[2];
  for (int term = 0; term < 2; ++term) {
    const double sign = term == 0 ? 1.0 : -1.0;
    for (int i = 0; i < p_total; ++i) {
      const raw_t k_plus = phi[i];
      const raw_t k_minus = fx_sub(ctx, 0, phi[i], w + 1);
      args[i] = fx_add(ctx, t.w_plus[i], sign > 0 ? k_plus : k_minus, w + 1);
      args[p_total + i] =
          fx_add(ctx, t.w_minus[i], sign > 0 ? k_minus : k_plus, w + 1);
    }
    args[2 * p_total] = term == 0 ? t.b_plus : t.b_minus;
    z_pm[term] = fx_mp(ctx, args, t.gamma1);
  }
  const raw_t zs[2] = {z_pm[0], z_pm[1]};
  const raw_t z = fx_mp(ctx, zs, t.gamma_n);
  const raw_t d_plus = fx_sub(ctx, z_pm[0], z, w + 2);
  const raw_t d_minus = fx_sub(ctx, z_pm[1], z, w + 2);
  const raw_t p_plus = fx_gt(ctx, d_plus, 0) ? d_plus : 0;
  const raw_t p_minus = fx_gt(ctx, d_minus, 0) ? d_minus : 0;
  const raw_t p = fx_sub(ctx, p_plus, p_minus, w + 2);

  km::Decision d;
  d.p = to_double(p, t.dp);
  d.p_plus = to_double(p_plus, t.dp);
  d.p_minus = to_double(p_minus, t.dp);
  d.positive = p > 0;
  return d;
}

}  // namespace mpkm::fx
