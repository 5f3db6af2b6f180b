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

#ifndef MPKM_FIXEDPOINT_HPP_
#define MPKM_FIXEDPOINT_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

// Bit-exact fixed-point model of the multiplierless datapath. Every
// arithmetic step goes through the traced primitives below (add, subtract,
// compare, shift); an OpTrace accumulates operation counts and the widest
// value seen per pipeline stage, and the audit asserts that no multiply is
// ever issued on the fixed inference path.

namespace mpkm::km {
struct TrainedModel;
struct Decision;
}  // namespace mpkm::km

namespace mpkm::fx {

using raw_t = std::int64_t;  // raw register value; width is format-governed

struct FixedPointFormat {
  int word_bits = 10;
  int frac_bits = 4;
  // signed two's complement always

  double lsb() const;
  raw_t max_raw() const { return (raw_t{1} << (word_bits - 1)) - 1; }
  raw_t min_raw() const { return -(raw_t{1} << (word_bits - 1)); }
};

void validate(const FixedPointFormat& fmt);  // 2..32 word, 0 <= frac < word

// Storage format for model parameters plus the wider datapath derived from
// it (two guard bits, capped at 32).
struct QuantInfo {
  FixedPointFormat storage;
  FixedPointFormat datapath;
};
QuantInfo make_quant_info(int storage_bits);

enum class Stage : int {
  kLowPass = 0,
  kBandPass,
  kAccumulate,
  kStandardize,
  kClassifier,
};
inline constexpr int kNumStages = 5;
const char* stage_name(Stage s);

struct OpTrace {
  std::uint64_t adds = 0;
  std::uint64_t subs = 0;
  std::uint64_t compares = 0;
  std::uint64_t shifts = 0;
  std::uint64_t multiplies = 0;
  std::uint64_t saturations = 0;
  std::array<int, kNumStages> max_width_bits{};

  void merge(const OpTrace& other);
  std::string csv() const;
  std::string table() const;
};

struct FxContext {
  FixedPointFormat fmt;  // datapath format
  OpTrace trace;
  Stage stage = Stage::kClassifier;
  bool wrap = false;  // wrap instead of saturate, for experiments
};

// Round-half-away-from-zero quantization into fmt, saturating out-of-range
// values (reported through `saturated` when non-null).
raw_t quantize(double v, const FixedPointFormat& fmt,
               bool* saturated = nullptr);
double to_double(raw_t raw, const FixedPointFormat& fmt);

// Traced primitives. `width_bits` is the destination register width;
// results saturate (or wrap) to it.
raw_t fx_add(FxContext& ctx, raw_t a, raw_t b, int width_bits);
raw_t fx_sub(FxContext& ctx, raw_t a, raw_t b, int width_bits);
bool fx_gt(FxContext& ctx, raw_t a, raw_t b);
// Arithmetic shift; s >= 0 shifts right with round-half-up, s < 0 shifts
// left. Counted as one shift (plus the rounding add when it applies).
raw_t fx_shift(FxContext& ctx, raw_t v, int s, int width_bits);
// Truncating right shift (no rounding); the kernel tap uses this.
raw_t fx_shift_trunc(FxContext& ctx, raw_t v, int s, int width_bits);

// Reverse water filling in fixed arithmetic: same guarded solver as
// mp::mp_hw but built exclusively from the traced primitives. Result is
// within 2 LSB of mp_exact computed in double and quantized.
raw_t fx_mp(FxContext& ctx, std::span<const raw_t> values, raw_t gamma,
            int iters = 16);

// Shift-add reciprocal: c approximated as sum of up to `terms` signed powers
// of two. Returned exponents are right-shift amounts (negative = left).
struct ShiftAddApprox {
  std::vector<std::pair<int, int>> terms;  // (shift, sign)
  double value() const;
};
ShiftAddApprox approx_shift_add(double c, int terms = 3);

// Full pipeline in fixed arithmetic on a quantized model: MP low-pass /
// band-pass filtering, rectify-accumulate, upper-bits kernel tap,
// shift-based standardization, MP classifier readout. Model must carry
// quantization info (see trainer::quantize_model).
km::Decision fixed_pipeline(std::span<const double> audio,
                            const km::TrainedModel& model, FxContext& ctx);

struct AuditReport {
  bool pass = false;
  std::string text;
};
// Passes iff the trace contains zero multiplies.
AuditReport audit(const OpTrace& trace);

// Symbolic width growth per layer: an MP stage adds one bit for the rail
// sums plus log2(fan-in) for the accumulation, while a multiply-accumulate
// stage doubles the operand width before the same accumulation growth.
int mp_layer_output_bits(int in_bits, int fanin);
int mac_layer_output_bits(int in_bits, int fanin);
int mp_network_output_bits(int in_bits, int fanin, int layers);
int mac_network_output_bits(int in_bits, int fanin, int layers);

}  // namespace mpkm::fx

#endif  // MPKM_FIXEDPOINT_HPP_
