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

#ifndef MPKM_MARGIN_HPP_
#define MPKM_MARGIN_HPP_

#include <cstddef>
#include <span>
#include <vector>

// Margin propagation (MP): given scores v_1..v_n and a margin gamma >= 0,
// MP(v, gamma) is the unique z with sum_i max(v_i - z, 0) = gamma (reverse
// water filling; z = max(v) when gamma = 0). mp_exact solves the piecewise
// linear constraint in closed form; mp_hw is an iterative solver restricted
// to add/subtract, compare, and power-of-two shifts, mirroring what a
// multiplierless datapath can do.

namespace mpkm::mp {

inline constexpr int kDefaultHwIters = 16;

// Signed vectors enter the MP domain as rail pairs with value = plus - minus.
struct DifferentialVector {
  std::vector<double> plus;
  std::vector<double> minus;

  // The encoding used throughout the pipeline: plus = v, minus = -v.
  static DifferentialVector encode(std::span<const double> v);
  std::vector<double> decode() const;
  std::size_t size() const { return plus.size(); }
};

struct MpGradient {
  std::vector<double> partials;  // dz/dv_i, each 0 or 1/support_size
  std::size_t support_size = 0;
};

// Closed-form solve. Throws std::invalid_argument on empty values or
// negative gamma.
double mp_exact(std::span<const double> values, double gamma);

// As mp_exact but sorts `values` in place, avoiding an internal copy.
double mp_exact_inplace(std::span<double> values, double gamma);

// Shift-add-compare iterative solver. Starts at max(v) - (gamma >> ceil_log2 n)
// and applies damped Newton steps whose damping factor is the power of two
// just below 1/support; a step is accepted only if it does not increase the
// residual magnitude, otherwise the shift deepens and the step is retried.
// After `iters` accepted-or-retried iterations the result is within
// 2^-10 * range(values) of mp_exact.
double mp_hw(std::span<const double> values, double gamma,
             int iters = kDefaultHwIters);

// dz/dv at the mp_exact solution: 1/|S| on the support S = {i : v_i > z},
// 0 elsewhere. gamma must be positive.
MpGradient mp_gradient(std::span<const double> values, double gamma);

// MP approximation of <h, x> (the filtering inner product): the rails are
// recombined into two MP terms whose difference stands in for the product
// sum. Throws on rail length mismatch.
double mp_inner_product(const DifferentialVector& h,
                        const DifferentialVector& x, double gamma_f);

// Specialized inner product for the literal (v, -v) rail encoding. `hx_abs`
// and scratch must hold n doubles. Equivalent to mp_inner_product on encoded
// rails but sorts n magnitudes instead of 2n rail sums.
double mp_inner_product_mirrored(const double* h, const double* x,
                                 std::size_t n, double gamma_f,
                                 double* scratch);

}  // namespace mpkm::mp

#endif  // MPKM_MARGIN_HPP_
