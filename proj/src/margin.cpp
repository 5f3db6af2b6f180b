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

#include "mpkm/margin.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "mpkm/kernels.hpp"

namespace mpkm::mp {

namespace {

void validate(std::span<const double> values, double gamma) {
  if (values.empty()) throw std::invalid_argument("mp: empty value set");
  if (gamma < 0.0) throw std::invalid_argument("mp: negative gamma");
}

inline int ceil_log2(std::size_t m) {
  return m <= 1 ? 0 : std::bit_width(m - 1);
}

// Walks the descending-sorted values until the water level bracketing gamma
// is found, then solves the active linear piece.
double solve_sorted_desc(const double* u, std::size_t n, double gamma) {
  double prefix = 0.0;
  for (std::size_t m = 1; m <= n; ++m) {
    prefix += u[m - 1];
    const double z = (prefix - gamma) / static_cast<double>(m);
    const double next =
        m < n ? u[m] : -std::numeric_limits<double>::infinity();
    if (z >= next) return z;
  }
  return (prefix - gamma) / static_cast<double>(n);  // unreachable
}

}  // namespace

DifferentialVector DifferentialVector::encode(std::span<const double> v) {
  DifferentialVector d;
  d.plus.assign(v.begin(), v.end());
  d.minus.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d.minus[i] = -v[i];
  return d;
}

std::vector<double> DifferentialVector::decode() const {
  std::vector<double> v(plus.size());
  for (std::size_t i = 0; i < plus.size(); ++i) v[i] = plus[i] - minus[i];
  return v;
}

double mp_exact(std::span<const double> values, double gamma) {
  validate(values, gamma);
  std::vector<double> sorted(values.begin(), values.end());
  return mp_exact_inplace(sorted, gamma);
}

double mp_exact_inplace(std::span<double> values, double gamma) {
  validate(values, gamma);
  if (gamma == 0.0) return *std::max_element(values.begin(), values.end());
  std::sort(values.begin(), values.end(), std::greater<>());
  return solve_sorted_desc(values.data(), values.size(), gamma);
}

double mp_hw(std::span<const double> values, double gamma, int iters) {
  validate(values, gamma);
  if (iters < 1) throw std::invalid_argument("mp_hw: iters must be >= 1");
  const std::size_t n = values.size();
  const double vmax = *std::max_element(values.begin(), values.end());
  if (gamma == 0.0) return vmax;

  double z = vmax - std::ldexp(gamma, -ceil_log2(n));
  std::size_t support = 0;
  double err =
      kernels::mp_residual_support(values.data(), n, z, &support) - gamma;
  int deepen = 0;
  for (int t = 0; t < iters; ++t) {
    const int shift = ceil_log2(std::max<std::size_t>(support, 1)) + deepen;
    const double z_next = z + std::ldexp(err, -shift);
    std::size_t support_next = 0;
    const double err_next =
        kernels::mp_residual_support(values.data(), n, z_next, &support_next) -
        gamma;
    if (std::fabs(err_next) <= std::fabs(err)) {
      z = z_next;
      err = err_next;
      support = support_next;
      deepen = 0;
    } else {
      ++deepen;
    }
  }
  return z;
}

MpGradient mp_gradient(std::span<const double> values, double gamma) {
  validate(values, gamma);
  if (gamma == 0.0)
    throw std::invalid_argument("mp_gradient: undefined at gamma = 0");
  const double z = mp_exact(values, gamma);
  MpGradient g;
  g.partials.assign(values.size(), 0.0);
  for (double v : values)
    if (v > z) ++g.support_size;
  const double w = 1.0 / static_cast<double>(g.support_size);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > z) g.partials[i] = w;
  return g;
}

double mp_inner_product(const DifferentialVector& h,
                        const DifferentialVector& x, double gamma_f) {
  const std::size_t n = h.size();
  if (h.minus.size() != n || x.plus.size() != n || x.minus.size() != n)
    throw std::invalid_argument("mp_inner_product: rail length mismatch");
  if (gamma_f <= 0.0)
    throw std::invalid_argument("mp_inner_product: gamma_f must be positive");

  std::vector<double> like(2 * n), cross(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    like[i] = h.plus[i] + x.plus[i];
    like[n + i] = h.minus[i] + x.minus[i];
    cross[i] = h.plus[i] + x.minus[i];
    cross[n + i] = h.minus[i] + x.plus[i];
  }
  return mp_exact_inplace(like, gamma_f) - mp_exact_inplace(cross, gamma_f);
}

namespace {

// MP over the antisymmetric multiset {m_i} U {-m_i} given the magnitudes
// m_i sorted descending: the descending order of the full multiset is
// m_1..m_n, -m_n..-m_1, and the prefix sum of its first n+j entries
// telescopes to the prefix sum of the first n-j magnitudes.
double solve_mirrored_sorted(const double* m, std::size_t n, double gamma) {
  if (gamma == 0.0) return m[0];
  double prefix = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    prefix += m[k - 1];
    const double z = (prefix - gamma) / static_cast<double>(k);
    const double next = k < n ? m[k] : -m[n - 1];
    if (z >= next) return z;
  }
  // prefix == sum of all magnitudes; the first n+j entries of the mirrored
  // multiset sum to the first n-j magnitudes.
  for (std::size_t j = 1; j < n; ++j) {
    prefix -= m[n - j];
    const double z = (prefix - gamma) / static_cast<double>(n + j);
    if (z >= -m[n - j - 1]) return z;
  }
  return -gamma / static_cast<double>(2 * n);
}

}  // namespace

double mp_inner_product_mirrored(const double* h, const double* x,
                                 std::size_t n, double gamma_f,
                                 double* scratch) {
  kernels::add_abs(h, x, scratch, n);
  std::sort(scratch, scratch + n, std::greater<>());
  const double z_like = solve_mirrored_sorted(scratch, n, gamma_f);
  kernels::sub_abs(h, x, scratch, n);
  std::sort(scratch, scratch + n, std::greater<>());
  const double z_cross = solve_mirrored_sorted(scratch, n, gamma_f);
  return z_like - z_cross;
}

}  // namespace mpkm::mp
