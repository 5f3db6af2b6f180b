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

#ifndef MPKM_KERNELS_HPP_
#define MPKM_KERNELS_HPP_

#include <cstddef>
#include <string_view>

// Data-parallel inner loops shared by the filtering and margin-propagation
// code. Every primitive has a scalar reference implementation and, on x86-64,
// an AVX2 variant. The active variant is chosen at runtime from CPUID and can
// be overridden with select_impl() or the MPKM_KERNELS environment variable
// ("scalar" or "avx2"). Scalar and AVX2 variants are equivalence-tested
// against each other; reductions may differ in summation order, so floating
// point results agree to tight tolerance rather than bit-exactly.

namespace mpkm::kernels {

enum class Impl { kAuto, kScalar, kAvx2 };

// Selects the implementation set. kAuto re-probes the CPU (and the
// MPKM_KERNELS environment variable). Returns the implementation actually
// activated; requesting kAvx2 on a CPU without AVX2 falls back to kScalar.
Impl select_impl(Impl impl);
Impl active_impl();
std::string_view impl_name();
bool avx2_available();

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i max(x[i], 0)
double hwr_sum(const double* x, std::size_t n);

// sum_i max(v[i] - z, 0)
double mp_residual(const double* v, std::size_t n, double z);

// Same reduction, also reporting |{i : v[i] > z}| through `support`.
double mp_residual_support(const double* v, std::size_t n, double z,
                           std::size_t* support);

// out[i] = |a[i] + b[i]| and out[i] = |a[i] - b[i]|
void add_abs(const double* a, const double* b, double* out, std::size_t n);
void sub_abs(const double* a, const double* b, double* out, std::size_t n);

// Scalar reference implementations, exposed for equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double hwr_sum(const double* x, std::size_t n);
double mp_residual(const double* v, std::size_t n, double z);
double mp_residual_support(const double* v, std::size_t n, double z,
                           std::size_t* support);
void add_abs(const double* a, const double* b, double* out, std::size_t n);
void sub_abs(const double* a, const double* b, double* out, std::size_t n);
}  // namespace scalar

}  // namespace mpkm::kernels

#endif  // MPKM_KERNELS_HPP_
