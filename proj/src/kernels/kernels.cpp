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

#include "mpkm/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace mpkm::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double hwr_sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] > 0.0 ? x[i] : 0.0;
  return acc;
}

double mp_residual(const double* v, std::size_t n, double z) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - z;
    if (d > 0.0) acc += d;
  }
  return acc;
}

double mp_residual_support(const double* v, std::size_t n, double z,
                           std::size_t* support) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - z;
    if (d > 0.0) {
      acc += d;
      ++count;
    }
  }
  *support = count;
  return acc;
}

void add_abs(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(a[i] + b[i]);
}

void sub_abs(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(a[i] - b[i]);
}

}  // namespace scalar

#if defined(MPKM_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double hwr_sum(const double* x, std::size_t n);
double mp_residual(const double* v, std::size_t n, double z);
double mp_residual_support(const double* v, std::size_t n, double z,
                           std::size_t* support);
void add_abs(const double* a, const double* b, double* out, std::size_t n);
void sub_abs(const double* a, const double* b, double* out, std::size_t n);
}  // namespace avx2
#endif

namespace {

struct Vtable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*hwr_sum)(const double*, std::size_t);
  double (*mp_residual)(const double*, std::size_t, double);
  double (*mp_residual_support)(const double*, std::size_t, double,
                                std::size_t*);
  void (*add_abs)(const double*, const double*, double*, std::size_t);
  void (*sub_abs)(const double*, const double*, double*, std::size_t);
};

constexpr Vtable kScalarVtable = {
    &scalar::dot,     &scalar::hwr_sum, &scalar::mp_residual,
    &scalar::mp_residual_support,       &scalar::add_abs,
    &scalar::sub_abs,
};

#if defined(MPKM_HAVE_AVX2)
constexpr Vtable kAvx2Vtable = {
    &avx2::dot,     &avx2::hwr_sum, &avx2::mp_residual,
    &avx2::mp_residual_support,     &avx2::add_abs,
    &avx2::sub_abs,
};
#endif

bool cpu_has_avx2() {
#if defined(MPKM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::atomic<const Vtable*> g_vtable{nullptr};
std::atomic<Impl> g_impl{Impl::kAuto};

Impl activate(Impl requested) {
  Impl resolved = requested;
  if (resolved == Impl::kAuto) {
    resolved = cpu_has_avx2() ? Impl::kAvx2 : Impl::kScalar;
    if (const char* env = std::getenv("MPKM_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) resolved = Impl::kScalar;
      if (std::strcmp(env, "avx2") == 0) resolved = Impl::kAvx2;
    }
  }
  if (resolved == Impl::kAvx2 && !cpu_has_avx2()) resolved = Impl::kScalar;
#if defined(MPKM_HAVE_AVX2)
  g_vtable.store(resolved == Impl::kAvx2 ? &kAvx2Vtable : &kScalarVtable,
                 std::memory_order_release);
#else
  g_vtable.store(&kScalarVtable, std::memory_order_release);
#endif
  g_impl.store(resolved, std::memory_order_release);
  return resolved;
}

inline const Vtable& table() {
  const Vtable* t = g_vtable.load(std::memory_order_acquire);
  if (!t) {
    activate(Impl::kAuto);
    t = g_vtable.load(std::memory_order_acquire);
  }
  return *t;
}

}  // namespace

Impl select_impl(Impl impl) { return activate(impl); }

Impl active_impl() {
  table();
  return g_impl.load(std::memory_order_acquire);
}

std::string_view impl_name() {
  return active_impl() == Impl::kAvx2 ? "avx2" : "scalar";
}

bool avx2_available() { return cpu_has_avx2(); }

double dot(const double* a, const double* b, std::size_t n) {
  return table().dot(a, b, n);
}

double hwr_sum(const double* x, std::size_t n) { return table().hwr_sum(x, n); }

double mp_residual(const double* v, std::size_t n, double z) {
  return table().mp_residual(v, n, z);
}

double mp_residual_support(const double* v, std::size_t n, double z,
                           std::size_t* support) {
  return table().mp_residual_support(v, n, z, support);
}

void add_abs(const double* a, const double* b, double* out, std::size_t n) {
  table().add_abs(a, b, out, n);
}

void sub_abs(const double* a, const double* b, double* out, std::size_t n) {
  table().sub_abs(a, b, out, n);
}

}  // namespace mpkm::kernels
