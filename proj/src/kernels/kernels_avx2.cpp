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

// AVX2 variants of the data-parallel kernels. This translation unit is the
// only one compiled with -mavx2; callers reach it through the runtime
// dispatch table in kernels.cpp.

#if defined(MPKM_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace mpkm::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

const __m256d kSignMask = _mm256_set1_pd(-0.0);

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum(acc) + tail;
}

double hwr_sum(const double* x, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] > 0.0 ? x[i] : 0.0;
  return hsum(acc) + tail;
}

double mp_residual(const double* v, std::size_t n, double z) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d zz = _mm256_set1_pd(z);
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(v + i), zz);
    acc = _mm256_add_pd(acc, _mm256_max_pd(d, zero));
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = v[i] - z;
    if (d > 0.0) tail += d;
  }
  return hsum(acc) + tail;
}

double mp_residual_support(const double* v, std::size_t n, double z,
                           std::size_t* support) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d zz = _mm256_set1_pd(z);
  __m256d acc = zero;
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(v + i), zz);
    const __m256d gt = _mm256_cmp_pd(d, zero, _CMP_GT_OQ);
    acc = _mm256_add_pd(acc, _mm256_and_pd(d, gt));
    count += static_cast<std::size_t>(
        _mm_popcnt_u32(static_cast<unsigned>(_mm256_movemask_pd(gt))));
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = v[i] - z;
    if (d > 0.0) {
      tail += d;
      ++count;
    }
  }
  *support = count;
  return hsum(acc) + tail;
}

void add_abs(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d s = _mm256_add_pd(_mm256_loadu_pd(a + i),
                                    _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_andnot_pd(kSignMask, s));
  }
  for (; i < n; ++i) out[i] = std::fabs(a[i] + b[i]);
}

void sub_abs(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d s = _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                    _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_andnot_pd(kSignMask, s));
  }
  for (; i < n; ++i) out[i] = std::fabs(a[i] - b[i]);
}

}  // namespace mpkm::kernels::avx2

#endif  // MPKM_HAVE_AVX2
