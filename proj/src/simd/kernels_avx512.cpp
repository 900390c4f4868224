// Compiled with -mavx512f -mavx2 -mfma; only reached after a CPUID check.
#include "selectkit/simd.hpp"

#include <immintrin.h>

#include <cmath>

namespace selectkit::simd {
namespace {

constexpr std::size_t kLanes = 8;

inline double hsum(__m512d v) {
    const __m256d lo = _mm512_castpd512_pd256(v);
    const __m256d hi = _mm512_extractf64x4_pd(v, 1);
    const __m256d q = _mm256_add_pd(lo, hi);
    const __m128d s = _mm_add_pd(_mm256_castpd256_pd128(q), _mm256_extractf128_pd(q, 1));
    return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

inline double tail_dot(const double* a, const double* b, std::size_t from, std::size_t d, double s) {
    for (std::size_t t = from; t < d; ++t) s = std::fma(a[t], b[t], s);
    return s;
}

double dot(const double* a, const double* b, std::size_t d) {
    const std::size_t full = d - d % kLanes;
    __m512d acc = _mm512_setzero_pd();
    for (std::size_t t = 0; t < full; t += kLanes)
        acc = _mm512_fmadd_pd(_mm512_loadu_pd(a + t), _mm512_loadu_pd(b + t), acc);
    return tail_dot(a, b, full, d, hsum(acc));
}

// Register block of R rows x C candidates. Each pair owns one accumulator
// and follows the same operation order as dot(), so the result is bitwise
// identical to computing the pair alone.
template <int R, int C>
inline void micro(const double* rows, std::size_t d, std::size_t full, const double* const* cands, double* out,
                  std::size_t ldo) {
    __m512d acc[R][C];
    #pragma GCC unroll 8
    for (int r = 0; r < R; ++r)
        #pragma GCC unroll 8
        for (int c = 0; c < C; ++c) acc[r][c] = _mm512_setzero_pd();
    for (std::size_t t = 0; t < full; t += kLanes) {
        __m512d cv[C];
        #pragma GCC unroll 8
        for (int c = 0; c < C; ++c) cv[c] = _mm512_loadu_pd(cands[c] + t);
        #pragma GCC unroll 8
        for (int r = 0; r < R; ++r) {
            const __m512d x = _mm512_loadu_pd(rows + r * d + t);
            #pragma GCC unroll 8
            for (int c = 0; c < C; ++c) acc[r][c] = _mm512_fmadd_pd(x, cv[c], acc[r][c]);
        }
    }
    #pragma GCC unroll 8
    for (int r = 0; r < R; ++r)
        #pragma GCC unroll 8
        for (int c = 0; c < C; ++c)
            out[c * ldo + r] = tail_dot(rows + r * d, cands[c], full, d, hsum(acc[r][c]));
}

// Rows outer so a group of 6 rows stays in L1 while every candidate group
// passes over it.
void dot_block(const double* rows, std::size_t nrows, std::size_t d,
               const double* const* cands, std::size_t ncand, double* out, std::size_t ldo) {
    const std::size_t full = d - d % kLanes;
    std::size_t r = 0;
    for (; r + 6 <= nrows; r += 6) {
        const double* rg = rows + r * d;
        std::size_t c = 0;
        for (; c + 4 <= ncand; c += 4) micro<6, 4>(rg, d, full, cands + c, out + c * ldo + r, ldo);
        for (; c < ncand; ++c) micro<6, 1>(rg, d, full, cands + c, out + c * ldo + r, ldo);
    }
    for (; r < nrows; ++r)
        for (std::size_t c = 0; c < ncand; ++c) out[c * ldo + r] = dot(rows + r * d, cands[c], d);
}

double gain_sum(const double* col, const double* cur, std::size_t n) {
    const std::size_t full = n - n % kLanes;
    const __m512d zero = _mm512_setzero_pd();
    __m512d acc = zero;
    for (std::size_t i = 0; i < full; i += kLanes) {
        const __m512d diff = _mm512_sub_pd(_mm512_loadu_pd(col + i), _mm512_loadu_pd(cur + i));
        acc = _mm512_add_pd(acc, _mm512_max_pd(diff, zero));
    }
    double s = hsum(acc);
    for (std::size_t i = full; i < n; ++i) {
        const double diff = col[i] - cur[i];
        s += diff > 0.0 ? diff : 0.0;
    }
    return s;
}

void max_update(double* cur, const double* col, std::size_t n) {
    const std::size_t full = n - n % kLanes;
    for (std::size_t i = 0; i < full; i += kLanes)
        _mm512_storeu_pd(cur + i, _mm512_max_pd(_mm512_loadu_pd(cur + i), _mm512_loadu_pd(col + i)));
    for (std::size_t i = full; i < n; ++i) cur[i] = cur[i] < col[i] ? col[i] : cur[i];
}

void min_update(double* cur, const double* col, std::size_t n) {
    const std::size_t full = n - n % kLanes;
    for (std::size_t i = 0; i < full; i += kLanes)
        _mm512_storeu_pd(cur + i, _mm512_min_pd(_mm512_loadu_pd(cur + i), _mm512_loadu_pd(col + i)));
    for (std::size_t i = full; i < n; ++i) cur[i] = col[i] < cur[i] ? col[i] : cur[i];
}

double sum(const double* v, std::size_t n) {
    const std::size_t full = n - n % kLanes;
    __m512d acc = _mm512_setzero_pd();
    for (std::size_t i = 0; i < full; i += kLanes) acc = _mm512_add_pd(acc, _mm512_loadu_pd(v + i));
    double s = hsum(acc);
    for (std::size_t i = full; i < n; ++i) s += v[i];
    return s;
}

double lane_reduce(const double* acc) { return hsum(_mm512_loadu_pd(acc)); }

constexpr KernelTable kTable{Isa::Avx512, "avx512", dot, dot_block, gain_sum,
                             max_update, min_update, sum, kLanes, lane_reduce};

}  // namespace

const KernelTable* avx512_table() { return &kTable; }

}  // namespace selectkit::simd
