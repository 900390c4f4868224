#include "selectkit/simd.hpp"

#include <algorithm>

namespace selectkit::simd {
namespace {

double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) s += a[t] * b[t];
    return s;
}

void dot_block(const double* rows, std::size_t nrows, std::size_t d,
               const double* const* cands, std::size_t ncand, double* out, std::size_t ldo) {
    for (std::size_t c = 0; c < ncand; ++c)
        for (std::size_t r = 0; r < nrows; ++r) out[c * ldo + r] = dot(rows + r * d, cands[c], d);
}

double gain_sum(const double* col, const double* cur, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::max(0.0, col[i] - cur[i]);
    return s;
}

void max_update(double* cur, const double* col, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) cur[i] = std::max(cur[i], col[i]);
}

void min_update(double* cur, const double* col, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) cur[i] = std::min(cur[i], col[i]);
}

double sum(const double* v, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
}

double lane_reduce(const double* acc) { return acc[0]; }

constexpr KernelTable kTable{Isa::Scalar, "scalar", dot, dot_block, gain_sum,
                             max_update, min_update, sum, 1, lane_reduce};

}  // namespace

const KernelTable& scalar_table() { return kTable; }

}  // namespace selectkit::simd
