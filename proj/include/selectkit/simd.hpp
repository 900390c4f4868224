#pragma once

// Data-parallel inner loops shared by the kernels, kcenter and facility
// location modules. Every routine has a scalar reference implementation and
// optional AVX2 / AVX-512 variants; the active table is picked once at
// startup from CPUID and may be overridden with SELECTKIT_ISA=scalar|avx2|avx512.
//
// Within one table, every dot product uses the same lane layout and
// reduction order whether it is computed alone or inside a block, so
// dot(a, a) and dot_block entries for identical rows agree bitwise.

#include <cstddef>
#include <string>
#include <vector>

namespace selectkit::simd {

enum class Isa { Scalar, Avx2, Avx512 };

struct KernelTable {
    Isa isa;
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t d);

    // out[c * ldo + r] = dot(rows + r*d, cands[c]) for r < nrows, c < ncand.
    void (*dot_block)(const double* rows, std::size_t nrows, std::size_t d,
                      const double* const* cands, std::size_t ncand, double* out, std::size_t ldo);

    // sum_i max(0, col[i] - cur[i])
    double (*gain_sum)(const double* col, const double* cur, std::size_t n);

    // cur[i] = max(cur[i], col[i])
    void (*max_update)(double* cur, const double* col, std::size_t n);

    // cur[i] = min(cur[i], col[i])
    void (*min_update)(double* cur, const double* col, std::size_t n);

    // sum_i v[i]
    double (*sum)(const double* v, std::size_t n);

    // gain_sum keeps `lanes` partial sums (lane i % lanes for i below the
    // last full vector), combines them with lane_reduce, then adds the tail
    // in order. Exposed so a caller can rebuild the same sum incrementally.
    std::size_t lanes;
    double (*lane_reduce)(const double* acc);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();    // nullptr when not compiled in
const KernelTable* avx512_table();  // nullptr when not compiled in

bool cpu_supports(Isa isa);

// Tables usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

const KernelTable& active();
void set_active(Isa isa);
Isa parse_isa(const std::string& text);

}  // namespace selectkit::simd
