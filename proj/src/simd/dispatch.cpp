#include "selectkit/simd.hpp"

#include "selectkit/core.hpp"

#include <atomic>
#include <cstdlib>

namespace selectkit::simd {

#ifndef SELECTKIT_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif
#ifndef SELECTKIT_HAVE_AVX512
const KernelTable* avx512_table() { return nullptr; }
#endif

bool cpu_supports(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return true;
        case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
            return avx2_table() != nullptr && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::Avx512:
#if defined(__x86_64__) || defined(__i386__)
            return avx512_table() != nullptr && __builtin_cpu_supports("avx512f") &&
                   __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

std::vector<const KernelTable*> available_tables() {
    std::vector<const KernelTable*> out{&scalar_table()};
    if (cpu_supports(Isa::Avx2)) out.push_back(avx2_table());
    if (cpu_supports(Isa::Avx512)) out.push_back(avx512_table());
    return out;
}

Isa parse_isa(const std::string& text) {
    if (text == "scalar") return Isa::Scalar;
    if (text == "avx2") return Isa::Avx2;
    if (text == "avx512") return Isa::Avx512;
    throw Error(ErrorCode::InvalidArgument, "unknown ISA '" + text + "' (expected scalar|avx2|avx512)");
}

namespace {

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return &scalar_table();
        case Isa::Avx2: return avx2_table();
        case Isa::Avx512: return avx512_table();
    }
    return nullptr;
}

const KernelTable* pick_default() {
    if (const char* env = std::getenv("SELECTKIT_ISA"); env != nullptr && *env != '\0') {
        const Isa isa = parse_isa(env);
        if (!cpu_supports(isa)) throw Error(ErrorCode::InvalidArgument, std::string("ISA not supported here: ") + env);
        return table_for(isa);
    }
    return available_tables().back();
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable& active() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t == nullptr) {
        const KernelTable* picked = pick_default();
        g_active.compare_exchange_strong(t, picked, std::memory_order_acq_rel);
        t = g_active.load(std::memory_order_acquire);
    }
    return *t;
}

void set_active(Isa isa) {
    if (!cpu_supports(isa))
        throw Error(ErrorCode::InvalidArgument, "ISA not supported on this machine");
    g_active.store(table_for(isa), std::memory_order_release);
}

}  // namespace selectkit::simd
