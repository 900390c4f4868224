#pragma once

#include "selectkit/core.hpp"
#include "selectkit/oracle.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace sktest {

using selectkit::EmbeddingMatrix;
using selectkit::Rng;

inline EmbeddingMatrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<double> v(n * d);
    for (auto& x : v) x = scale * rng.normal();
    return EmbeddingMatrix(n, d, std::move(v));
}

inline EmbeddingMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
    return EmbeddingMatrix(rows.size(), rows.front().size(), std::move(v));
}

// Gaussian clusters with centers spread by `separation`.
inline EmbeddingMatrix clusters(std::size_t n, std::size_t d, std::size_t c, double separation, double spread,
                                std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> centers(c * d);
    for (auto& x : centers) x = separation * rng.normal();
    std::vector<double> v(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < d; ++t) v[i * d + t] = centers[(i % c) * d + t] + spread * rng.normal();
    return EmbeddingMatrix(n, d, std::move(v));
}

inline selectkit::TokenStats step(double entropy, double top1, double top2, double chosen) {
    return {entropy, top1, top2, chosen};
}

// Random valid sequence with 1..max_len steps under greedy decoding.
inline selectkit::TokenStatsSequence random_sequence(Rng& rng, std::size_t max_len = 6) {
    selectkit::TokenStatsSequence s;
    const std::size_t len = 1 + rng.below(max_len);
    for (std::size_t t = 0; t < len; ++t) {
        const double top1 = 0.05 + 0.95 * rng.uniform();
        const double top2 = std::min(top1, 1.0 - top1) * rng.uniform();
        s.steps.push_back({3.0 * rng.uniform(), top1, top2, top1});
    }
    return s;
}

inline selectkit::oracle::DenseKernel explicit_kernel(std::size_t n, std::vector<double> values) {
    return {n, std::move(values)};
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("selectkit_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace sktest

namespace sktest {

// Unit rows whose Gram matrix is [[1,.5,.1],[.5,1,.2],[.1,.2,1]], so the
// clipped cosine kernel reproduces that explicit 3x3 similarity matrix.
inline EmbeddingMatrix gram3() {
    const double a = std::sqrt(0.75);
    const double b = 0.15 / a;
    return from_rows({{1.0, 0.0, 0.0}, {0.5, a, 0.0}, {0.1, b, std::sqrt(1.0 - 0.01 - b * b)}});
}

}  // namespace sktest
