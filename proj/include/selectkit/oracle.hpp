#pragma once

// Exhaustive reference solvers for tiny instances. Written directly from the
// set-function definitions and sharing no code with the production greedy
// routines; used by the test suites and the hidden `oracle` CLI command.

#include "selectkit/core.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace selectkit::oracle {

inline constexpr std::size_t kMaxSubsetN = 14;
inline constexpr std::size_t kMaxSubsetK = 5;
inline constexpr std::size_t kMaxTopkN = 20;

/// Explicit n x n similarity matrix, w(i, j) = values[i * n + j].
struct DenseKernel {
    std::size_t n = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

struct SubsetOptimum {
    std::vector<std::size_t> set;  // ascending
    double value = 0.0;
};

// sum_i max_{j in set} w(i, j); 0 for the empty set.
double fl_value(const DenseKernel& w, std::span<const std::size_t> set);

// fl_value + weight * log(1 + sum_{x in set} u[x])
double mixture_value(const DenseKernel& w, std::span<const double> u, std::span<const std::size_t> set,
                     double weight = 1.0);

// max_i min_{j in set} ||p_i - p_j|| with the distance evaluated coordinate-wise.
double covering_radius(const EmbeddingMatrix& points, std::span<const std::size_t> set);

SubsetOptimum exhaustive_fl_opt(const DenseKernel& w, std::size_t k);
SubsetOptimum exhaustive_mixture_opt(const DenseKernel& w, std::span<const double> u, std::size_t k,
                                     double weight = 1.0);
// value is the optimal (smallest) covering radius.
SubsetOptimum exhaustive_kcenter_opt(const EmbeddingMatrix& points, std::size_t k);
// value is the optimal min score. Among optimal sets the one with the largest
// sorted score profile wins, then the lexicographically smallest.
SubsetOptimum exhaustive_topk(std::span<const double> scores, std::size_t k);

// Direct double loop: ||fi - fj||^2 by coordinate differences.
DenseKernel naive_sq_distances(const EmbeddingMatrix& emb);
DenseKernel naive_kernel(const EmbeddingMatrix& emb, const KernelSpec& spec);

}  // namespace selectkit::oracle
