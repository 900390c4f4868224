#pragma once

#include "selectkit/core.hpp"
#include "selectkit/kernels.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace selectkit {

/// Running state of F(S) = sum_i max_{j in S} w_ij.
struct CoverageState {
    std::vector<double> cur_max;  // zeros for the empty set (w >= 0)
    double objective = 0.0;
    std::vector<std::size_t> selected;

    explicit CoverageState(std::size_t n) : cur_max(n, 0.0) {}
};

// Entry of the accelerated-greedy priority queue. cached_gain is an upper
// bound on the current marginal gain once stamp < |S|.
struct LazyHeapEntry {
    std::size_t candidate = 0;
    double cached_gain = 0.0;
    std::size_t stamp = 0;
};

// sum_i max(0, col[i] - cur_max[i])
double fl_gain(const CoverageState& state, std::span<const double> col);

/// Marginal gain of the mixture objective
///   F(S) + weight * log(1 + sum_{x in S} u(x))
/// where u are shifted (nonnegative) uncertainty scores.
double mixture_gain(const CoverageState& state, std::span<const double> col, double u_sum, double u_cand,
                    double weight = 1.0);

// Min-margin scores lie in [-1, 0]; the +1 shift maps them to [0, 1] so the
// concave log term is defined and monotone.
std::vector<double> shift_min_margin(std::span<const double> min_margin_scores);

enum class GreedyKind { Naive, Lazy, Stochastic };

struct GreedySpec {
    GreedyKind kind = GreedyKind::Lazy;
    double epsilon = 0.1;  // stochastic only
    std::uint64_t seed = 0;

    // "naive", "lazy" or "stochastic:EPS"
    static GreedySpec parse(const std::string& text, std::uint64_t seed = 0);
    std::string to_string() const;
};

struct FlCounters {
    std::size_t gain_evaluations = 0;
    std::size_t passes = 0;  // batched column computations
};

struct FlOptions {
    KernelOptions kernel;
    double mixture_weight = 1.0;
    // Candidates whose gains are evaluated per pass over the pool.
    std::size_t eval_batch = 64;
    // Stale heap entries refreshed together in the lazy variant.
    std::size_t refresh_batch = 8;
    FlCounters* counters = nullptr;
};

// Sample size per stochastic step: ceil((n / k) * ln(1 / epsilon)).
std::size_t stochastic_sample_size(std::size_t n, std::size_t k, double epsilon);

/// Plain greedy: every unselected candidate is evaluated at every step;
/// ties go to the lowest index. With `uncertainty` present the mixture
/// objective is maximized instead of F.
SelectionResult fl_greedy_naive(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget,
                                std::optional<std::span<const double>> uncertainty = std::nullopt,
                                const FlOptions& opts = {});

/// Accelerated greedy. Produces the same index sequence as fl_greedy_naive.
SelectionResult fl_greedy_lazy(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget,
                               std::optional<std::span<const double>> uncertainty = std::nullopt,
                               const FlOptions& opts = {});

/// Stochastic greedy: best of a uniform sample of unselected candidates per step.
SelectionResult fl_greedy_stochastic(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget,
                                     double epsilon, std::uint64_t seed,
                                     std::optional<std::span<const double>> uncertainty = std::nullopt,
                                     const FlOptions& opts = {});

SelectionResult fl_greedy(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget, const GreedySpec& greedy,
                          std::optional<std::span<const double>> uncertainty = std::nullopt,
                          const FlOptions& opts = {});

}  // namespace selectkit
