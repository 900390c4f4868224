#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace selectkit {

enum class ErrorCode {
    BudgetOutOfRange,
    LengthMismatch,
    NonFiniteEmbedding,
    MissingInput,
    ZeroProbability,
    DimensionMismatch,
    ZeroNormRow,
    NegativeShiftedUncertainty,
    EmptyCurveSet,
    InstanceTooLarge,
    MagicMismatch,
    TruncatedPayload,
    InvariantViolation,
    IoFailure,
    InvalidArgument,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct Violation {
    ErrorCode code;
    std::string detail;
};

// Thrown by validate_inputs; carries every violation found, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// Row-major n x d matrix of prompt features, stored in double precision.
/// Entries are checked for finiteness and squared row norms are cached at
/// construction, so an instance is immutable and freely shareable.
class EmbeddingMatrix {
public:
    EmbeddingMatrix(std::size_t n, std::size_t d, std::vector<double> data);

    std::size_t n() const noexcept { return n_; }
    std::size_t d() const noexcept { return d_; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<const double> row_sq_norms() const noexcept { return sq_norms_; }

private:
    std::size_t n_;
    std::size_t d_;
    std::vector<double> data_;
    std::vector<double> sq_norms_;
};

/// Summary of one decoding step: entropy in nats, the two largest
/// probabilities, and the probability of the emitted token.
struct TokenStats {
    double entropy = 0.0;
    double top1_prob = 0.0;
    double top2_prob = 0.0;
    double chosen_prob = 0.0;
};

// Empty string when valid; otherwise a description of the first broken invariant.
std::string check_token_stats(const TokenStats& s);

struct TokenStatsSequence {
    std::vector<TokenStats> steps;
};

struct Budget {
    std::size_t k = 0;
};

struct RbfKernel {
    double gamma = 1.0;
};
struct ClippedCosineKernel {};

class KernelSpec {
public:
    static KernelSpec rbf(double gamma);
    static KernelSpec clipped_cosine() { return KernelSpec(ClippedCosineKernel{}); }

    bool is_rbf() const noexcept { return std::holds_alternative<RbfKernel>(kind_); }
    double gamma() const;
    std::string to_string() const;

    // "rbf:GAMMA" or "cosine"
    static KernelSpec parse(const std::string& text);

private:
    explicit KernelSpec(std::variant<RbfKernel, ClippedCosineKernel> kind) : kind_(kind) {}
    std::variant<RbfKernel, ClippedCosineKernel> kind_;
};

struct SelectionResult {
    std::vector<std::size_t> indices;
    std::vector<double> objective_trace;
    std::vector<double> gains;
};

enum class StrategyKind { Random, Uncertainty, KCenter, FacilityLocation, FacilityLocationMixture };

const char* strategy_name(StrategyKind s);
StrategyKind parse_strategy(const std::string& text);
bool strategy_needs_embeddings(StrategyKind s);
bool strategy_needs_stats(StrategyKind s);

struct RunConfig {
    StrategyKind strategy;
    std::size_t n = 0;
    Budget budget;
};

RunConfig validate_inputs(StrategyKind strategy, const EmbeddingMatrix* embeddings,
                          const std::vector<TokenStatsSequence>* stats, Budget budget);

void check_budget(Budget budget, std::size_t n);

/// Portable seeded generator: the same seed yields the same stream on every
/// platform, unlike the std distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    std::uint64_t next();
    // Uniform in [0, bound), bound >= 1.
    std::uint64_t below(std::uint64_t bound);
    // Uniform in [0, 1).
    double uniform();
    double normal();

private:
    std::uint64_t state_[4];
};

/// k distinct indices from [0, n) in sampling order.
SelectionResult select_random(std::size_t n, Budget budget, std::uint64_t seed);

// Worker count used by parallel_for; 0 restores the hardware default.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

// Runs body(begin, end) over disjoint chunks of [0, count). Each chunk is at
// least min_chunk long; results must not depend on the partitioning.
void parallel_for(std::size_t count, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace selectkit
