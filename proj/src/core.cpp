#include "selectkit/core.hpp"

#include "selectkit/simd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <mutex>
#include <thread>

namespace selectkit {

const char* error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::BudgetOutOfRange: return "BudgetOutOfRange";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NonFiniteEmbedding: return "NonFiniteEmbedding";
        case ErrorCode::MissingInput: return "MissingInput";
        case ErrorCode::ZeroProbability: return "ZeroProbability";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroNormRow: return "ZeroNormRow";
        case ErrorCode::NegativeShiftedUncertainty: return "NegativeShiftedUncertainty";
        case ErrorCode::EmptyCurveSet: return "EmptyCurveSet";
        case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
        case ErrorCode::MagicMismatch: return "MagicMismatch";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

namespace {
std::string join_violations(const std::vector<Violation>& vs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (i) os << "; ";
        os << error_name(vs[i].code) << " (" << vs[i].detail << ")";
    }
    return os.str();
}
}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorCode::InvalidArgument : violations.front().code,
            join_violations(violations)),
      violations_(std::move(violations)) {}

EmbeddingMatrix::EmbeddingMatrix(std::size_t n, std::size_t d, std::vector<double> data)
    : n_(n), d_(d), data_(std::move(data)) {
    if (n_ == 0 || d_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding matrix must have n >= 1 and d >= 1");
    if (data_.size() != n_ * d_)
        throw Error(ErrorCode::LengthMismatch, "embedding payload has " + std::to_string(data_.size()) +
                                                   " values, expected n*d = " + std::to_string(n_ * d_));
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i]))
            throw Error(ErrorCode::NonFiniteEmbedding,
                        "row " + std::to_string(i / d_) + ", column " + std::to_string(i % d_));
    }
    const auto& k = simd::active();
    sq_norms_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) sq_norms_[i] = k.dot(data_.data() + i * d_, data_.data() + i * d_, d_);
}

std::string check_token_stats(const TokenStats& s) {
    if (!std::isfinite(s.entropy) || !std::isfinite(s.top1_prob) || !std::isfinite(s.top2_prob) ||
        !std::isfinite(s.chosen_prob))
        return "non-finite value";
    if (s.entropy < 0.0) return "entropy < 0";
    if (s.top1_prob > 1.0) return "top1 > 1";
    if (s.top2_prob > s.top1_prob) return "top2 > top1";
    if (s.top2_prob < 0.0) return "top2 < 0";
    if (s.chosen_prob < 0.0 || s.chosen_prob > 1.0) return "chosen outside [0, 1]";
    return {};
}

KernelSpec KernelSpec::rbf(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw Error(ErrorCode::InvalidArgument, "RBF kernel width must be a positive finite number");
    return KernelSpec(RbfKernel{gamma});
}

double KernelSpec::gamma() const {
    if (!is_rbf()) throw Error(ErrorCode::InvalidArgument, "clipped cosine kernel has no width");
    return std::get<RbfKernel>(kind_).gamma;
}

std::string KernelSpec::to_string() const {
    if (!is_rbf()) return "cosine";
    std::ostringstream os;
    os.precision(17);
    os << "rbf:" << gamma();
    return os.str();
}

KernelSpec KernelSpec::parse(const std::string& text) {
    if (text == "cosine") return clipped_cosine();
    if (text.rfind("rbf:", 0) == 0) {
        const std::string num = text.substr(4);
        char* end = nullptr;
        const double g = std::strtod(num.c_str(), &end);
        if (num.empty() || end == nullptr || *end != '\0')
            throw Error(ErrorCode::InvalidArgument, "bad kernel width in '" + text + "'");
        return rbf(g);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown kernel spec '" + text + "' (expected rbf:GAMMA or cosine)");
}

const char* strategy_name(StrategyKind s) {
    switch (s) {
        case StrategyKind::Random: return "random";
        case StrategyKind::Uncertainty: return "uncertainty";
        case StrategyKind::KCenter: return "kcenter";
        case StrategyKind::FacilityLocation: return "fl";
        case StrategyKind::FacilityLocationMixture: return "fl-mixture";
    }
    return "?";
}

StrategyKind parse_strategy(const std::string& text) {
    for (auto s : {StrategyKind::Random, StrategyKind::Uncertainty, StrategyKind::KCenter,
                   StrategyKind::FacilityLocation, StrategyKind::FacilityLocationMixture})
        if (text == strategy_name(s)) return s;
    throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + text + "'");
}

bool strategy_needs_embeddings(StrategyKind s) {
    return s == StrategyKind::KCenter || s == StrategyKind::FacilityLocation ||
           s == StrategyKind::FacilityLocationMixture;
}

bool strategy_needs_stats(StrategyKind s) {
    return s == StrategyKind::Uncertainty || s == StrategyKind::FacilityLocationMixture;
}

void check_budget(Budget budget, std::size_t n) {
    if (budget.k < 1 || budget.k > n)
        throw Error(ErrorCode::BudgetOutOfRange,
                    "k = " + std::to_string(budget.k) + " outside [1, " + std::to_string(n) + "]");
}

RunConfig validate_inputs(StrategyKind strategy, const EmbeddingMatrix* embeddings,
                          const std::vector<TokenStatsSequence>* stats, Budget budget) {
    std::vector<Violation> out;
    if (embeddings == nullptr && stats == nullptr)
        out.push_back({ErrorCode::MissingInput, "neither embeddings nor token statistics supplied"});
    if (strategy_needs_embeddings(strategy) && embeddings == nullptr)
        out.push_back({ErrorCode::MissingInput, std::string(strategy_name(strategy)) + " requires embeddings"});
    if (strategy_needs_stats(strategy) && stats == nullptr)
        out.push_back({ErrorCode::MissingInput, std::string(strategy_name(strategy)) + " requires token statistics"});

    std::size_t n = 0;
    if (embeddings != nullptr) {
        n = embeddings->n();
        for (double v : embeddings->data()) {
            if (!std::isfinite(v)) {
                out.push_back({ErrorCode::NonFiniteEmbedding, "embedding matrix contains a non-finite entry"});
                break;
            }
        }
    }
    if (stats != nullptr) {
        if (embeddings != nullptr && stats->size() != n)
            out.push_back({ErrorCode::LengthMismatch, "token statistics count " + std::to_string(stats->size()) +
                                                          " != embedding rows " + std::to_string(n)});
        if (embeddings == nullptr) n = stats->size();
        for (std::size_t i = 0; i < stats->size(); ++i) {
            const auto& seq = (*stats)[i];
            if (seq.steps.empty()) {
                out.push_back({ErrorCode::InvariantViolation, "prompt " + std::to_string(i) + " has no steps"});
                continue;
            }
            for (std::size_t t = 0; t < seq.steps.size(); ++t) {
                if (auto why = check_token_stats(seq.steps[t]); !why.empty()) {
                    out.push_back({ErrorCode::InvariantViolation,
                                   "prompt " + std::to_string(i) + " step " + std::to_string(t) + ": " + why});
                    break;
                }
            }
        }
    }
    if (budget.k < 1 || budget.k > n)
        out.push_back({ErrorCode::BudgetOutOfRange,
                       "k = " + std::to_string(budget.k) + " outside [1, " + std::to_string(n) + "]"});
    if (!out.empty()) throw ValidationError(std::move(out));
    return RunConfig{strategy, n, budget};
}

namespace {
std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
    for (auto& s : state_) s = splitmix64(seed);
}

// xoshiro256**
std::uint64_t Rng::next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    // Rejection on the top of the range keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % bound;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

SelectionResult select_random(std::size_t n, Budget budget, std::uint64_t seed) {
    check_budget(budget, n);
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    Rng rng(seed);
    SelectionResult r;
    for (std::size_t t = 0; t < budget.k; ++t) {
        const std::size_t pick = t + rng.below(n - t);
        std::swap(pool[t], pool[pick]);
        r.indices.push_back(pool[t]);
    }
    return r;
}

namespace {
std::atomic<std::size_t> g_threads{0};

std::size_t default_threads() {
    if (const char* env = std::getenv("SELECTKIT_THREADS"); env != nullptr && *env != '\0') {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}
}  // namespace

void set_thread_count(std::size_t threads) { g_threads.store(threads); }

std::size_t thread_count() {
    const std::size_t t = g_threads.load();
    return t == 0 ? default_threads() : t;
}

void parallel_for(std::size_t count, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    if (count == 0) return;
    min_chunk = std::max<std::size_t>(1, min_chunk);
    const std::size_t workers = std::min(thread_count(), (count + min_chunk - 1) / min_chunk);
    if (workers <= 1) {
        body(0, count);
        return;
    }
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&](std::size_t b, std::size_t e) {
        try {
            body(b, e);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(count, b + chunk);
        if (b < e) pool.emplace_back(run, b, e);
    }
    run(0, std::min(count, chunk));
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace selectkit
