#include "selectkit/facility_location.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace selectkit {

double fl_gain(const CoverageState& state, std::span<const double> col) {
    if (col.size() != state.cur_max.size()) throw Error(ErrorCode::DimensionMismatch, "column length != pool size");
    return simd::active().gain_sum(col.data(), state.cur_max.data(), col.size());
}

double mixture_gain(const CoverageState& state, std::span<const double> col, double u_sum, double u_cand,
                    double weight) {
    if (u_sum < 0.0 || u_cand < 0.0)
        throw Error(ErrorCode::NegativeShiftedUncertainty, "shifted uncertainty must be nonnegative");
    return fl_gain(state, col) + weight * (std::log1p(u_sum + u_cand) - std::log1p(u_sum));
}

std::vector<double> shift_min_margin(std::span<const double> scores) {
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] + 1.0;
    return out;
}

GreedySpec GreedySpec::parse(const std::string& text, std::uint64_t seed) {
    GreedySpec g;
    g.seed = seed;
    if (text == "naive") {
        g.kind = GreedyKind::Naive;
    } else if (text == "lazy") {
        g.kind = GreedyKind::Lazy;
    } else if (text.rfind("stochastic:", 0) == 0) {
        g.kind = GreedyKind::Stochastic;
        const std::string num = text.substr(11);
        char* end = nullptr;
        g.epsilon = std::strtod(num.c_str(), &end);
        if (num.empty() || *end != '\0' || !(g.epsilon > 0.0 && g.epsilon < 1.0))
            throw Error(ErrorCode::InvalidArgument, "stochastic epsilon must be in (0, 1): '" + text + "'");
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown greedy variant '" + text + "' (naive|lazy|stochastic:EPS)");
    }
    return g;
}

std::string GreedySpec::to_string() const {
    switch (kind) {
        case GreedyKind::Naive: return "naive";
        case GreedyKind::Lazy: return "lazy";
        case GreedyKind::Stochastic: {
            std::ostringstream os;
            os.precision(17);
            os << "stochastic:" << epsilon;
            return os.str();
        }
    }
    return "?";
}

std::size_t stochastic_sample_size(std::size_t n, std::size_t k, double epsilon) {
    const double s = std::ceil(static_cast<double>(n) / static_cast<double>(k) * std::log(1.0 / epsilon));
    return static_cast<std::size_t>(std::max(1.0, s));
}

namespace {

// Coverage state plus the column evaluator and optional uncertainty term.
class GreedyRun {
public:
    GreedyRun(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget,
              std::optional<std::span<const double>> uncertainty, const FlOptions& opts)
        : opts_(opts), eval_(make_eval(emb, spec, budget, opts)), state_(emb.n()), chosen_(emb.n(), 0) {
        if (uncertainty) {
            if (uncertainty->size() != emb.n())
                throw Error(ErrorCode::LengthMismatch, "uncertainty scores count != pool size");
            for (double u : *uncertainty)
                if (!(u >= 0.0))
                    throw Error(ErrorCode::NegativeShiftedUncertainty, "shifted uncertainty must be nonnegative");
            u_.assign(uncertainty->begin(), uncertainty->end());
        }
        opts_.eval_batch = std::max<std::size_t>(1, opts_.eval_batch);
        buf_.resize(opts_.eval_batch * emb.n());
        if (spec.is_rbf()) {
            gamma_ = spec.gamma();
            skip_sq_.assign(emb.n(), std::numeric_limits<double>::infinity());
        }
    }

    std::size_t n() const { return state_.cur_max.size(); }
    std::size_t size() const { return state_.selected.size(); }
    bool chosen(std::size_t j) const { return chosen_[j] != 0; }

    // gains[c] for candidates js[c] against the current state.
    void gains(std::span<const std::size_t> js, std::span<double> out) {
        const std::size_t n = this->n();
        const auto& simd = eval_.table();
        for (std::size_t b = 0; b < js.size(); b += opts_.eval_batch) {
            const std::size_t cnt = std::min(opts_.eval_batch, js.size() - b);
            const std::span<double> cols(buf_.data(), cnt * n);
            if (skip_sq_.empty())
                eval_.columns(js.subspan(b, cnt), cols);
            else
                eval_.columns_pruned(js.subspan(b, cnt), skip_sq_, cols);
            if (opts_.counters) {
                opts_.counters->gain_evaluations += cnt;
                ++opts_.counters->passes;
            }
            for (std::size_t c = 0; c < cnt; ++c) {
                double g = simd.gain_sum(buf_.data() + c * n, state_.cur_max.data(), n);
                if (!u_.empty()) g += modular_gain(js[b + c]);
                out[b + c] = g;
            }
        }
    }

    // Gains of every candidate against the empty selection.
    void initial_gains(std::span<double> out) {
        eval_.column_sums(out);
        if (opts_.counters) {
            opts_.counters->gain_evaluations += out.size();
            ++opts_.counters->passes;
        }
        if (!u_.empty())
            for (std::size_t j = 0; j < out.size(); ++j) out[j] += modular_gain(j);
    }

    void accept(std::size_t j, double gain, SelectionResult& result) {
        const std::size_t n = this->n();
        const auto& simd = eval_.table();
        // Pruned rows cannot raise coverage, so the update is unchanged.
        const std::size_t idx[1] = {j};
        if (skip_sq_.empty())
            eval_.columns(idx, std::span<double>(buf_.data(), n));
        else
            eval_.columns_pruned(idx, skip_sq_, std::span<double>(buf_.data(), n));
        if (!skip_sq_.empty())
            for (std::size_t i = 0; i < n; ++i)
                if (buf_[i] > state_.cur_max[i]) skip_sq_[i] = skip_bound(buf_[i]);
        simd.max_update(state_.cur_max.data(), buf_.data(), n);
        if (!u_.empty()) u_sum_ += u_[j];
        chosen_[j] = 1;
        state_.selected.push_back(j);
        state_.objective = simd.sum(state_.cur_max.data(), n);
        if (!u_.empty()) state_.objective += opts_.mixture_weight * std::log1p(u_sum_);
        result.indices.push_back(j);
        result.gains.push_back(gain);
        result.objective_trace.push_back(state_.objective);
    }

private:
    static ColumnEvaluator make_eval(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget,
                                     const FlOptions& opts) {
        check_budget(budget, emb.n());
        check_kernel_applicable(emb, spec);
        return ColumnEvaluator::similarity(emb, spec, opts.kernel);
    }

    // Squared distance beyond which exp(-sq / gamma) falls below coverage c
    // by a relative margin of 1e-9, far wider than rounding in exp or log.
    // Such rows add exactly zero to a gain and are not evaluated.
    double skip_bound(double c) const { return gamma_ * (-std::log(c) * (1.0 + 1e-9) + 1e-9); }

    double modular_gain(std::size_t j) const {
        return opts_.mixture_weight * (std::log1p(u_sum_ + u_[j]) - std::log1p(u_sum_));
    }

    FlOptions opts_;
    ColumnEvaluator eval_;
    CoverageState state_;
    std::vector<char> chosen_;
    std::vector<double> u_;
    double u_sum_ = 0.0;
    std::vector<double> buf_;
    double gamma_ = 0.0;
    std::vector<double> skip_sq_;
};

// Max gain, lowest index on ties.
bool better(double g, std::size_t j, double best_g, std::size_t best_j) {
    return g > best_g || (g == best_g && j < best_j);
}

}  // namespace

SelectionResult fl_greedy_naive(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget,
                                std::optional<std::span<const double>> uncertainty, const FlOptions& opts) {
    GreedyRun run(emb, spec, budget, uncertainty, opts);
    SelectionResult result;
    std::vector<std::size_t> cands;
    std::vector<double> g;
    for (std::size_t t = 0; t < budget.k; ++t) {
        cands.clear();
        for (std::size_t j = 0; j < run.n(); ++j)
            if (!run.chosen(j)) cands.push_back(j);
        g.resize(cands.size());
        run.gains(cands, g);
        std::size_t best = 0;
        for (std::size_t c = 1; c < cands.size(); ++c)
            if (better(g[c], cands[c], g[best], cands[best])) best = c;
        run.accept(cands[best], g[best], result);
    }
    return result;
}

SelectionResult fl_greedy_lazy(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget,
                               std::optional<std::span<const double>> uncertainty, const FlOptions& opts) {
    GreedyRun run(emb, spec, budget, uncertainty, opts);
    const std::size_t n = run.n();
    // Heap top: largest cached gain, then lowest index.
    auto below = [](const LazyHeapEntry& a, const LazyHeapEntry& b) {
        if (a.cached_gain != b.cached_gain) return a.cached_gain < b.cached_gain;
        return a.candidate > b.candidate;
    };
    std::priority_queue<LazyHeapEntry, std::vector<LazyHeapEntry>, decltype(below)> heap(below);

    {
        std::vector<double> g(n);
        run.initial_gains(g);
        std::vector<LazyHeapEntry> entries(n);
        for (std::size_t j = 0; j < n; ++j) entries[j] = {j, g[j], 0};
        heap = decltype(heap)(below, std::move(entries));
    }

    const std::size_t refresh = std::max<std::size_t>(1, opts.refresh_batch);
    SelectionResult result;
    std::vector<LazyHeapEntry> stale;
    std::vector<std::size_t> ids;
    std::vector<double> fresh;
    while (result.indices.size() < budget.k) {
        const std::size_t step = run.size();
        const LazyHeapEntry top = heap.top();
        if (top.stamp == step) {
            // Every other entry bounds its true gain from above and ranks
            // no higher, so the fresh top is the exact greedy choice.
            heap.pop();
            run.accept(top.candidate, top.cached_gain, result);
            continue;
        }
        stale.clear();
        while (!heap.empty() && stale.size() < refresh && heap.top().stamp != step) {
            stale.push_back(heap.top());
            heap.pop();
        }
        ids.resize(stale.size());
        fresh.resize(stale.size());
        for (std::size_t s = 0; s < stale.size(); ++s) ids[s] = stale[s].candidate;
        run.gains(ids, fresh);
        for (std::size_t s = 0; s < stale.size(); ++s) heap.push({ids[s], fresh[s], step});
    }
    return result;
}

SelectionResult fl_greedy_stochastic(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget,
                                     double epsilon, std::uint64_t seed,
                                     std::optional<std::span<const double>> uncertainty, const FlOptions& opts) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be in (0, 1)");
    GreedyRun run(emb, spec, budget, uncertainty, opts);
    const std::size_t n = run.n();
    const std::size_t s = stochastic_sample_size(n, budget.k, epsilon);

    std::vector<std::size_t> remaining(n);
    for (std::size_t j = 0; j < n; ++j) remaining[j] = j;
    Rng rng(seed);
    SelectionResult result;
    std::vector<double> g;
    for (std::size_t t = 0; t < budget.k; ++t) {
        const std::size_t m = std::min(s, remaining.size());
        // Partial Fisher-Yates: the first m slots become the sample.
        for (std::size_t a = 0; a < m; ++a) {
            const std::size_t b = a + static_cast<std::size_t>(rng.below(remaining.size() - a));
            std::swap(remaining[a], remaining[b]);
        }
        const std::span<const std::size_t> sample(remaining.data(), m);
        g.resize(m);
        run.gains(sample, g);
        std::size_t best = 0;
        for (std::size_t c = 1; c < m; ++c)
            if (better(g[c], sample[c], g[best], sample[best])) best = c;
        const std::size_t winner = sample[best];
        const double winner_gain = g[best];
        remaining[best] = remaining.back();
        remaining.pop_back();
        run.accept(winner, winner_gain, result);
    }
    return result;
}

SelectionResult fl_greedy(const EmbeddingMatrix& emb, const KernelSpec& spec, Budget budget, const GreedySpec& greedy,
                          std::optional<std::span<const double>> uncertainty, const FlOptions& opts) {
    switch (greedy.kind) {
        case GreedyKind::Naive: return fl_greedy_naive(emb, spec, budget, uncertainty, opts);
        case GreedyKind::Lazy: return fl_greedy_lazy(emb, spec, budget, uncertainty, opts);
        case GreedyKind::Stochastic:
            return fl_greedy_stochastic(emb, spec, budget, greedy.epsilon, greedy.seed, uncertainty, opts);
    }
    return {};
}

}  // namespace selectkit
