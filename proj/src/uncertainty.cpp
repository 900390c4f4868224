#include "selectkit/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace selectkit {

const char* uncertainty_name(UncertaintyKind kind) {
    switch (kind) {
        case UncertaintyKind::MeanEntropy: return "mean-entropy";
        case UncertaintyKind::LeastConfidence: return "least-confidence";
        case UncertaintyKind::MeanMargin: return "mean-margin";
        case UncertaintyKind::MinMargin: return "min-margin";
    }
    return "?";
}

UncertaintyKind parse_uncertainty(const std::string& text) {
    for (auto k : {UncertaintyKind::MeanEntropy, UncertaintyKind::LeastConfidence, UncertaintyKind::MeanMargin,
                   UncertaintyKind::MinMargin})
        if (text == uncertainty_name(k)) return k;
    throw Error(ErrorCode::InvalidArgument, "unknown uncertainty measure '" + text + "'");
}

namespace {
void require_steps(const TokenStatsSequence& seq) {
    if (seq.steps.empty()) throw Error(ErrorCode::InvariantViolation, "token statistics sequence has no steps");
}
}  // namespace

double mean_entropy(const TokenStatsSequence& seq) {
    require_steps(seq);
    double s = 0.0;
    for (const auto& st : seq.steps) s += st.entropy;
    return s / static_cast<double>(seq.steps.size());
}

double least_confidence(const TokenStatsSequence& seq, bool per_token) {
    require_steps(seq);
    double log_prob = 0.0;
    for (std::size_t t = 0; t < seq.steps.size(); ++t) {
        const double p = seq.steps[t].chosen_prob;
        if (!(p > 0.0)) throw Error(ErrorCode::ZeroProbability, "chosen_prob is 0 at step " + std::to_string(t));
        log_prob += std::log(p);
    }
    if (per_token) log_prob /= static_cast<double>(seq.steps.size());
    return -std::exp(log_prob);
}

double mean_margin(const TokenStatsSequence& seq) {
    require_steps(seq);
    double s = 0.0;
    for (const auto& st : seq.steps) s += st.top1_prob - st.top2_prob;
    return -s / static_cast<double>(seq.steps.size());
}

double min_margin(const TokenStatsSequence& seq) {
    require_steps(seq);
    double m = seq.steps.front().top1_prob - seq.steps.front().top2_prob;
    for (const auto& st : seq.steps) m = std::min(m, st.top1_prob - st.top2_prob);
    return -m;
}

double uncertainty_score(const TokenStatsSequence& seq, UncertaintyKind kind, UncertaintyOptions opts) {
    switch (kind) {
        case UncertaintyKind::MeanEntropy: return mean_entropy(seq);
        case UncertaintyKind::LeastConfidence: return least_confidence(seq, opts.normalize_least_confidence);
        case UncertaintyKind::MeanMargin: return mean_margin(seq);
        case UncertaintyKind::MinMargin: return min_margin(seq);
    }
    return 0.0;
}

std::vector<double> score_all(std::span<const TokenStatsSequence> stats, UncertaintyKind kind,
                              UncertaintyOptions opts) {
    std::vector<double> scores(stats.size());
    parallel_for(stats.size(), 1024, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) scores[i] = uncertainty_score(stats[i], kind, opts);
    });
    return scores;
}

SelectionResult select_topk(std::span<const double> scores, Budget budget) {
    check_budget(budget, scores.size());
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto before = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(budget.k), order.end(), before);
    order.resize(budget.k);
    return SelectionResult{std::move(order), {}, {}};
}

SelectionResult select_topk_uncertain(std::span<const TokenStatsSequence> stats, UncertaintyKind kind,
                                      Budget budget, UncertaintyOptions opts) {
    check_budget(budget, stats.size());
    const auto scores = score_all(stats, kind, opts);
    return select_topk(scores, budget);
}

}  // namespace selectkit
