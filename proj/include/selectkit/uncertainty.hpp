#pragma once

#include "selectkit/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace selectkit {

enum class UncertaintyKind { MeanEntropy, LeastConfidence, MeanMargin, MinMargin };

const char* uncertainty_name(UncertaintyKind kind);
// Accepts the CLI spellings: mean-entropy, least-confidence, mean-margin, min-margin.
UncertaintyKind parse_uncertainty(const std::string& text);

/// Mean per-step Shannon entropy in nats; larger means more uncertain.
double mean_entropy(const TokenStatsSequence& seq);

/// -prod(chosen_prob), evaluated in log space. With per_token set, the
/// geometric mean replaces the product so long generations are not favoured.
/// Throws ZeroProbability when any chosen_prob is 0.
double least_confidence(const TokenStatsSequence& seq, bool per_token = false);

double mean_margin(const TokenStatsSequence& seq);
double min_margin(const TokenStatsSequence& seq);

struct UncertaintyOptions {
    bool normalize_least_confidence = false;
};

double uncertainty_score(const TokenStatsSequence& seq, UncertaintyKind kind, UncertaintyOptions opts = {});

// One score per prompt, computed in parallel.
std::vector<double> score_all(std::span<const TokenStatsSequence> stats, UncertaintyKind kind,
                              UncertaintyOptions opts = {});

/// Indices of the k largest scores, sorted by descending score, ties by
/// ascending index. This is the maximizer of min_{x in S} U(x) over |S| = k.
SelectionResult select_topk(std::span<const double> scores, Budget budget);

SelectionResult select_topk_uncertain(std::span<const TokenStatsSequence> stats, UncertaintyKind kind,
                                      Budget budget, UncertaintyOptions opts = {});

}  // namespace selectkit
