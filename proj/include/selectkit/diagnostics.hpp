#pragma once

#include "selectkit/core.hpp"
#include "selectkit/facility_location.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace selectkit {

/// Saturation threshold on greedy gains. When relative, the cut-off is
/// value * (first-step gain) of each curve.
struct GainThreshold {
    double value = 1e-3;
    bool relative = true;
};

struct GainCurve {
    double gamma = 0.0;
    std::vector<std::size_t> ks;  // 1..k
    std::vector<double> gains;
    std::vector<double> objective;
    double threshold = 0.0;  // absolute cut-off applied to this curve
    std::optional<std::size_t> saturation_step;
    // Median RBF similarity over sampled pairs i != j; NaN for a one-row pool.
    double median_offdiag_similarity = 0.0;
};

struct SweepOptions {
    GainThreshold threshold;
    std::size_t pair_samples = 10000;
    std::uint64_t pair_seed = 0;
    FlOptions fl;
};

// First 1-based step whose gain is below `threshold`.
std::optional<std::size_t> saturation_step(std::span<const double> gains, double threshold);

double median_offdiag_rbf(const EmbeddingMatrix& emb, double gamma, std::size_t pairs, std::uint64_t seed);

/// One lazy-greedy facility-location run per kernel width.
std::vector<GainCurve> gain_sweep(const EmbeddingMatrix& emb, std::span<const double> gammas, Budget budget,
                                  const SweepOptions& opts = {});

struct RejectedGamma {
    double gamma = 0.0;
    std::string reason;  // "saturated" or "diagonal"
    std::optional<std::size_t> saturation_step;
    double median_offdiag_similarity = 0.0;
};

struct GammaRecommendation {
    std::vector<double> stable;
    std::vector<RejectedGamma> rejected;
};

GammaRecommendation recommend_gamma_range(std::span<const GainCurve> curves, Budget budget,
                                          double diagonal_floor = 1e-6);

}  // namespace selectkit
