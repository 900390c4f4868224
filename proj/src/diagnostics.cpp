#include "selectkit/diagnostics.hpp"

#include "selectkit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace selectkit {

std::optional<std::size_t> saturation_step(std::span<const double> gains, double threshold) {
    for (std::size_t t = 0; t < gains.size(); ++t)
        if (gains[t] < threshold) return t + 1;
    return std::nullopt;
}

double median_offdiag_rbf(const EmbeddingMatrix& emb, double gamma, std::size_t pairs, std::uint64_t seed) {
    const std::size_t n = emb.n();
    if (n < 2 || pairs == 0) return std::numeric_limits<double>::quiet_NaN();
    Rng rng(seed);
    std::vector<double> sims;
    sims.reserve(pairs);
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t i = rng.below(n);
        std::size_t j = rng.below(n - 1);
        if (j >= i) ++j;
        sims.push_back(rbf_similarity(emb.row(i), emb.row(j), gamma));
    }
    const std::size_t mid = sims.size() / 2;
    std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(mid), sims.end());
    if (sims.size() % 2 == 1) return sims[mid];
    const double hi = sims[mid];
    const double lo = *std::max_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

std::vector<GainCurve> gain_sweep(const EmbeddingMatrix& emb, std::span<const double> gammas, Budget budget,
                                  const SweepOptions& opts) {
    if (gammas.empty()) throw Error(ErrorCode::InvalidArgument, "gamma list is empty");
    check_budget(budget, emb.n());
    if (!(opts.threshold.value >= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be >= 0");
    std::vector<GainCurve> curves;
    curves.reserve(gammas.size());
    for (double gamma : gammas) {
        const auto run = fl_greedy_lazy(emb, KernelSpec::rbf(gamma), budget, std::nullopt, opts.fl);
        GainCurve c;
        c.gamma = gamma;
        c.gains = run.gains;
        c.objective = run.objective_trace;
        for (std::size_t t = 1; t <= run.gains.size(); ++t) c.ks.push_back(t);
        c.threshold = opts.threshold.relative ? opts.threshold.value * run.gains.front() : opts.threshold.value;
        c.saturation_step = saturation_step(c.gains, c.threshold);
        c.median_offdiag_similarity = median_offdiag_rbf(emb, gamma, opts.pair_samples, opts.pair_seed);
        curves.push_back(std::move(c));
    }
    return curves;
}

GammaRecommendation recommend_gamma_range(std::span<const GainCurve> curves, Budget budget, double diagonal_floor) {
    if (curves.empty()) throw Error(ErrorCode::EmptyCurveSet, "no gain curves to assess");
    GammaRecommendation rec;
    for (const auto& c : curves) {
        if (c.gains.size() != budget.k)
            throw Error(ErrorCode::InvalidArgument, "curve length does not match the shared budget");
        if (c.median_offdiag_similarity < diagonal_floor) {
            rec.rejected.push_back({c.gamma, "diagonal", c.saturation_step, c.median_offdiag_similarity});
        } else if (c.saturation_step) {
            rec.rejected.push_back({c.gamma, "saturated", c.saturation_step, c.median_offdiag_similarity});
        } else {
            rec.stable.push_back(c.gamma);
        }
    }
    return rec;
}

}  // namespace selectkit
