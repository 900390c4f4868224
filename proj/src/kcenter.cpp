#include "selectkit/kcenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace selectkit {

KCenterSeed parse_kcenter_seed(const std::string& text) {
    if (text == "medoid") return MedoidStart{};
    auto number_after = [&](std::size_t prefix) {
        const std::string num = text.substr(prefix);
        char* end = nullptr;
        const unsigned long long v = std::strtoull(num.c_str(), &end, 10);
        if (num.empty() || *end != '\0') throw Error(ErrorCode::InvalidArgument, "bad k-center start '" + text + "'");
        return v;
    };
    if (text.rfind("index:", 0) == 0) return IndexStart{static_cast<std::size_t>(number_after(6))};
    if (text.rfind("random:", 0) == 0) return RandomStart{number_after(7)};
    throw Error(ErrorCode::InvalidArgument, "unknown k-center start '" + text + "' (medoid|index:I|random:SEED)");
}

std::string kcenter_seed_to_string(const KCenterSeed& seed) {
    if (std::holds_alternative<IndexStart>(seed)) return "index:" + std::to_string(std::get<IndexStart>(seed).index);
    if (std::holds_alternative<RandomStart>(seed)) return "random:" + std::to_string(std::get<RandomStart>(seed).seed);
    return "medoid";
}

std::size_t medoid_index(const EmbeddingMatrix& emb) {
    const std::size_t n = emb.n();
    const std::size_t d = emb.d();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = emb.row(i);
        for (std::size_t t = 0; t < d; ++t) mean[t] += r[t];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    std::size_t best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = emb.row(i);
        double sq = 0.0;
        for (std::size_t t = 0; t < d; ++t) sq += (r[t] - mean[t]) * (r[t] - mean[t]);
        if (sq < best_sq) {
            best_sq = sq;
            best = i;
        }
    }
    return best;
}

SelectionResult kcenter_greedy(const EmbeddingMatrix& emb, Budget budget, KCenterSeed seed, KernelOptions opts) {
    const std::size_t n = emb.n();
    check_budget(budget, n);
    // Only k columns are ever needed.
    opts.dense_threshold = 0;
    const auto eval = ColumnEvaluator::sq_distance(emb, opts);
    const auto& simd = eval.table();

    std::size_t first = 0;
    if (std::holds_alternative<IndexStart>(seed)) {
        first = std::get<IndexStart>(seed).index;
        if (first >= n) throw Error(ErrorCode::InvalidArgument, "k-center start index out of range");
    } else if (std::holds_alternative<RandomStart>(seed)) {
        Rng rng(std::get<RandomStart>(seed).seed);
        first = static_cast<std::size_t>(rng.below(n));
    } else {
        first = medoid_index(emb);
    }

    SelectionResult result;
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    std::vector<double> col(n);
    std::vector<char> chosen(n, 0);
    std::size_t next = first;
    for (std::size_t t = 0; t < budget.k; ++t) {
        result.indices.push_back(next);
        chosen[next] = 1;
        eval.column(next, col);
        simd.min_update(min_dist.data(), col.data(), n);
        // argmax over unchosen points, lowest index on ties; the radius still
        // ranges over the whole pool (chosen points sit at distance 0).
        std::size_t far = 0;
        double far_sq = -1.0;
        double radius_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            radius_sq = std::max(radius_sq, min_dist[i]);
            if (!chosen[i] && min_dist[i] > far_sq) {
                far_sq = min_dist[i];
                far = i;
            }
        }
        result.objective_trace.push_back(std::sqrt(radius_sq));
        next = far;
    }
    return result;
}

}  // namespace selectkit
