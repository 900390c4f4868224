#include "selectkit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace selectkit::oracle {

namespace {

void check_subset_bounds(std::size_t n, std::size_t k, std::size_t max_n, std::size_t max_k) {
    if (n > max_n || k > max_k)
        throw Error(ErrorCode::InstanceTooLarge, "exhaustive search limited to n <= " + std::to_string(max_n) +
                                                     ", k <= " + std::to_string(max_k));
    if (k < 1 || k > n) throw Error(ErrorCode::BudgetOutOfRange, "k outside [1, n]");
}

// Visits every k-subset of [0, n) in lexicographic order.
void for_each_subset(std::size_t n, std::size_t k, const std::function<void(const std::vector<std::size_t>&)>& fn) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        fn(idx);
        std::size_t pos = k;
        while (pos > 0 && idx[pos - 1] == n - k + (pos - 1)) --pos;
        if (pos == 0) return;
        ++idx[pos - 1];
        for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
}

double point_distance(const EmbeddingMatrix& p, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t t = 0; t < p.d(); ++t) {
        const double diff = p.row(a)[t] - p.row(b)[t];
        s += diff * diff;
    }
    return std::sqrt(s);
}

}  // namespace

double fl_value(const DenseKernel& w, std::span<const std::size_t> set) {
    double total = 0.0;
    for (std::size_t i = 0; i < w.n; ++i) {
        double best = 0.0;
        for (std::size_t j : set) best = std::max(best, w(i, j));
        total += best;
    }
    return total;
}

double mixture_value(const DenseKernel& w, std::span<const double> u, std::span<const std::size_t> set,
                     double weight) {
    double us = 0.0;
    for (std::size_t j : set) us += u[j];
    return fl_value(w, set) + weight * std::log(1.0 + us);
}

double covering_radius(const EmbeddingMatrix& points, std::span<const std::size_t> set) {
    double radius = 0.0;
    for (std::size_t i = 0; i < points.n(); ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t j : set) nearest = std::min(nearest, point_distance(points, i, j));
        radius = std::max(radius, nearest);
    }
    return radius;
}

SubsetOptimum exhaustive_fl_opt(const DenseKernel& w, std::size_t k) {
    check_subset_bounds(w.n, k, kMaxSubsetN, kMaxSubsetK);
    SubsetOptimum best{{}, -std::numeric_limits<double>::infinity()};
    for_each_subset(w.n, k, [&](const std::vector<std::size_t>& s) {
        const double v = fl_value(w, s);
        if (v > best.value) best = {s, v};
    });
    return best;
}

SubsetOptimum exhaustive_mixture_opt(const DenseKernel& w, std::span<const double> u, std::size_t k, double weight) {
    check_subset_bounds(w.n, k, kMaxSubsetN, kMaxSubsetK);
    if (u.size() != w.n) throw Error(ErrorCode::LengthMismatch, "uncertainty count != kernel size");
    SubsetOptimum best{{}, -std::numeric_limits<double>::infinity()};
    for_each_subset(w.n, k, [&](const std::vector<std::size_t>& s) {
        const double v = mixture_value(w, u, s, weight);
        if (v > best.value) best = {s, v};
    });
    return best;
}

SubsetOptimum exhaustive_kcenter_opt(const EmbeddingMatrix& points, std::size_t k) {
    check_subset_bounds(points.n(), k, kMaxSubsetN, kMaxSubsetK);
    SubsetOptimum best{{}, std::numeric_limits<double>::infinity()};
    for_each_subset(points.n(), k, [&](const std::vector<std::size_t>& s) {
        const double r = covering_radius(points, s);
        if (r < best.value) best = {s, r};
    });
    return best;
}

SubsetOptimum exhaustive_topk(std::span<const double> scores, std::size_t k) {
    if (scores.size() > kMaxTopkN)
        throw Error(ErrorCode::InstanceTooLarge, "exhaustive top-k limited to n <= " + std::to_string(kMaxTopkN));
    if (k < 1 || k > scores.size()) throw Error(ErrorCode::BudgetOutOfRange, "k outside [1, n]");
    // Many sets can share the optimal minimum. Among those, prefer the larger
    // descending score profile, then the lexicographically smallest set; this
    // singles out the top-k set with lowest-index tie-breaking.
    auto profile = [&](const std::vector<std::size_t>& s) {
        std::vector<double> v;
        for (std::size_t j : s) v.push_back(scores[j]);
        std::sort(v.begin(), v.end(), std::greater<>());
        return v;
    };
    SubsetOptimum best{{}, -std::numeric_limits<double>::infinity()};
    std::vector<double> best_profile;
    for_each_subset(scores.size(), k, [&](const std::vector<std::size_t>& s) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j : s) m = std::min(m, scores[j]);
        if (m < best.value) return;
        if (m == best.value) {
            auto p = profile(s);
            if (!(p > best_profile)) return;
            best_profile = std::move(p);
            best = {s, m};
            return;
        }
        best = {s, m};
        best_profile = profile(s);
    });
    return best;
}

DenseKernel naive_sq_distances(const EmbeddingMatrix& emb) {
    DenseKernel out{emb.n(), std::vector<double>(emb.n() * emb.n())};
    for (std::size_t i = 0; i < emb.n(); ++i)
        for (std::size_t j = 0; j < emb.n(); ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < emb.d(); ++t) {
                const double diff = emb.row(i)[t] - emb.row(j)[t];
                s += diff * diff;
            }
            out.values[i * emb.n() + j] = s;
        }
    return out;
}

DenseKernel naive_kernel(const EmbeddingMatrix& emb, const KernelSpec& spec) {
    if (spec.is_rbf()) {
        DenseKernel out = naive_sq_distances(emb);
        for (double& v : out.values) v = std::exp(-v / spec.gamma());
        return out;
    }
    DenseKernel out{emb.n(), std::vector<double>(emb.n() * emb.n())};
    for (std::size_t i = 0; i < emb.n(); ++i)
        for (std::size_t j = 0; j < emb.n(); ++j) {
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (std::size_t t = 0; t < emb.d(); ++t) {
                dot += emb.row(i)[t] * emb.row(j)[t];
                ni += emb.row(i)[t] * emb.row(i)[t];
                nj += emb.row(j)[t] * emb.row(j)[t];
            }
            if (ni == 0.0 || nj == 0.0) throw Error(ErrorCode::ZeroNormRow, "zero row in cosine kernel");
            out.values[i * emb.n() + j] = std::max(0.0, dot / (std::sqrt(ni) * std::sqrt(nj)));
        }
    return out;
}

}  // namespace selectkit::oracle
