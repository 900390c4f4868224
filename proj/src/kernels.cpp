#include "selectkit/kernels.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>

namespace selectkit {

namespace {

void require_same_dim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

inline double sq_from_dot(double ni, double nj, double dot) { return std::max(0.0, (ni + nj) - 2.0 * dot); }

inline double rbf_from_dot(double ni, double nj, double dot, double gamma) {
    return std::exp(-sq_from_dot(ni, nj, dot) / gamma);
}

// Identical rows give exactly 1: sqrt(n * n) rounds back to n.
inline double cosine_from_dot(double dot, double ni, double nj) {
    return std::clamp(dot / std::sqrt(ni * nj), 0.0, 1.0);
}

}  // namespace

double rbf_similarity(std::span<const double> fi, std::span<const double> fj, double gamma) {
    require_same_dim(fi, fj);
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
    const auto& k = simd::active();
    const double ni = k.dot(fi.data(), fi.data(), fi.size());
    const double nj = k.dot(fj.data(), fj.data(), fj.size());
    return rbf_from_dot(ni, nj, k.dot(fi.data(), fj.data(), fi.size()), gamma);
}

double cosine_clipped_similarity(std::span<const double> fi, std::span<const double> fj) {
    require_same_dim(fi, fj);
    const auto& k = simd::active();
    const double ni = k.dot(fi.data(), fi.data(), fi.size());
    const double nj = k.dot(fj.data(), fj.data(), fj.size());
    if (ni == 0.0 || nj == 0.0) throw Error(ErrorCode::ZeroNormRow, "cosine similarity of a zero vector");
    return cosine_from_dot(k.dot(fi.data(), fj.data(), fi.size()), ni, nj);
}

void check_kernel_applicable(const EmbeddingMatrix& emb, const KernelSpec& spec) {
    if (spec.is_rbf()) return;
    const auto norms = emb.row_sq_norms();
    for (std::size_t i = 0; i < norms.size(); ++i)
        if (norms[i] == 0.0) throw Error(ErrorCode::ZeroNormRow, "row " + std::to_string(i) + " has zero norm");
}

ColumnEvaluator::ColumnEvaluator(const EmbeddingMatrix& emb, ColumnKind kind, std::optional<KernelSpec> spec,
                                 KernelOptions opts)
    : emb_(&emb), kind_(kind), spec_(spec), opts_(opts), table_(&simd::active()) {
    if (kind_ == ColumnKind::Similarity && !spec_)
        throw Error(ErrorCode::InvalidArgument, "similarity columns need a kernel spec");
    opts_.block_rows = std::max<std::size_t>(1, opts_.block_rows);
    const std::size_t n = emb.n();
    const std::size_t d = emb.d();

    // Norms come from the same dot routine as the pairwise products, which
    // makes the distance between identical rows exactly zero.
    norms_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = emb.data().data() + i * d;
        norms_[i] = table_->dot(r, r, d);
    }
    if (kind_ == ColumnKind::Similarity && !spec_->is_rbf()) {
        for (std::size_t i = 0; i < n; ++i)
            if (norms_[i] == 0.0) throw Error(ErrorCode::ZeroNormRow, "row " + std::to_string(i) + " has zero norm");
    }

    if (n <= opts_.dense_threshold) {
        dense_.resize(n * n);
        constexpr std::size_t kBatch = 32;
        std::vector<std::size_t> js;
        for (std::size_t j0 = 0; j0 < n; j0 += kBatch) {
            js.clear();
            for (std::size_t j = j0; j < std::min(n, j0 + kBatch); ++j) js.push_back(j);
            compute(js, std::span<double>(dense_.data() + j0 * n, js.size() * n));
        }
    } else if (opts_.cache_columns > 0) {
        cache_ = std::make_unique<Cache>();
    }
}

void ColumnEvaluator::transform(std::size_t j, std::size_t i0, std::size_t count, double* vals) const {
    if (kind_ == ColumnKind::SquaredDistance) {
        const double nj = norms_[j];
        for (std::size_t r = 0; r < count; ++r) vals[r] = sq_from_dot(norms_[i0 + r], nj, vals[r]);
    } else if (spec_->is_rbf()) {
        const double nj = norms_[j];
        const double gamma = spec_->gamma();
        for (std::size_t r = 0; r < count; ++r) vals[r] = rbf_from_dot(norms_[i0 + r], nj, vals[r], gamma);
    } else {
        const double nj = norms_[j];
        for (std::size_t r = 0; r < count; ++r) vals[r] = cosine_from_dot(vals[r], norms_[i0 + r], nj);
    }
    if (j >= i0 && j < i0 + count) vals[j - i0] = kind_ == ColumnKind::SquaredDistance ? 0.0 : 1.0;
}

void ColumnEvaluator::compute(std::span<const std::size_t> js, std::span<double> out, bool finish) const {
    const std::size_t n = emb_->n();
    const std::size_t d = emb_->d();
    const double* base = emb_->data().data();
    std::vector<const double*> cands(js.size());
    for (std::size_t c = 0; c < js.size(); ++c) cands[c] = base + js[c] * d;

    const std::size_t tile = opts_.block_rows;
    const std::size_t tiles = (n + tile - 1) / tile;
    parallel_for(tiles, 4, [&](std::size_t tb, std::size_t te) {
        for (std::size_t t = tb; t < te; ++t) {
            const std::size_t i0 = t * tile;
            const std::size_t cnt = std::min(tile, n - i0);
            table_->dot_block(base + i0 * d, cnt, d, cands.data(), cands.size(), out.data() + i0, n);
            if (!finish) continue;
            for (std::size_t c = 0; c < js.size(); ++c) transform(js[c], i0, cnt, out.data() + c * n + i0);
        }
    });
}

void ColumnEvaluator::column(std::size_t j, std::span<double> out) const {
    const std::size_t idx[1] = {j};
    columns(idx, out);
}

void ColumnEvaluator::columns(std::span<const std::size_t> js, std::span<double> out) const {
    const std::size_t n = emb_->n();
    if (out.size() != js.size() * n)
        throw Error(ErrorCode::DimensionMismatch, "column buffer has wrong size");
    for (std::size_t j : js)
        if (j >= n) throw Error(ErrorCode::InvalidArgument, "column index " + std::to_string(j) + " out of range");

    if (!dense_.empty()) {
        for (std::size_t c = 0; c < js.size(); ++c)
            std::copy_n(dense_.data() + js[c] * n, n, out.data() + c * n);
        return;
    }
    if (!cache_) {
        compute(js, out);
        return;
    }

    std::vector<std::size_t> miss_pos;
    std::vector<std::size_t> miss_js;
    {
        std::lock_guard lock(cache_->mu);
        for (std::size_t c = 0; c < js.size(); ++c) {
            auto it = cache_->map.find(js[c]);
            if (it == cache_->map.end()) {
                miss_pos.push_back(c);
                miss_js.push_back(js[c]);
                continue;
            }
            cache_->order.splice(cache_->order.begin(), cache_->order, it->second.first);
            std::copy(it->second.second.begin(), it->second.second.end(), out.data() + c * n);
        }
    }
    if (miss_js.empty()) return;
    std::vector<double> fresh(miss_js.size() * n);
    compute(miss_js, fresh);
    std::lock_guard lock(cache_->mu);
    for (std::size_t m = 0; m < miss_js.size(); ++m) {
        const double* src = fresh.data() + m * n;
        std::copy_n(src, n, out.data() + miss_pos[m] * n);
        if (cache_->map.count(miss_js[m])) continue;
        if (cache_->map.size() >= opts_.cache_columns) {
            cache_->map.erase(cache_->order.back());
            cache_->order.pop_back();
        }
        cache_->order.push_front(miss_js[m]);
        cache_->map.emplace(miss_js[m], std::make_pair(cache_->order.begin(), std::vector<double>(src, src + n)));
    }
}

// Rows grouped by nearest anchor. Distances carry rounding slack so every
// bound holds for the exact values, not just the computed ones.
struct ColumnEvaluator::Anchors {
    std::vector<std::size_t> rows;         // anchor row ids
    std::vector<std::size_t> members;      // row ids grouped by anchor
    std::vector<std::size_t> begin;        // group g is members[begin[g], begin[g+1])
    std::vector<std::size_t> group_of;     // per row
    std::vector<double> reach;             // per row: upper bound on distance to its anchor
    std::vector<double> radius;            // per group: max reach
    double sq_err = 0.0;                   // bound on |computed - exact| squared distance
};

const ColumnEvaluator::Anchors& ColumnEvaluator::anchors() const {
    std::call_once(anchors_->once, [&] {
        const std::size_t n = emb_->n();
        const std::size_t d = emb_->d();
        const double* base = emb_->data().data();
        auto a = std::make_shared<Anchors>();

        // Squared distance via the norm expansion is off by at most about
        // (2d + 4) u (|x|^2 + |y|^2); the bound below doubles that.
        const double max_norm = n ? *std::max_element(norms_.begin(), norms_.end()) : 0.0;
        a->sq_err = static_cast<double>(d + 4) * 4.0 * DBL_EPSILON * max_norm;

        // Farthest-first traversal over a seeded subsample spreads the
        // anchors over every well-separated region of the pool.
        const std::size_t want =
            std::clamp<std::size_t>(static_cast<std::size_t>(2.0 * std::sqrt(static_cast<double>(n))), 1, 2048);
        const std::size_t pool = std::min(n, 16 * want);
        std::vector<std::size_t> ids(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = i;
        Rng rng(0x616e63686f72ULL);
        for (std::size_t c = 0; c < pool; ++c) std::swap(ids[c], ids[c + rng.below(n - c)]);
        ids.resize(pool);
        const std::size_t m = std::min(want, pool);
        std::vector<double> gap(pool, INFINITY);
        std::size_t next = 0;
        for (std::size_t c = 0; c < m; ++c) {
            const std::size_t ac = ids[next];
            a->rows.push_back(ac);
            const double* xa = base + ac * d;
            std::size_t far = 0;
            for (std::size_t s = 0; s < pool; ++s) {
                const double sq = sq_from_dot(norms_[ids[s]], norms_[ac], table_->dot(base + ids[s] * d, xa, d));
                gap[s] = std::min(gap[s], sq);
                if (gap[s] > gap[far]) far = s;
            }
            next = far;
        }
        std::sort(a->rows.begin(), a->rows.end());
        a->rows.erase(std::unique(a->rows.begin(), a->rows.end()), a->rows.end());

        const std::size_t groups = a->rows.size();
        std::vector<const double*> cands(groups);
        for (std::size_t c = 0; c < groups; ++c) cands[c] = base + a->rows[c] * d;
        a->group_of.resize(n);
        a->reach.resize(n);
        const std::size_t tile = opts_.block_rows;
        const std::size_t tiles = (n + tile - 1) / tile;
        parallel_for(tiles, 1, [&](std::size_t tb, std::size_t te) {
            std::vector<double> out(tile * groups);
            for (std::size_t t = tb; t < te; ++t) {
                const std::size_t i0 = t * tile;
                const std::size_t cnt = std::min(tile, n - i0);
                table_->dot_block(base + i0 * d, cnt, d, cands.data(), groups, out.data(), cnt);
                for (std::size_t r = 0; r < cnt; ++r) {
                    std::size_t best = 0;
                    double best_sq = INFINITY;
                    for (std::size_t c = 0; c < groups; ++c) {
                        const double sq = sq_from_dot(norms_[i0 + r], norms_[a->rows[c]], out[c * cnt + r]);
                        if (sq < best_sq) {
                            best_sq = sq;
                            best = c;
                        }
                    }
                    a->group_of[i0 + r] = best;
                    a->reach[i0 + r] = std::sqrt(best_sq + a->sq_err) * (1.0 + 1e-12);
                }
            }
        });

        a->begin.assign(groups + 1, 0);
        for (std::size_t i = 0; i < n; ++i) ++a->begin[a->group_of[i] + 1];
        for (std::size_t g = 0; g < groups; ++g) a->begin[g + 1] += a->begin[g];
        a->members.resize(n);
        std::vector<std::size_t> fill(a->begin.begin(), a->begin.end() - 1);
        for (std::size_t i = 0; i < n; ++i) a->members[fill[a->group_of[i]]++] = i;
        a->radius.assign(groups, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            a->radius[a->group_of[i]] = std::max(a->radius[a->group_of[i]], a->reach[i]);
        anchors_->value = std::move(a);
    });
    return *anchors_->value;
}

void ColumnEvaluator::columns_pruned(std::span<const std::size_t> js, std::span<const double> skip_sq,
                                     std::span<double> out) const {
    const std::size_t n = emb_->n();
    if (!dense_.empty() || cache_ || kind_ != ColumnKind::Similarity || !spec_->is_rbf()) {
        columns(js, out);
        return;
    }
    if (out.size() != js.size() * n || skip_sq.size() != n)
        throw Error(ErrorCode::DimensionMismatch, "column buffer has wrong size");
    for (std::size_t j : js)
        if (j >= n) throw Error(ErrorCode::InvalidArgument, "column index " + std::to_string(j) + " out of range");

    const Anchors& a = anchors();
    const std::size_t m = a.rows.size();
    const std::size_t d = emb_->d();
    const double* base = emb_->data().data();
    const double gamma = spec_->gamma();
    const double err = a.sq_err;
    std::vector<double> group_skip(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) group_skip[a.group_of[i]] = std::max(group_skip[a.group_of[i]], skip_sq[i]);

    // True distance at least `lower` puts the computed squared distance
    // above `skip`. The subtraction absorbs the rounding of lower itself.
    auto beyond = [err](double lower, double slack, double skip) {
        lower -= slack;
        return lower > 0.0 && lower * lower * (1.0 - 1e-12) > skip + err;
    };

    // Distances from every candidate to every anchor, and the rows left in
    // groups the group-level bound cannot rule out.
    std::vector<double> to_anchor(js.size() * m);
    std::vector<std::uint8_t> open(js.size() * m);
    std::vector<std::size_t> open_rows(js.size(), 0);
    parallel_for(js.size(), 1, [&](std::size_t cb, std::size_t ce) {
        for (std::size_t c = cb; c < ce; ++c) {
            const double* xj = base + js[c] * d;
            const double nj = norms_[js[c]];
            for (std::size_t g = 0; g < m; ++g) {
                const std::size_t ag = a.rows[g];
                const double sq_a = sq_from_dot(norms_[ag], nj, table_->dot(base + ag * d, xj, d));
                const double t = std::sqrt(std::max(0.0, sq_a - err)) * (1.0 - 1e-12);
                to_anchor[c * m + g] = t;
                const bool keep = !beyond(t - a.radius[g], 4 * DBL_EPSILON * (t + a.radius[g]), group_skip[g]);
                open[c * m + g] = keep;
                if (keep) open_rows[c] += a.begin[g + 1] - a.begin[g];
            }
        }
    });

    // Candidates with most rows open go through the blocked pass, which
    // beats row-by-row dot products well before every row is needed.
    std::vector<std::size_t> dense_pos, dense_js;
    for (std::size_t c = 0; c < js.size(); ++c) {
        if (open_rows[c] * 4 > n) {
            dense_pos.push_back(c);
            dense_js.push_back(js[c]);
        }
    }
    if (!dense_js.empty()) {
        std::vector<double> block(dense_js.size() * n);
        compute(dense_js, block, false);
        parallel_for(dense_js.size(), 1, [&](std::size_t cb, std::size_t ce) {
            for (std::size_t k = cb; k < ce; ++k) {
                const std::size_t j = dense_js[k];
                const double nj = norms_[j];
                const double* dots = block.data() + k * n;
                double* col = out.data() + dense_pos[k] * n;
                for (std::size_t i = 0; i < n; ++i) {
                    const double sq = sq_from_dot(norms_[i], nj, dots[i]);
                    col[i] = sq > skip_sq[i] ? 0.0 : std::exp(-sq / gamma);
                }
                col[j] = 1.0;
            }
        });
    }

    parallel_for(js.size(), 1, [&](std::size_t cb, std::size_t ce) {
        for (std::size_t c = cb; c < ce; ++c) {
            if (open_rows[c] * 4 > n) continue;
            const std::size_t j = js[c];
            const double* xj = base + j * d;
            const double nj = norms_[j];
            double* col = out.data() + c * n;
            std::fill(col, col + n, 0.0);
            for (std::size_t g = 0; g < m; ++g) {
                if (!open[c * m + g]) continue;
                const double t = to_anchor[c * m + g];
                for (std::size_t p = a.begin[g]; p < a.begin[g + 1]; ++p) {
                    const std::size_t i = a.members[p];
                    if (beyond(t - a.reach[i], 4 * DBL_EPSILON * (t + a.reach[i]), skip_sq[i])) continue;
                    const double sq = sq_from_dot(norms_[i], nj, table_->dot(base + i * d, xj, d));
                    col[i] = sq > skip_sq[i] ? 0.0 : std::exp(-sq / gamma);
                }
            }
            col[j] = 1.0;
        }
    });
}

void ColumnEvaluator::column_sums(std::span<double> sums) const {
    const std::size_t n = emb_->n();
    if (sums.size() != n) throw Error(ErrorCode::DimensionMismatch, "sums buffer has wrong size");
    const auto& tb = *table_;
    if (!dense_.empty()) {
        const std::vector<double> zeros(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) sums[j] = tb.gain_sum(dense_.data() + j * n, zeros.data(), n);
        return;
    }

    const std::size_t lanes = tb.lanes;
    const std::size_t full = n - n % lanes;
    const std::size_t ntail = n - full;
    std::vector<double> acc(n * lanes, 0.0);
    std::vector<double> tail(n * ntail, 0.0);
    // Rows reach each column in ascending order, as in gain_sum.
    auto credit = [&](std::size_t col, std::size_t row, double w) {
        if (row < full)
            acc[col * lanes + row % lanes] += w;
        else
            tail[col * ntail + row - full] = w;
    };

    const std::size_t d = emb_->d();
    const double* base = emb_->data().data();
    const std::size_t tile = opts_.block_rows;
    constexpr std::size_t kChunk = 64;
    std::vector<double> block;
    std::vector<std::size_t> starts;
    for (std::size_t i0 = 0; i0 < n; i0 += tile) {
        const std::size_t rows = std::min(tile, n - i0);
        block.resize((n - i0) * rows);
        // The first chunk is the diagonal tile, so rows i0.. reach their own
        // columns before any row beyond the tile does.
        starts.assign(1, i0);
        for (std::size_t j = i0 + rows; j < n; j += kChunk) starts.push_back(j);
        parallel_for(starts.size(), 1, [&](std::size_t sb, std::size_t se) {
            std::vector<const double*> cands;
            for (std::size_t s = sb; s < se; ++s) {
                const std::size_t j0 = starts[s];
                const std::size_t j1 = s + 1 < starts.size() ? starts[s + 1] : n;
                cands.clear();
                for (std::size_t j = j0; j < j1; ++j) cands.push_back(base + j * d);
                double* out = block.data() + (j0 - i0) * rows;
                tb.dot_block(base + i0 * d, rows, d, cands.data(), cands.size(), out, rows);
                for (std::size_t c = 0; c < cands.size(); ++c) {
                    transform(j0 + c, i0, rows, out + c * rows);
                    for (std::size_t r = 0; r < rows; ++r) credit(j0 + c, i0 + r, out[c * rows + r]);
                }
            }
        });
        // The same entries read transposed: columns of this tile, rows beyond it.
        for (std::size_t j = i0 + rows; j < n; ++j)
            for (std::size_t r = 0; r < rows; ++r) credit(i0 + r, j, block[(j - i0) * rows + r]);
    }

    for (std::size_t j = 0; j < n; ++j) {
        double s = tb.lane_reduce(acc.data() + j * lanes);
        for (std::size_t t = 0; t < ntail; ++t) {
            const double w = tail[j * ntail + t];
            s += w > 0.0 ? w : 0.0;
        }
        sums[j] = s;
    }
}

SimilarityColumn similarity_column(const EmbeddingMatrix& emb, std::size_t j, const KernelSpec& spec,
                                   KernelOptions opts) {
    opts.dense_threshold = 0;
    opts.cache_columns = 0;
    SimilarityColumn col{j, std::vector<double>(emb.n())};
    ColumnEvaluator::similarity(emb, spec, opts).column(j, col.values);
    return col;
}

std::vector<double> pairwise_sq_distance_column(const EmbeddingMatrix& emb, std::size_t j, KernelOptions opts) {
    opts.dense_threshold = 0;
    opts.cache_columns = 0;
    std::vector<double> out(emb.n());
    ColumnEvaluator::sq_distance(emb, opts).column(j, out);
    return out;
}

}  // namespace selectkit
