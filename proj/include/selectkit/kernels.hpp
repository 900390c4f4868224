#pragma once

#include "selectkit/core.hpp"
#include "selectkit/simd.hpp"

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

namespace selectkit {

// exp(-||fi - fj||^2 / gamma) via the norm expansion, clamped at zero distance.
double rbf_similarity(std::span<const double> fi, std::span<const double> fj, double gamma);

// max(0, cos(fi, fj)). Throws ZeroNormRow for a zero vector.
double cosine_clipped_similarity(std::span<const double> fi, std::span<const double> fj);

struct SimilarityColumn {
    std::size_t j = 0;
    std::vector<double> values;
};

struct KernelOptions {
    // Rows per tile when streaming the pool against a candidate batch.
    std::size_t block_rows = 128;
    // Pools at or below this size get the full kernel precomputed.
    std::size_t dense_threshold = 8192;
    // LRU capacity in columns for on-demand evaluation (0 = off).
    std::size_t cache_columns = 0;
};

enum class ColumnKind { Similarity, SquaredDistance };

/// Produces kernel (or squared distance) columns for an embedding pool.
///
/// Columns are computed on demand in row tiles; no n x n buffer is allocated
/// unless the pool is at most `dense_threshold`. Entry (i, j) is computed by
/// exactly the same arithmetic whatever the tile size, batch composition or
/// thread count, so downstream greedy decisions never depend on those.
class ColumnEvaluator {
public:
    ColumnEvaluator(const EmbeddingMatrix& emb, ColumnKind kind, std::optional<KernelSpec> spec,
                    KernelOptions opts = {});

    static ColumnEvaluator similarity(const EmbeddingMatrix& emb, const KernelSpec& spec, KernelOptions opts = {}) {
        return ColumnEvaluator(emb, ColumnKind::Similarity, spec, opts);
    }
    static ColumnEvaluator sq_distance(const EmbeddingMatrix& emb, KernelOptions opts = {}) {
        return ColumnEvaluator(emb, ColumnKind::SquaredDistance, std::nullopt, opts);
    }

    std::size_t n() const noexcept { return emb_->n(); }
    const simd::KernelTable& table() const noexcept { return *table_; }
    bool dense() const noexcept { return !dense_.empty(); }

    // out.size() == n
    void column(std::size_t j, std::span<double> out) const;

    // out.size() == js.size() * n; column c lands at out[c*n, (c+1)*n).
    void columns(std::span<const std::size_t> js, std::span<double> out) const;

    // As columns(), except that an RBF entry whose squared distance exceeds
    // skip_sq[i] comes back as 0. On demand, such rows are mostly discarded
    // before their dot product by triangle-inequality bounds through anchor
    // rows; entries that are computed match columns() bitwise. Dense and
    // cached evaluators return full columns.
    void columns_pruned(std::span<const std::size_t> js, std::span<const double> skip_sq,
                        std::span<double> out) const;

    // sums[j] equals table().gain_sum(column j, zeros) bitwise. On demand,
    // each off-diagonal pair is computed once and credited to both columns
    // in the lane order gain_sum uses.
    void column_sums(std::span<double> sums) const;

private:
    struct Anchors;
    const Anchors& anchors() const;
    // finish = false leaves raw dot products.
    void compute(std::span<const std::size_t> js, std::span<double> out, bool finish = true) const;
    void transform(std::size_t j, std::size_t i0, std::size_t count, double* vals) const;

    const EmbeddingMatrix* emb_;
    ColumnKind kind_;
    std::optional<KernelSpec> spec_;
    KernelOptions opts_;
    const simd::KernelTable* table_;
    std::vector<double> norms_;
    std::vector<double> dense_;

    struct Cache {
        std::mutex mu;
        std::list<std::size_t> order;
        std::unordered_map<std::size_t, std::pair<std::list<std::size_t>::iterator, std::vector<double>>> map;
    };
    std::unique_ptr<Cache> cache_;

    struct LazyAnchors {
        std::once_flag once;
        std::shared_ptr<const Anchors> value;
    };
    std::unique_ptr<LazyAnchors> anchors_ = std::make_unique<LazyAnchors>();
};

SimilarityColumn similarity_column(const EmbeddingMatrix& emb, std::size_t j, const KernelSpec& spec,
                                   KernelOptions opts = {});

std::vector<double> pairwise_sq_distance_column(const EmbeddingMatrix& emb, std::size_t j, KernelOptions opts = {});

// ZeroNormRow if the clipped cosine kernel is requested on a pool with a zero row.
void check_kernel_applicable(const EmbeddingMatrix& emb, const KernelSpec& spec);

}  // namespace selectkit
