#pragma once

#include "selectkit/core.hpp"
#include "selectkit/kernels.hpp"

#include <cstdint>
#include <variant>

namespace selectkit {

struct MedoidStart {};
struct IndexStart {
    std::size_t index = 0;
};
struct RandomStart {
    std::uint64_t seed = 0;
};
using KCenterSeed = std::variant<MedoidStart, IndexStart, RandomStart>;

// "medoid", "index:I" or "random:SEED"
KCenterSeed parse_kcenter_seed(const std::string& text);
std::string kcenter_seed_to_string(const KCenterSeed& seed);

// Row closest (squared Euclidean) to the pool mean; lowest index on ties.
std::size_t medoid_index(const EmbeddingMatrix& emb);

/// Farthest-first traversal. objective_trace[t] is the covering radius
/// sqrt(max_i min_j ||f_i - f_j||^2) after t+1 centers; gains stay empty.
SelectionResult kcenter_greedy(const EmbeddingMatrix& emb, Budget budget, KCenterSeed seed = MedoidStart{},
                               KernelOptions opts = {});

}  // namespace selectkit
