#pragma once

#include "selectkit/core.hpp"
#include "selectkit/diagnostics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace selectkit::io {

// Embedding file layout (all integers little-endian):
//   "SKEM" | version u32 | n u64 | d u32 | dtype u8 | provenance length u32 |
//   provenance UTF-8 bytes | n*d values, row-major
inline constexpr char kEmbeddingMagic[4] = {'S', 'K', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

enum class Dtype : std::uint8_t { F32 = 1, F64 = 2 };

struct EmbeddingFile {
    EmbeddingMatrix matrix;
    std::string provenance;
    Dtype dtype = Dtype::F32;
};

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& emb, const std::string& provenance,
                      Dtype dtype = Dtype::F32, bool allow_empty_provenance = false);
EmbeddingFile read_embeddings(const std::filesystem::path& path, bool allow_empty_provenance = false);

// One JSON object per line: {"id": i, "steps": [[entropy, top1, top2, chosen], ...]}
void write_token_stats(const std::filesystem::path& path, const std::vector<TokenStatsSequence>& stats);
std::vector<TokenStatsSequence> read_token_stats(const std::filesystem::path& path);

struct InputDigest {
    std::string role;  // "embeddings" or "stats"
    std::string path;
    std::string sha256;
};

struct RunMetadata {
    std::string strategy;
    std::size_t n = 0;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    std::vector<InputDigest> inputs;
    std::string embedding_provenance;
};

void write_selection(const std::filesystem::path& path, const SelectionResult& result, const RunMetadata& meta);

struct SelectionFile {
    SelectionResult result;
    RunMetadata meta;
};
SelectionFile read_selection(const std::filesystem::path& path);

std::string sha256_file(const std::filesystem::path& path);

// id,score
void write_scores_csv(const std::filesystem::path& path, const std::vector<double>& scores);

// gamma,k,gain,objective with 9 significant digits
void write_gain_csv(const std::filesystem::path& path, const std::vector<GainCurve>& curves);
std::string gain_csv(const std::vector<GainCurve>& curves);

nlohmann::ordered_json gain_summary(const std::vector<GainCurve>& curves, const GammaRecommendation& rec,
                                    Budget budget, const GainThreshold& threshold);
void write_gain_summary(const std::filesystem::path& path, const nlohmann::ordered_json& summary);

// "%.9g"
std::string format_g9(double v);

}  // namespace selectkit::io
