#include "selectkit/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_set>

namespace selectkit::io {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
    std::make_unsigned_t<T> u = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) u |= static_cast<std::make_unsigned_t<T>>(p[b]) << (8 * b);
    return static_cast<T>(u);
}

// Writes through a sibling temp file so a failed run never leaves a partial output.
void write_atomically(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string format_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_embeddings(const fs::path& path, const EmbeddingMatrix& emb, const std::string& provenance, Dtype dtype,
                      bool allow_empty_provenance) {
    if (provenance.empty() && !allow_empty_provenance)
        throw Error(ErrorCode::InvalidArgument, "embedding provenance string is required");
    if (dtype != Dtype::F32 && dtype != Dtype::F64) throw Error(ErrorCode::InvalidArgument, "unknown dtype");
    std::string out;
    const std::size_t width = dtype == Dtype::F32 ? 4 : 8;
    out.reserve(25 + provenance.size() + emb.n() * emb.d() * width);
    out.append(kEmbeddingMagic, 4);
    put_le<std::uint32_t>(out, kEmbeddingVersion);
    put_le<std::uint64_t>(out, emb.n());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(emb.d()));
    out.push_back(static_cast<char>(dtype));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(provenance.size()));
    out += provenance;
    for (double v : emb.data()) {
        if (dtype == Dtype::F32)
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        else
            put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    write_atomically(path, out);
}

EmbeddingFile read_embeddings(const fs::path& path, bool allow_empty_provenance) {
    const std::string bytes = read_all(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t size = bytes.size();
    constexpr std::size_t kFixed = 4 + 4 + 8 + 4 + 1 + 4;

    if (size < 4 || std::memcmp(p, kEmbeddingMagic, 4) != 0)
        throw Error(ErrorCode::MagicMismatch, path.string() + " is not an embedding file");
    if (size < kFixed) throw Error(ErrorCode::TruncatedPayload, path.string() + ": header cut short");
    const auto version = get_le<std::uint32_t>(p + 4);
    if (version != kEmbeddingVersion)
        throw Error(ErrorCode::MagicMismatch, "unsupported embedding file version " + std::to_string(version));
    const auto n = get_le<std::uint64_t>(p + 8);
    const auto d = get_le<std::uint32_t>(p + 16);
    const auto dtype_tag = p[20];
    const auto prov_len = get_le<std::uint32_t>(p + 21);
    if (dtype_tag != static_cast<unsigned char>(Dtype::F32) && dtype_tag != static_cast<unsigned char>(Dtype::F64))
        throw Error(ErrorCode::InvariantViolation, "unknown dtype tag " + std::to_string(dtype_tag));
    if (n == 0 || d == 0) throw Error(ErrorCode::InvariantViolation, "embedding file declares an empty matrix");
    const auto dtype = static_cast<Dtype>(dtype_tag);
    const std::size_t width = dtype == Dtype::F32 ? 4 : 8;

    if (size < kFixed + prov_len) throw Error(ErrorCode::TruncatedPayload, "provenance string cut short");
    std::string provenance(bytes.data() + kFixed, prov_len);
    if (provenance.empty() && !allow_empty_provenance)
        throw Error(ErrorCode::InvariantViolation, "embedding file has an empty provenance string");

    const std::size_t offset = kFixed + prov_len;
    if (n > (SIZE_MAX - offset) / width / d) throw Error(ErrorCode::InvariantViolation, "matrix size overflows");
    const std::size_t count = static_cast<std::size_t>(n) * d;
    const std::size_t expected = offset + count * width;
    if (size < expected)
        throw Error(ErrorCode::TruncatedPayload, "payload has " + std::to_string(size - offset) + " bytes, expected " +
                                                     std::to_string(count * width));
    if (size > expected)
        throw Error(ErrorCode::InvariantViolation, std::to_string(size - expected) + " trailing bytes after payload");

    std::vector<double> data(count);
    const unsigned char* q = p + offset;
    for (std::size_t i = 0; i < count; ++i) {
        if (dtype == Dtype::F32)
            data[i] = std::bit_cast<float>(get_le<std::uint32_t>(q + 4 * i));
        else
            data[i] = std::bit_cast<double>(get_le<std::uint64_t>(q + 8 * i));
    }
    return EmbeddingFile{EmbeddingMatrix(static_cast<std::size_t>(n), d, std::move(data)), std::move(provenance),
                         dtype};
}

void write_token_stats(const fs::path& path, const std::vector<TokenStatsSequence>& stats) {
    std::string out;
    for (std::size_t i = 0; i < stats.size(); ++i) {
        ordered_json rec;
        rec["id"] = i;
        auto steps = ordered_json::array();
        for (const auto& s : stats[i].steps) steps.push_back({s.entropy, s.top1_prob, s.top2_prob, s.chosen_prob});
        rec["steps"] = std::move(steps);
        out += rec.dump();
        out.push_back('\n');
    }
    write_atomically(path, out);
}

std::vector<TokenStatsSequence> read_token_stats(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<TokenStatsSequence> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(line_no);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::InvariantViolation, where + ": malformed record (" + e.what() + ")");
        }
        if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_number_unsigned() || !rec.contains("steps") ||
            !rec["steps"].is_array())
            throw Error(ErrorCode::InvariantViolation, where + ": record needs unsigned 'id' and array 'steps'");
        const auto id = rec["id"].get<std::uint64_t>();
        if (id != out.size())
            throw Error(ErrorCode::InvariantViolation, where + ": prompt id " + std::to_string(id) + " where " +
                                                           std::to_string(out.size()) + " was expected");
        const std::string who = "prompt " + std::to_string(id);
        const auto& steps = rec["steps"];
        if (steps.empty()) throw Error(ErrorCode::InvariantViolation, who + ": no steps");
        TokenStatsSequence seq;
        seq.steps.reserve(steps.size());
        for (std::size_t t = 0; t < steps.size(); ++t) {
            const auto& s = steps[t];
            const std::string at = who + " step " + std::to_string(t);
            if (!s.is_array() || s.size() != 4)
                throw Error(ErrorCode::InvariantViolation, at + ": expected [entropy, top1, top2, chosen]");
            for (const auto& v : s)
                if (!v.is_number()) throw Error(ErrorCode::InvariantViolation, at + ": non-numeric field");
            TokenStats ts{s[0].get<double>(), s[1].get<double>(), s[2].get<double>(), s[3].get<double>()};
            if (auto why = check_token_stats(ts); !why.empty())
                throw Error(ErrorCode::InvariantViolation, at + ": " + why);
            seq.steps.push_back(ts);
        }
        out.push_back(std::move(seq));
    }
    if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
    if (out.empty()) throw Error(ErrorCode::InvariantViolation, path.string() + " holds no records");
    return out;
}

namespace {
void check_indices(const std::vector<std::size_t>& indices, std::size_t n) {
    std::unordered_set<std::size_t> seen;
    for (std::size_t i : indices) {
        if (i >= n) throw Error(ErrorCode::InvariantViolation, "selected index " + std::to_string(i) + " >= n");
        if (!seen.insert(i).second)
            throw Error(ErrorCode::InvariantViolation, "selected index " + std::to_string(i) + " repeated");
    }
}
}  // namespace

void write_selection(const fs::path& path, const SelectionResult& result, const RunMetadata& meta) {
    check_indices(result.indices, meta.n);
    ordered_json j;
    j["format"] = "selectkit-selection";
    j["version"] = 1;
    j["strategy"] = meta.strategy;
    j["n"] = meta.n;
    j["params"] = meta.params;
    j["indices"] = result.indices;
    j["objective_trace"] = result.objective_trace;
    j["gains"] = result.gains;
    auto inputs = ordered_json::array();
    for (const auto& d : meta.inputs) inputs.push_back({{"role", d.role}, {"path", d.path}, {"sha256", d.sha256}});
    j["inputs"] = std::move(inputs);
    j["embedding_provenance"] = meta.embedding_provenance;
    write_atomically(path, j.dump(2) + "\n");
}

SelectionFile read_selection(const fs::path& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_all(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvariantViolation, path.string() + ": malformed selection file (" + e.what() + ")");
    }
    if (!j.is_object() || j.value("format", "") != "selectkit-selection")
        throw Error(ErrorCode::MagicMismatch, path.string() + " is not a selection file");
    if (j.value("version", 0) != 1) throw Error(ErrorCode::MagicMismatch, "unsupported selection file version");
    SelectionFile f;
    try {
        f.meta.strategy = j.at("strategy").get<std::string>();
        f.meta.n = j.at("n").get<std::size_t>();
        f.meta.params = j.at("params");
        f.result.indices = j.at("indices").get<std::vector<std::size_t>>();
        f.result.objective_trace = j.at("objective_trace").get<std::vector<double>>();
        f.result.gains = j.at("gains").get<std::vector<double>>();
        for (const auto& d : j.at("inputs"))
            f.meta.inputs.push_back(
                {d.at("role").get<std::string>(), d.at("path").get<std::string>(), d.at("sha256").get<std::string>()});
        f.meta.embedding_provenance = j.value("embedding_provenance", "");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvariantViolation, path.string() + ": " + e.what());
    }
    check_indices(f.result.indices, f.meta.n);
    return f;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::IoFailure, "sha256 initialisation failed");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kHex[md[i] >> 4]);
        hex.push_back(kHex[md[i] & 0xF]);
    }
    return hex;
}

void write_scores_csv(const fs::path& path, const std::vector<double>& scores) {
    std::string out = "id,score\n";
    for (std::size_t i = 0; i < scores.size(); ++i) out += std::to_string(i) + "," + format_g9(scores[i]) + "\n";
    write_atomically(path, out);
}

std::string gain_csv(const std::vector<GainCurve>& curves) {
    std::string out = "gamma,k,gain,objective\n";
    for (const auto& c : curves)
        for (std::size_t t = 0; t < c.gains.size(); ++t)
            out += format_g9(c.gamma) + "," + std::to_string(c.ks[t]) + "," + format_g9(c.gains[t]) + "," +
                   format_g9(c.objective[t]) + "\n";
    return out;
}

void write_gain_csv(const fs::path& path, const std::vector<GainCurve>& curves) {
    write_atomically(path, gain_csv(curves));
}

ordered_json gain_summary(const std::vector<GainCurve>& curves, const GammaRecommendation& rec, Budget budget,
                          const GainThreshold& threshold) {
    ordered_json j;
    j["budget"] = budget.k;
    j["threshold"] = {{"value", threshold.value}, {"mode", threshold.relative ? "relative" : "absolute"}};
    j["stable"] = rec.stable;
    auto rejected = ordered_json::array();
    for (const auto& r : rec.rejected) {
        ordered_json e;
        e["gamma"] = r.gamma;
        e["reason"] = r.reason;
        e["saturation_step"] = r.saturation_step ? ordered_json(*r.saturation_step) : ordered_json(nullptr);
        e["median_offdiag_similarity"] =
            std::isfinite(r.median_offdiag_similarity) ? ordered_json(r.median_offdiag_similarity) : ordered_json(nullptr);
        rejected.push_back(std::move(e));
    }
    j["rejected"] = std::move(rejected);
    auto cs = ordered_json::array();
    for (const auto& c : curves) {
        ordered_json e;
        e["gamma"] = c.gamma;
        e["first_gain"] = c.gains.empty() ? 0.0 : c.gains.front();
        e["threshold"] = c.threshold;
        e["saturation_step"] = c.saturation_step ? ordered_json(*c.saturation_step) : ordered_json(nullptr);
        e["final_objective"] = c.objective.empty() ? 0.0 : c.objective.back();
        cs.push_back(std::move(e));
    }
    j["curves"] = std::move(cs);
    return j;
}

void write_gain_summary(const fs::path& path, const ordered_json& summary) {
    write_atomically(path, summary.dump(2) + "\n");
}

}  // namespace selectkit::io
