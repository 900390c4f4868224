// selectkit: choose which prompts to annotate from precomputed embeddings
// and token statistics.

#include "selectkit/core.hpp"
#include "selectkit/diagnostics.hpp"
#include "selectkit/facility_location.hpp"
#include "selectkit/io.hpp"
#include "selectkit/kcenter.hpp"
#include "selectkit/oracle.hpp"
#include "selectkit/simd.hpp"
#include "selectkit/uncertainty.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

namespace sk = selectkit;

namespace {

constexpr int kUsageError = 2;

struct ScoreArgs {
    std::string stats;
    std::string measure;
    std::string out;
    std::size_t top = 0;
    bool lc_normalize = false;
};

struct SelectArgs {
    std::string strategy;
    std::string embeddings;
    std::string stats;
    std::string kernel = "rbf:0.002";
    std::size_t budget = 0;
    std::string greedy = "lazy";
    std::uint64_t seed = 0;
    std::string out;
    std::string measure = "min-margin";
    std::string kcenter_init = "medoid";
    double mixture_weight = 1.0;
    bool lc_normalize = false;
    std::size_t cache_columns = 0;
    std::size_t dense_threshold = 8192;
    std::size_t refresh_batch = 8;
    bool allow_empty_provenance = false;
};

struct GainsArgs {
    std::string embeddings;
    std::vector<double> gammas;
    std::size_t budget = 0;
    double threshold = 1e-3;
    bool absolute = false;
    std::string out_csv;
    std::string out_json;
    std::size_t pair_samples = 10000;
    std::uint64_t seed = 0;
    double diagonal_floor = 1e-6;
    bool allow_empty_provenance = false;
};

struct OracleArgs {
    std::string embeddings;
    std::string objective = "fl";
    std::string kernel = "rbf:1";
    std::size_t budget = 0;
};

struct SynthArgs {
    std::size_t n = 300;
    std::size_t d = 8;
    std::size_t clusters = 3;
    double separation = 10.0;
    std::uint64_t seed = 0;
    std::string out;
    std::string stats_out;
};

int run_score(const ScoreArgs& a) {
    const auto stats = sk::io::read_token_stats(a.stats);
    const auto kind = sk::parse_uncertainty(a.measure);
    const auto scores = sk::score_all(stats, kind, {a.lc_normalize});
    sk::io::write_scores_csv(a.out, scores);
    if (a.top > 0) {
        const auto top = sk::select_topk(scores, sk::Budget{std::min(a.top, scores.size())});
        for (std::size_t i : top.indices) std::cout << i << "\n";
    }
    return 0;
}

int run_select(const SelectArgs& a) {
    const auto strategy = sk::parse_strategy(a.strategy);
    std::optional<sk::io::EmbeddingFile> emb;
    std::optional<std::vector<sk::TokenStatsSequence>> stats;
    sk::io::RunMetadata meta;
    meta.strategy = a.strategy;
    if (!a.embeddings.empty()) {
        emb = sk::io::read_embeddings(a.embeddings, a.allow_empty_provenance);
        meta.inputs.push_back({"embeddings", a.embeddings, sk::io::sha256_file(a.embeddings)});
        meta.embedding_provenance = emb->provenance;
    }
    if (!a.stats.empty()) {
        stats = sk::io::read_token_stats(a.stats);
        meta.inputs.push_back({"stats", a.stats, sk::io::sha256_file(a.stats)});
    }
    const auto cfg = sk::validate_inputs(strategy, emb ? &emb->matrix : nullptr, stats ? &*stats : nullptr,
                                         sk::Budget{a.budget});
    meta.n = cfg.n;
    meta.params["budget"] = a.budget;
    meta.params["seed"] = a.seed;

    sk::FlOptions fl;
    fl.kernel.cache_columns = a.cache_columns;
    fl.kernel.dense_threshold = a.dense_threshold;
    fl.mixture_weight = a.mixture_weight;
    fl.refresh_batch = a.refresh_batch;

    sk::SelectionResult result;
    switch (strategy) {
        case sk::StrategyKind::Random:
            result = sk::select_random(cfg.n, cfg.budget, a.seed);
            break;
        case sk::StrategyKind::Uncertainty: {
            const auto kind = sk::parse_uncertainty(a.measure);
            meta.params["measure"] = a.measure;
            if (kind == sk::UncertaintyKind::LeastConfidence) meta.params["per_token"] = a.lc_normalize;
            result = sk::select_topk_uncertain(*stats, kind, cfg.budget, {a.lc_normalize});
            break;
        }
        case sk::StrategyKind::KCenter: {
            const auto seed = sk::parse_kcenter_seed(a.kcenter_init);
            meta.params["init"] = sk::kcenter_seed_to_string(seed);
            result = sk::kcenter_greedy(emb->matrix, cfg.budget, seed);
            break;
        }
        case sk::StrategyKind::FacilityLocation:
        case sk::StrategyKind::FacilityLocationMixture: {
            const auto spec = sk::KernelSpec::parse(a.kernel);
            const auto greedy = sk::GreedySpec::parse(a.greedy, a.seed);
            meta.params["kernel"] = spec.to_string();
            if (spec.is_rbf()) meta.params["gamma"] = spec.gamma();
            meta.params["greedy"] = greedy.to_string();
            if (greedy.kind == sk::GreedyKind::Stochastic) meta.params["epsilon"] = greedy.epsilon;
            std::vector<double> shifted;
            std::optional<std::span<const double>> u;
            if (strategy == sk::StrategyKind::FacilityLocationMixture) {
                shifted = sk::shift_min_margin(sk::score_all(*stats, sk::UncertaintyKind::MinMargin));
                u = std::span<const double>(shifted);
                meta.params["uncertainty"] = "min-margin+1";
                meta.params["mixture_weight"] = a.mixture_weight;
            }
            result = sk::fl_greedy(emb->matrix, spec, cfg.budget, greedy, u, fl);
            break;
        }
    }
    sk::io::write_selection(a.out, result, meta);
    // Read back to confirm the file is complete and valid before reporting success.
    const auto check = sk::io::read_selection(a.out);
    if (check.result.indices != result.indices)
        throw sk::Error(sk::ErrorCode::IoFailure, "selection file did not read back identically");
    return 0;
}

int run_gains(const GainsArgs& a) {
    if (a.gammas.empty()) throw sk::Error(sk::ErrorCode::MissingInput, "--gammas needs at least one value");
    const auto emb = sk::io::read_embeddings(a.embeddings, a.allow_empty_provenance);
    const sk::Budget budget{a.budget};
    sk::SweepOptions opts;
    opts.threshold = {a.threshold, !a.absolute};
    opts.pair_samples = a.pair_samples;
    opts.pair_seed = a.seed;
    const auto curves = sk::gain_sweep(emb.matrix, a.gammas, budget, opts);
    const auto rec = sk::recommend_gamma_range(curves, budget, a.diagonal_floor);
    sk::io::write_gain_csv(a.out_csv, curves);
    auto summary = sk::io::gain_summary(curves, rec, budget, opts.threshold);
    summary["embedding_provenance"] = emb.provenance;
    summary["embeddings_sha256"] = sk::io::sha256_file(a.embeddings);
    sk::io::write_gain_summary(a.out_json, summary);
    return 0;
}

int run_oracle(const OracleArgs& a) {
    const auto emb = sk::io::read_embeddings(a.embeddings, true);
    sk::oracle::SubsetOptimum best;
    if (a.objective == "kcenter") {
        best = sk::oracle::exhaustive_kcenter_opt(emb.matrix, a.budget);
    } else if (a.objective == "fl") {
        best = sk::oracle::exhaustive_fl_opt(sk::oracle::naive_kernel(emb.matrix, sk::KernelSpec::parse(a.kernel)),
                                             a.budget);
    } else {
        throw sk::Error(sk::ErrorCode::InvalidArgument, "objective must be fl or kcenter");
    }
    nlohmann::ordered_json j;
    j["objective"] = a.objective;
    j["set"] = best.set;
    j["value"] = best.value;
    std::cout << j.dump() << "\n";
    return 0;
}

int run_synth(const SynthArgs& a) {
    sk::Rng rng(a.seed);
    std::vector<double> centers(a.clusters * a.d);
    for (double& c : centers) c = a.separation * rng.normal();
    std::vector<double> data(a.n * a.d);
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t t = 0; t < a.d; ++t) data[i * a.d + t] = centers[(i % a.clusters) * a.d + t] + rng.normal();
    const sk::EmbeddingMatrix emb(a.n, a.d, std::move(data));
    sk::io::write_embeddings(a.out, emb, "synthetic:clusters=" + std::to_string(a.clusters) +
                                             ",seed=" + std::to_string(a.seed));
    if (!a.stats_out.empty()) {
        std::vector<sk::TokenStatsSequence> stats(a.n);
        for (auto& seq : stats) {
            const std::size_t len = 1 + rng.below(16);
            for (std::size_t t = 0; t < len; ++t) {
                const double top1 = 0.3 + 0.7 * rng.uniform();
                const double top2 = std::min(top1, 1.0 - top1) * rng.uniform();
                seq.steps.push_back({-(top1 * std::log(top1)) + 2.0 * rng.uniform(), top1, top2, top1});
            }
        }
        sk::io::write_token_stats(a.stats_out, stats);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"selectkit: choose prompts to annotate by uncertainty, k-center or facility location"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    std::string isa;
    app.add_option("--threads", threads, "Worker threads (default: SELECTKIT_THREADS or all cores)");
    app.add_option("--isa", isa, "Force the SIMD kernel set: scalar, avx2 or avx512");

    ScoreArgs score;
    auto* cmd_score = app.add_subcommand("score", "Write per-prompt uncertainty scores as CSV (id,score)");
    cmd_score->add_option("--stats", score.stats, "Token statistics file (JSON lines)")->required();
    cmd_score->add_option("--measure", score.measure, "mean-entropy | least-confidence | mean-margin | min-margin")
        ->required();
    cmd_score->add_option("--out", score.out, "Output CSV")->required();
    cmd_score->add_option("--top", score.top, "Also print the N most uncertain ids to stdout");
    cmd_score->add_flag("--lc-normalize", score.lc_normalize, "Per-token (geometric mean) least confidence");

    SelectArgs sel;
    auto* cmd_select = app.add_subcommand("select", "Select a budget of prompts and write a selection file");
    cmd_select->add_option("--strategy", sel.strategy, "random | uncertainty | kcenter | fl | fl-mixture")
        ->required();
    cmd_select->add_option("--embeddings", sel.embeddings, "Embedding file (kcenter, fl, fl-mixture)");
    cmd_select->add_option("--stats", sel.stats, "Token statistics file (uncertainty, fl-mixture)");
    cmd_select->add_option("--kernel", sel.kernel, "rbf:GAMMA or cosine; a good starting width is rbf:0.002")
        ->capture_default_str();
    cmd_select->add_option("--budget", sel.budget, "Number of prompts to select")->required();
    cmd_select->add_option("--greedy", sel.greedy, "naive | lazy | stochastic:EPS")->capture_default_str();
    cmd_select->add_option("--seed", sel.seed, "Random seed")->capture_default_str();
    cmd_select->add_option("--out", sel.out, "Output selection file")->required();
    cmd_select->add_option("--measure", sel.measure, "Uncertainty measure for --strategy uncertainty")
        ->capture_default_str();
    cmd_select->add_option("--kcenter-init", sel.kcenter_init, "medoid | index:I | random:SEED")
        ->capture_default_str();
    cmd_select->add_option("--mixture-weight", sel.mixture_weight, "Weight of the log-uncertainty term")
        ->capture_default_str();
    cmd_select->add_flag("--lc-normalize", sel.lc_normalize, "Per-token (geometric mean) least confidence");
    cmd_select->add_option("--cache-columns", sel.cache_columns, "LRU kernel column cache size (0 = off)")
        ->capture_default_str();
    cmd_select->add_option("--dense-threshold", sel.dense_threshold,
                           "Precompute the full kernel when the pool has at most this many rows")
        ->capture_default_str();
    cmd_select->add_option("--refresh-batch", sel.refresh_batch, "Stale lazy-heap entries refreshed per pass")
        ->capture_default_str();
    cmd_select->add_flag("--allow-empty-provenance", sel.allow_empty_provenance);

    GainsArgs gains;
    auto* cmd_gains = app.add_subcommand("gains", "Sweep RBF kernel widths and report greedy gain saturation");
    cmd_gains->add_option("--embeddings", gains.embeddings, "Embedding file")->required();
    cmd_gains->add_option("--gammas", gains.gammas, "Comma-separated kernel widths")->required()->delimiter(',');
    cmd_gains->add_option("--budget", gains.budget, "Greedy steps per width")->required();
    cmd_gains->add_option("--threshold", gains.threshold, "Saturation threshold (relative to the first gain)")
        ->capture_default_str();
    cmd_gains->add_flag("--absolute-threshold", gains.absolute, "Treat --threshold as an absolute gain");
    cmd_gains->add_option("--out-csv", gains.out_csv, "Gain curves CSV (gamma,k,gain,objective)")->required();
    cmd_gains->add_option("--out-json", gains.out_json, "Summary JSON with stable and rejected widths")->required();
    cmd_gains->add_option("--pair-samples", gains.pair_samples, "Pairs sampled for the diagonal-kernel check")
        ->capture_default_str();
    cmd_gains->add_option("--seed", gains.seed, "Seed for pair sampling")->capture_default_str();
    cmd_gains->add_option("--diagonal-floor", gains.diagonal_floor, "Median similarity below which a width is rejected")
        ->capture_default_str();
    cmd_gains->add_flag("--allow-empty-provenance", gains.allow_empty_provenance);

    OracleArgs orc;
    auto* cmd_oracle = app.add_subcommand("oracle", "Exhaustive optimum on a tiny pool (debugging)");
    cmd_oracle->group("");
    cmd_oracle->add_option("--embeddings", orc.embeddings)->required();
    cmd_oracle->add_option("--objective", orc.objective, "fl | kcenter");
    cmd_oracle->add_option("--kernel", orc.kernel);
    cmd_oracle->add_option("--budget", orc.budget)->required();

    SynthArgs syn;
    auto* cmd_synth = app.add_subcommand("synth", "Write a synthetic clustered pool (and optional token stats)");
    cmd_synth->group("");
    cmd_synth->add_option("--n", syn.n);
    cmd_synth->add_option("--d", syn.d);
    cmd_synth->add_option("--clusters", syn.clusters);
    cmd_synth->add_option("--separation", syn.separation);
    cmd_synth->add_option("--seed", syn.seed);
    cmd_synth->add_option("--out", syn.out)->required();
    cmd_synth->add_option("--stats-out", syn.stats_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsageError;
    }

    try {
        if (threads > 0) sk::set_thread_count(threads);
        if (!isa.empty()) sk::simd::set_active(sk::simd::parse_isa(isa));
        if (cmd_score->parsed()) return run_score(score);
        if (cmd_select->parsed()) return run_select(sel);
        if (cmd_gains->parsed()) return run_gains(gains);
        if (cmd_oracle->parsed()) return run_oracle(orc);
        if (cmd_synth->parsed()) return run_synth(syn);
    } catch (const sk::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& v : e.violations())
            if (v.code == sk::ErrorCode::MissingInput) return kUsageError;
        return 1;
    } catch (const sk::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == sk::ErrorCode::MissingInput || e.code() == sk::ErrorCode::InvalidArgument ? kUsageError
                                                                                                       : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
