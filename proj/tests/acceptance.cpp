// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names
// as arguments to run a subset; with no arguments everything runs.

#include "selectkit/diagnostics.hpp"
#include "selectkit/facility_location.hpp"
#include "selectkit/io.hpp"
#include "selectkit/kcenter.hpp"
#include "selectkit/simd.hpp"
#include "selectkit/uncertainty.hpp"

#include "support.hpp"

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace selectkit;
namespace fs = std::filesystem;

namespace {

const double kOneMinusInvE = 1.0 - std::exp(-1.0);

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Every facility-location run made by the suite, for the trace criterion.
struct FlRun {
    std::string origin;
    SelectionResult result;
    bool sampled = false;
};
std::vector<FlRun> g_fl_runs;

const SelectionResult& record(const std::string& origin, SelectionResult r, bool sampled = false) {
    g_fl_runs.push_back({origin, std::move(r), sampled});
    return g_fl_runs.back().result;
}

// Total variance one: coordinates N(0, 1/d), mean squared pair distance 2.
EmbeddingMatrix unit_variance(std::size_t n, std::size_t d, std::uint64_t seed) {
    return sktest::gaussian(n, d, seed, 1.0 / std::sqrt(static_cast<double>(d)));
}

Outcome topk_oracle() {
    Stopwatch sw;
    Rng rng(101);
    const UncertaintyKind kinds[] = {UncertaintyKind::MeanEntropy, UncertaintyKind::LeastConfidence,
                                     UncertaintyKind::MeanMargin, UncertaintyKind::MinMargin};
    std::size_t mismatches = 0, checks = 0;
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 1 + rng.below(oracle::kMaxTopkN);
        const std::size_t k = 1 + rng.below(n);
        std::vector<TokenStatsSequence> stats;
        for (std::size_t i = 0; i < n; ++i) {
            // Every fourth instance repeats sequences so that scores tie.
            if (it % 4 == 0 && i > 0 && rng.below(3) == 0)
                stats.push_back(stats[rng.below(i)]);
            else
                stats.push_back(sktest::random_sequence(rng, 8));
        }
        for (auto kind : kinds) {
            const auto scores = score_all(stats, kind);
            auto got = select_topk_uncertain(stats, kind, Budget{k}).indices;
            std::sort(got.begin(), got.end());
            mismatches += got != oracle::exhaustive_topk(scores, k).set;
            ++checks;
        }
    }
    const double t = sw.seconds();
    return {mismatches == 0 && t < 10.0,
            fmt("%zu checks (200 instances x 4 measures), %zu mismatches, %.2f s (limit 10 s)", checks, mismatches, t)};
}

Outcome fl_approximation() {
    Stopwatch sw;
    Rng rng(202);
    const KernelSpec specs[] = {KernelSpec::rbf(0.01), KernelSpec::rbf(0.1), KernelSpec::rbf(1.0),
                                KernelSpec::clipped_cosine()};
    std::size_t violations = 0, runs = 0;
    double worst = INFINITY;
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 2 + rng.below(oracle::kMaxSubsetN - 3);  // 2..12
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(4, n));
        const auto emb = unit_variance(n, 1 + rng.below(6), rng.next());
        const auto& spec = specs[it % 4];
        const auto w = oracle::naive_kernel(emb, spec);
        const double opt = oracle::exhaustive_fl_opt(w, k).value;
        for (auto kind : {GreedyKind::Naive, GreedyKind::Lazy}) {
            const auto& r = record("fl-approximation", fl_greedy(emb, spec, Budget{k}, GreedySpec{kind}));
            const double got = oracle::fl_value(w, r.indices);
            worst = std::min(worst, got / opt);
            violations += got < kOneMinusInvE * opt;
            ++runs;
        }
    }
    const double t = sw.seconds();
    return {violations == 0 && t < 60.0,
            fmt("%zu greedy runs on 200 instances, %zu violations, worst ratio %.4f (bound %.4f), %.2f s (limit 60 s)",
                runs, violations, worst, kOneMinusInvE, t)};
}

Outcome mixture_approximation() {
    Stopwatch sw;
    Rng rng(303);
    const KernelSpec specs[] = {KernelSpec::rbf(0.01), KernelSpec::rbf(0.1), KernelSpec::rbf(1.0),
                                KernelSpec::clipped_cosine()};
    std::size_t violations = 0, runs = 0;
    double worst = INFINITY;
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 2 + rng.below(oracle::kMaxSubsetN - 3);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(4, n));
        const auto emb = unit_variance(n, 1 + rng.below(6), rng.next());
        std::vector<TokenStatsSequence> stats;
        for (std::size_t i = 0; i < n; ++i) stats.push_back(sktest::random_sequence(rng, 8));
        const auto u = shift_min_margin(score_all(stats, UncertaintyKind::MinMargin));
        const auto& spec = specs[it % 4];
        const auto w = oracle::naive_kernel(emb, spec);
        const double opt = oracle::exhaustive_mixture_opt(w, u, k).value;
        for (auto kind : {GreedyKind::Naive, GreedyKind::Lazy}) {
            const auto& r = record("mixture-approximation", fl_greedy(emb, spec, Budget{k}, GreedySpec{kind}, u));
            const double got = oracle::mixture_value(w, u, r.indices);
            worst = std::min(worst, got / opt);
            violations += got < kOneMinusInvE * opt;
            ++runs;
        }
    }
    return {violations == 0, fmt("%zu greedy runs on 200 instances, %zu violations, worst ratio %.4f, %.2f s", runs,
                                 violations, worst, sw.seconds())};
}

Outcome kcenter_approximation() {
    Stopwatch sw;
    Rng rng(404);
    std::size_t violations = 0;
    double worst = 0;
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 1 + rng.below(12);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(4, n));
        const auto pts = sktest::gaussian(n, 1 + rng.below(4), rng.next());
        const double opt = oracle::exhaustive_kcenter_opt(pts, k).value;
        const KCenterSeed seed = it % 2 ? KCenterSeed{MedoidStart{}} : KCenterSeed{RandomStart{rng.next()}};
        const double got = kcenter_greedy(pts, Budget{k}, seed).objective_trace.back();
        if (opt > 0) worst = std::max(worst, got / opt);
        // Radii are square roots of differently rounded sums; allow last-bit noise.
        violations += got > 2.0 * opt * (1 + 1e-12) + 1e-12;
    }
    return {violations == 0,
            fmt("200 instances, %zu violations, worst ratio %.4f (bound 2), %.2f s", violations, worst, sw.seconds())};
}

Outcome lazy_equals_naive() {
    Stopwatch sw;
    Rng rng(505);
    const double gammas[] = {1e-3, 1e-2, 1e-1, 1.0};
    std::size_t mismatches = 0;
    for (int it = 0; it < 100; ++it) {
        const std::size_t n = 2 + rng.below(199);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(50, n));
        const std::size_t d = 1 + rng.below(32);
        // Every fifth pool carries duplicate rows to exercise tie handling.
        auto emb = unit_variance(n, d, rng.next());
        if (it % 5 == 0) {
            std::vector<double> v(emb.data().begin(), emb.data().end());
            for (std::size_t i = 1; i < n; i += 3) {
                const std::size_t src = rng.below(i);
                std::copy_n(v.begin() + src * d, d, v.begin() + i * d);
            }
            emb = EmbeddingMatrix(n, d, std::move(v));
        }
        const KernelSpec spec = it % 2 ? KernelSpec::clipped_cosine() : KernelSpec::rbf(gammas[(it / 2) % 4]);
        FlOptions o;
        o.kernel.dense_threshold = it % 3 ? 0 : 8192;
        o.refresh_batch = 1 + rng.below(16);
        const auto& naive = record("lazy-equals-naive", fl_greedy_naive(emb, spec, Budget{k}, std::nullopt, o));
        const auto& lazy = record("lazy-equals-naive", fl_greedy_lazy(emb, spec, Budget{k}, std::nullopt, o));
        mismatches += lazy.indices != naive.indices;
    }
    return {mismatches == 0, fmt("100 instances (n <= 200, k <= 50, both kernels), %zu mismatches, %.2f s", mismatches,
                                 sw.seconds())};
}

Outcome stochastic_quality() {
    Stopwatch sw;
    Rng rng(606);
    std::size_t failing = 0;
    double worst = INFINITY;
    const int pools = 10;
    for (int p = 0; p < pools; ++p) {
        const auto emb = unit_variance(64, 8, rng.next());
        const auto spec = p % 2 ? KernelSpec::clipped_cosine() : KernelSpec::rbf(1.0);
        const auto w = oracle::naive_kernel(emb, spec);
        const double naive = oracle::fl_value(w, record("stochastic", fl_greedy_naive(emb, spec, Budget{8})).indices);
        double sum = 0;
        for (std::uint64_t seed = 0; seed < 50; ++seed)
            sum += oracle::fl_value(
                w, record("stochastic", fl_greedy_stochastic(emb, spec, Budget{8}, 0.1, seed), true).indices);
        const double ratio = sum / 50 / naive;
        worst = std::min(worst, ratio);
        failing += ratio < 0.9;
    }
    return {failing == 0, fmt("%d pools (n=64, k=8, eps=0.1) x 50 seeds, worst mean/naive %.4f (need >= 0.9), %.2f s",
                              pools, worst, sw.seconds())};
}

Outcome gains_figure() {
    Stopwatch sw;
    // Three unit-scale clusters; widths span four decades around the mean
    // squared pair distance of the pool.
    const auto emb = sktest::clusters(300, 8, 3, 1.0, 1.0, 2024);
    const auto dist = oracle::naive_sq_distances(emb);
    double scale = 0;
    for (std::size_t i = 0; i < dist.n; ++i)
        for (std::size_t j = i + 1; j < dist.n; ++j) scale += dist(i, j);
    scale /= 0.5 * 300 * 299;
    std::vector<double> gammas;
    for (double m : {1e-2, 1e-1, 1.0, 1e1, 1e2}) gammas.push_back(m * scale);
    const auto curves = gain_sweep(emb, gammas, Budget{100});
    const auto again = gain_sweep(emb, gammas, Budget{100});
    for (const auto& c : curves) record("gains-figure", {{}, c.objective, c.gains});

    std::ostringstream steps;
    bool ordered = true;
    std::size_t prev = 101;
    for (const auto& c : curves) {
        const std::size_t s = c.saturation_step.value_or(101);
        steps << (c.saturation_step ? std::to_string(s) : "-") << " ";
        ordered &= s <= prev;
        prev = std::min(prev, s);
    }
    bool same = true;
    for (std::size_t i = 0; i < curves.size(); ++i) same &= io::gain_csv({curves[i]}) == io::gain_csv({again[i]});
    const bool large_saturates = curves.back().saturation_step && *curves.back().saturation_step < 10;
    const bool mid_stable = !curves[1].saturation_step && !curves[2].saturation_step;
    const double t = sw.seconds();
    return {large_saturates && mid_stable && ordered && same && t < 30.0,
            fmt("widths x{0.01,0.1,1,10,100} of %.2f: saturation steps [ %s] large<10 %s, mid stable %s, "
                "monotone %s, deterministic %s, %.2f s (limit 30 s)",
                scale, steps.str().c_str(), large_saturates ? "yes" : "no", mid_stable ? "yes" : "no",
                ordered ? "yes" : "no", same ? "yes" : "no", t)};
}

Outcome scale_throughput() {
    const std::size_t n = 99000, d = 512, k = 4500, centers = 100;
    // 100 Gaussian clusters: centers N(0, I), members spread 0.5 per coordinate.
    Rng rng(707);
    std::vector<double> c(centers * d);
    for (double& x : c) x = rng.normal();
    std::vector<double> data(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < d; ++t) data[i * d + t] = c[(i % centers) * d + t] + 0.5 * rng.normal();
    const EmbeddingMatrix emb(n, d, std::move(data));
    // Width equal to the mean squared within-cluster distance (2 * 0.25 * d).
    const auto spec = KernelSpec::rbf(256.0);

    FlCounters counters;
    FlOptions o;
    o.counters = &counters;
    Stopwatch sw;
    const auto r = fl_greedy_lazy(emb, spec, Budget{k}, std::nullopt, o);
    const double t = sw.seconds();
    record("scale", r);
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    const double peak_gb = static_cast<double>(ru.ru_maxrss) / (1024.0 * 1024.0);
    const bool ok = r.indices.size() == k && t < 1800.0 && peak_gb < 8.0;
    return {ok, fmt("n=%zu d=%zu k=%zu in %.1f s (limit 1800 s) on %zu thread(s), isa %s, %zu gain evaluations, "
                    "peak RSS %.2f GB (limit 8 GB)",
                    n, d, k, t, thread_count(), simd::active().name, counters.gain_evaluations, peak_gb)};
}

Outcome io_round_trip() {
    const auto dir = sktest::temp_dir("acceptance_io");
    std::vector<std::string> failures;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    };
    auto code_of = [](const std::function<void()>& f) -> std::optional<ErrorCode> {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return std::nullopt;
    };

    const auto small = sktest::from_rows({{1, 2}, {3, 4}});
    io::write_embeddings(dir / "small.skem", small, "acceptance");
    const auto back = io::read_embeddings(dir / "small.skem");
    expect(std::equal(small.data().begin(), small.data().end(), back.matrix.data().begin()) &&
               back.provenance == "acceptance",
           "2x2 embedding round trip");
    const auto big = sktest::gaussian(50, 7, 1);
    io::write_embeddings(dir / "big.skem", big, "acceptance", io::Dtype::F64);
    const auto big_back = io::read_embeddings(dir / "big.skem");
    expect(std::equal(big.data().begin(), big.data().end(), big_back.matrix.data().begin()), "f64 round trip");

    std::ifstream in(dir / "small.skem", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(dir / "cut.skem", std::ios::binary) << bytes.substr(0, bytes.size() - 1);
    expect(code_of([&] { io::read_embeddings(dir / "cut.skem"); }) == ErrorCode::TruncatedPayload,
           "truncated payload");
    bytes[1] = 'X';
    std::ofstream(dir / "magic.skem", std::ios::binary) << bytes;
    expect(code_of([&] { io::read_embeddings(dir / "magic.skem"); }) == ErrorCode::MagicMismatch, "magic mismatch");

    Rng rng(9);
    std::vector<TokenStatsSequence> stats;
    for (int i = 0; i < 30; ++i) stats.push_back(sktest::random_sequence(rng, 10));
    io::write_token_stats(dir / "s.jsonl", stats);
    const auto sback = io::read_token_stats(dir / "s.jsonl");
    bool stats_equal = sback.size() == stats.size();
    for (std::size_t i = 0; stats_equal && i < stats.size(); ++i) {
        stats_equal &= sback[i].steps.size() == stats[i].steps.size();
        for (std::size_t t = 0; stats_equal && t < stats[i].steps.size(); ++t) {
            const auto &a = sback[i].steps[t], &b = stats[i].steps[t];
            stats_equal &= a.entropy == b.entropy && a.top1_prob == b.top1_prob && a.top2_prob == b.top2_prob &&
                           a.chosen_prob == b.chosen_prob;
        }
    }
    expect(stats_equal, "token stats round trip");
    std::ofstream(dir / "bad.jsonl") << R"({"id":0,"steps":[[0.1,0.5,0.2,0.5]]})" << "\n"
                                     << R"({"id":1,"steps":[[0.1,0.5,0.2,0.5],[0.3,0.2,0.4,0.2]]})" << "\n";
    std::string msg;
    try {
        io::read_token_stats(dir / "bad.jsonl");
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvariantViolation) msg = e.what();
    }
    expect(msg.find("prompt 1 step 1") != std::string::npos, "top2 > top1 reported with record and step");

    const auto sel = fl_greedy_lazy(big, KernelSpec::rbf(2.0), Budget{10});
    io::RunMetadata meta;
    meta.strategy = "fl";
    meta.n = big.n();
    meta.params["kernel"] = "rbf:2";
    meta.params["budget"] = 10;
    meta.inputs.push_back({"embeddings", (dir / "big.skem").string(), io::sha256_file(dir / "big.skem")});
    meta.embedding_provenance = "acceptance";
    io::write_selection(dir / "sel.json", sel, meta);
    const auto sback2 = io::read_selection(dir / "sel.json");
    expect(sback2.result.indices == sel.indices && sback2.result.gains == sel.gains &&
               sback2.result.objective_trace == sel.objective_trace && sback2.meta.params == meta.params &&
               sback2.meta.inputs.at(0).sha256 == meta.inputs[0].sha256,
           "selection round trip");
    fs::remove_all(dir);

    std::string detail = failures.empty() ? "embeddings f32/f64, token stats, selection; truncation, magic, record "
                                            "errors"
                                          : "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
    return {failures.empty(), detail};
}

// Stochastic runs maximize over a random sample each step, so their gains
// can rise; they are audited for telescoping only.
Outcome traces() {
    std::size_t bad_dr = 0, bad_sum = 0, sampled = 0;
    for (const auto& run : g_fl_runs) {
        const auto& g = run.result.gains;
        sampled += run.sampled;
        for (std::size_t t = 1; !run.sampled && t < g.size(); ++t)
            if (g[t] > g[t - 1] + 1e-9) {
                ++bad_dr;
                break;
            }
        const double total = std::accumulate(g.begin(), g.end(), 0.0);
        const double obj = run.result.objective_trace.back();
        bad_sum += std::abs(total - obj) > 1e-6 * std::abs(obj);
    }
    return {!g_fl_runs.empty() && bad_dr == 0 && bad_sum == 0,
            fmt("%zu facility-location runs (%zu sampled, telescoping only), %zu with increasing gains, "
                "%zu failing telescoping",
                g_fl_runs.size(), sampled, bad_dr, bad_sum)};
}

}  // namespace

int main(int argc, char** argv) {
    // The trace criterion audits every run made by the criteria before it.
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"topk-oracle", topk_oracle},
        {"fl-approximation", fl_approximation},
        {"mixture-approximation", mixture_approximation},
        {"kcenter-approximation", kcenter_approximation},
        {"lazy-equals-naive", lazy_equals_naive},
        {"stochastic-quality", stochastic_quality},
        {"gains-figure", gains_figure},
        {"scale-throughput", scale_throughput},
        {"io-round-trip", io_round_trip},
        {"diminishing-returns-telescoping", traces},
    };
    std::vector<std::string> only(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s  %-32s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
