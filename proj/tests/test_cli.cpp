// Drives the built selectkit binary end to end.

#include "selectkit/io.hpp"

#include "support.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

using namespace selectkit;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(SELECTKIT_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = ::popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), got);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

struct Fixture {
    fs::path dir = sktest::temp_dir("cli");
    fs::path gram = dir / "gram3.skem";
    fs::path pool = dir / "pool.skem";
    fs::path stats = dir / "pool.jsonl";
    fs::path uniform = dir / "uniform.jsonl";

    Fixture() {
        io::write_embeddings(gram, sktest::gram3(), "fixture:gram3", io::Dtype::F64);
        io::write_embeddings(pool, sktest::clusters(300, 8, 3, 1.0, 1.0, 2024), "fixture:clusters", io::Dtype::F64);
        Rng rng(6);
        std::vector<TokenStatsSequence> s;
        for (int i = 0; i < 300; ++i) s.push_back(sktest::random_sequence(rng, 8));
        io::write_token_stats(stats, s);
        io::write_token_stats(uniform, {TokenStatsSequence{{{std::log(4.0), 0.25, 0.25, 0.25}}},
                                        TokenStatsSequence{{{0.1, 0.9, 0.05, 0.9}}}});
    }
    ~Fixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "score writes csv and prints the top ids") {
    const auto r = cli("score --stats " + q(uniform) + " --measure mean-entropy --out " + q(dir / "s.csv") +
                       " --top 1");
    REQUIRE(r.code == 0);
    CHECK(r.out == "0\n");
    CHECK(slurp(dir / "s.csv") == "id,score\n0,1.38629436\n1,0.1\n");
    CHECK(cli("score --stats " + q(dir / "nope.jsonl") + " --measure min-margin --out " + q(dir / "x.csv")).code !=
          0);
    CHECK(cli("score --stats " + q(uniform) + " --measure entropy --out " + q(dir / "x.csv")).code == 2);
}

TEST_CASE_FIXTURE(Fixture, "fl on the 3x3 fixture picks the largest column sum") {
    const auto out = dir / "sel.json";
    const auto r = cli("select --strategy fl --kernel cosine --embeddings " + q(gram) + " --budget 1 --out " + q(out));
    REQUIRE(r.code == 0);
    const auto f = io::read_selection(out);
    CHECK(f.result.indices == std::vector<std::size_t>{1});
    CHECK(f.result.gains.front() == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(f.meta.params["kernel"] == "cosine");
    CHECK(f.meta.params["greedy"] == "lazy");
    CHECK(f.meta.inputs.at(0).sha256 == io::sha256_file(gram));
    CHECK(f.meta.embedding_provenance == "fixture:gram3");
}

TEST_CASE_FIXTURE(Fixture, "every strategy is deterministic") {
    const std::vector<std::string> runs{
        "--strategy random --stats " + q(stats) + " --seed 5",
        "--strategy uncertainty --stats " + q(stats) + " --measure least-confidence",
        "--strategy kcenter --embeddings " + q(pool) + " --kcenter-init random:3",
        "--strategy fl --embeddings " + q(pool) + " --kernel rbf:25 --greedy naive",
        "--strategy fl --embeddings " + q(pool) + " --kernel rbf:25 --greedy stochastic:0.1 --seed 9",
        "--strategy fl-mixture --embeddings " + q(pool) + " --stats " + q(stats) + " --kernel rbf:25",
    };
    for (const auto& args : runs) {
        CAPTURE(args);
        REQUIRE(cli("select " + args + " --budget 20 --out " + q(dir / "a.json")).code == 0);
        REQUIRE(cli("--threads 2 select " + args + " --budget 20 --out " + q(dir / "b.json")).code == 0);
        CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
        CHECK(io::read_selection(dir / "a.json").result.indices.size() == 20);
    }
}

TEST_CASE_FIXTURE(Fixture, "lazy and naive agree through the cli") {
    REQUIRE(cli("select --strategy fl --embeddings " + q(pool) + " --kernel rbf:25 --budget 30 --greedy naive --out " +
                q(dir / "n.json"))
                .code == 0);
    REQUIRE(cli("select --strategy fl --embeddings " + q(pool) +
                " --kernel rbf:25 --budget 30 --dense-threshold 0 --refresh-batch 1 --out " + q(dir / "l.json"))
                .code == 0);
    CHECK(io::read_selection(dir / "n.json").result.indices == io::read_selection(dir / "l.json").result.indices);
}

TEST_CASE_FIXTURE(Fixture, "select usage errors") {
    const auto out = q(dir / "e.json");
    CHECK(cli("select --strategy fl-mixture --embeddings " + q(pool) + " --budget 3 --out " + out).code == 2);
    CHECK(cli("select --strategy fl --stats " + q(stats) + " --budget 3 --out " + out).code == 2);
    CHECK(cli("select --strategy fl --embeddings " + q(pool) + " --kernel rbf:x --budget 3 --out " + out).code == 2);
    CHECK(cli("select --strategy fl --embeddings " + q(pool) + " --kernel poly --budget 3 --out " + out).code == 2);
    CHECK(cli("select --strategy nope --embeddings " + q(pool) + " --budget 3 --out " + out).code == 2);
    CHECK(cli("select --strategy fl --embeddings " + q(pool) + " --out " + out).code == 2);
    CHECK(cli("select --strategy kcenter --embeddings " + q(pool) + " --budget 301 --out " + out).code == 1);
    CHECK(cli("select --strategy fl-mixture --embeddings " + q(pool) + " --stats " + q(uniform) +
              " --budget 2 --out " + out)
              .code == 1);
    CHECK_FALSE(fs::exists(dir / "e.json"));
}

TEST_CASE_FIXTURE(Fixture, "gains sweep outputs") {
    const auto csv = dir / "g.csv", json = dir / "g.json";
    REQUIRE(cli("gains --embeddings " + q(pool) + " --gammas 25 --budget 12 --out-csv " + q(csv) + " --out-json " +
                q(json))
                .code == 0);
    const auto text = slurp(csv);
    CHECK(text.rfind("gamma,k,gain,objective\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 13);

    REQUIRE(cli("gains --embeddings " + q(pool) + " --gammas 0.26,2.6,26,260,2600 --budget 100 --out-csv " + q(csv) +
                " --out-json " + q(json))
                .code == 0);
    const auto summary = nlohmann::json::parse(slurp(json));
    CHECK_FALSE(summary["stable"].empty());
    CHECK(summary["embedding_provenance"] == "fixture:clusters");

    CHECK(cli("gains --embeddings " + q(pool) + " --gammas '' --budget 5 --out-csv " + q(csv) + " --out-json " +
              q(json))
              .code == 2);
    CHECK(cli("gains --embeddings " + q(pool) + " --budget 5 --out-csv " + q(csv) + " --out-json " + q(json)).code ==
          2);
}

TEST_CASE_FIXTURE(Fixture, "hidden oracle command") {
    const auto r = cli("oracle --embeddings " + q(gram) + " --objective fl --kernel cosine --budget 1");
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["set"] == std::vector<int>{1});
    CHECK(j["value"].get<double>() == doctest::Approx(1.7));
}

TEST_CASE_FIXTURE(Fixture, "synthetic pool output loads and scores") {
    const auto emb = dir / "syn.skem", st = dir / "syn.jsonl";
    REQUIRE(cli("synth --n 500 --d 6 --clusters 5 --seed 3 --out " + q(emb) + " --stats-out " + q(st)).code == 0);
    CHECK(io::read_embeddings(emb).matrix.n() == 500);
    CHECK(io::read_token_stats(st).size() == 500);
    for (const char* m : {"mean-entropy", "least-confidence", "mean-margin", "min-margin"})
        CHECK(cli("score --stats " + q(st) + " --measure " + m + " --out " + q(dir / "x.csv")).code == 0);
}

TEST_CASE_FIXTURE(Fixture, "isa override and env thread count") {
    const auto a = dir / "s.json", b = dir / "v.json";
    REQUIRE(cli("--isa scalar select --strategy fl --embeddings " + q(pool) + " --kernel rbf:25 --budget 15 --out " +
                q(a))
                .code == 0);
    REQUIRE(cli("select --strategy fl --embeddings " + q(pool) + " --kernel rbf:25 --budget 15 --out " + q(b)).code ==
            0);
    CHECK(io::read_selection(a).result.indices == io::read_selection(b).result.indices);
    CHECK(cli("--isa neon select --strategy random --stats " + q(stats) + " --budget 2 --out " + q(a)).code == 2);
    const std::string env = "SELECTKIT_THREADS=3 ";
    const std::string cmd = env + SELECTKIT_CLI + " select --strategy kcenter --embeddings " + q(pool) +
                            " --budget 5 --out " + q(b) + " 2>/dev/null";
    CHECK(std::system(cmd.c_str()) == 0);
}
