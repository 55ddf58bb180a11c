#include "fixtures.hpp"

#include "changetrace/chain.hpp"
#include "changetrace/cluster.hpp"
#include "cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run(std::initializer_list<std::string> args)
{
    std::vector<std::string> owned{"changetrace"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : owned) argv.push_back(s.c_str());
    return ct::cli::run(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
    fs::path path;
    TempDir()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("ct_cli_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::size_t line_count(const std::string& file)
{
    std::ifstream in(file);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

ct::ChainView load(const std::string& corpus)
{
    std::ifstream in(corpus);
    return ct::parse_corpus(in);
}

ct::ClusterAssignment clusters(const std::string& file, const ct::ChainView& v)
{
    std::ifstream in(file);
    return ct::read_clusters(in, v);
}

}  // namespace

TEST_CASE("usage errors exit with 2")
{
    CHECK(run({}) == 2);
    CHECK(run({"--no-such-flag"}) == 2);
    CHECK(run({"generate"}) == 2);
}

TEST_CASE("end-to-end pipeline on a short corpus")
{
    const TempDir d;
    REQUIRE(run({"generate", "--seed", "11", "--days", "4", "--out-dir", d.path.string()}) == 0);
    const auto corpus = d / "corpus.jsonl";
    REQUIRE(fs::exists(corpus));
    REQUIRE(run({"cluster-base", "--corpus", corpus, "--out", d / "base.jsonl"}) == 0);
    REQUIRE(run({"extract-gt", "--corpus", corpus, "--clusters", d / "base.jsonl", "--tags", d / "tags.jsonl", "--out", d / "gt.jsonl"}) == 0);

    REQUIRE(run({"eval-heuristics", "--corpus", corpus, "--clusters", d / "base.jsonl", "--ground-truth", d / "gt.jsonl", "--out", d / "scores.csv"}) == 0);
    CHECK(line_count(d / "scores.csv") == 27);

    REQUIRE(run({"train", "--corpus", corpus, "--clusters", d / "base.jsonl", "--ground-truth", d / "gt.jsonl", "--out-dir", d / "models", "--trees", "10"}) == 0);
    REQUIRE(run({"predict", "--corpus", corpus, "--clusters", d / "base.jsonl", "--full-model", d / "models/full.model", "--reduced-model",
                 d / "models/reduced.model", "--out", d / "pred.jsonl"}) == 0);
    for (const char* mode : {"--naive", "--constrained"})
        REQUIRE(run({"enhance", mode, "--corpus", corpus, "--clusters", d / "base.jsonl", "--predictions", d / "pred.jsonl", "--out",
                     d / (std::string(mode + 2) + ".jsonl")}) == 0);

    const auto v = load(corpus);
    const auto base = clusters(d / "base.jsonl", v);
    const auto naive = clusters(d / "naive.jsonl", v);
    const auto cons = clusters(d / "constrained.jsonl", v);
    CHECK(fixture::refines(base.roots(), cons.roots()));
    CHECK(fixture::refines(cons.roots(), naive.roots()));

    SUBCASE("manifests record digests of every output")
    {
        for (const char* m : {"manifest.json", "base.jsonl.manifest.json", "models/manifest.json", "constrained.jsonl.manifest.json"}) {
            std::ifstream in(d / m);
            REQUIRE(in);
            const auto j = nlohmann::json::parse(in);
            CHECK(j.contains("subcommand"));
            CHECK(j.contains("config_hash"));
            REQUIRE(j["outputs"].size() >= 1);
            for (const auto& o : j["outputs"]) {
                CHECK(fs::exists(o["path"].get<std::string>()));
                CHECK(o["sha256"].get<std::string>().size() == 64);
            }
        }
    }
    SUBCASE("usage errors on real inputs")
    {
        CHECK(run({"enhance", "--naive", "--constrained", "--corpus", corpus, "--clusters", d / "base.jsonl", "--predictions", d / "pred.jsonl",
                   "--out", d / "both.jsonl"}) == 2);
        CHECK(run({"enhance", "--corpus", corpus, "--clusters", d / "base.jsonl", "--predictions", d / "pred.jsonl", "--out", d / "none.jsonl"}) == 2);
        CHECK(run({"cluster-base", "--corpus", d / "absent.jsonl", "--out", d / "x.jsonl"}) == 2);
    }
}
