#include "shared_corpus.hpp"

#include "changetrace/roc.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

using namespace ct;

namespace {

/// Antisymmetric rows: `a` kinds vote for output 0, the next `b` for output 1.
std::pair<VoteRow, VoteRow> rows(int a, int b)
{
    VoteRow r0{}, r1{};
    for (int k = 0; k < a + b; ++k) {
        r0[static_cast<std::size_t>(k)] = k < a ? 1 : -1;
        r1[static_cast<std::size_t>(k)] = static_cast<std::int8_t>(-r0[static_cast<std::size_t>(k)]);
    }
    return {r0, r1};
}

struct Labeled {
    int a, b;
    std::uint32_t change;
};

std::pair<GroundTruthSet, VoteTable> table(const std::vector<Labeled>& xs)
{
    GroundTruthSet gt;
    VoteTable t;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto p = static_cast<TxPos>(i);
        gt.entries.push_back({p, xs[i].change});
        t.txs.push_back(p);
        const auto [r0, r1] = rows(xs[i].a, xs[i].b);
        t.rows.push_back(r0);
        t.rows.push_back(r1);
    }
    gt.report.final = gt.size();
    return {gt, t};
}

std::vector<Labeled> random_labeled(std::mt19937_64& rng, std::size_t n, double signal)
{
    std::uniform_int_distribution<int> votes(0, 8);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Labeled> xs;
    while (xs.size() < n) {
        const int a = votes(rng), b = votes(rng);
        if (a + b == 0) continue;
        // With probability `signal` the label follows the majority.
        const std::uint32_t change = (u(rng) < signal) ? (a >= b ? 0u : 1u) : static_cast<std::uint32_t>(u(rng) < 0.5);
        xs.push_back({a, b, change});
    }
    return xs;
}

double mann_whitney(const std::vector<double>& s, const std::vector<int>& l)
{
    double wins = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (l[i] && !l[j]) {
                ++pairs;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("threshold vote examples")
{
    SUBCASE("margin 7 at t = 7")
    {
        const auto [r0, r1] = rows(9, 2);
        CHECK(threshold_vote(r0, r1, 7) == 0u);
        CHECK(threshold_vote(r1, r0, 7) == 1u);
        CHECK_FALSE(threshold_vote(r0, r1, 8));
    }
    SUBCASE("a tie never fires")
    {
        const auto [r0, r1] = rows(5, 5);
        for (int t = 1; t <= 26; ++t) CHECK_FALSE(threshold_vote(r0, r1, t));
    }
    SUBCASE("margin 4 below t = 7")
    {
        const auto [r0, r1] = rows(6, 2);
        CHECK_FALSE(threshold_vote(r0, r1, 7));
        CHECK(threshold_vote(r0, r1, 4) == 0u);
    }
    SUBCASE("only positive votes count")
    {
        VoteRow r0{}, r1{};
        r0[0] = 1;
        r1[1] = -1;  // not mirrored: a lone negative vote adds nothing
        CHECK(positive_votes(r0) == 1);
        CHECK(positive_votes(r1) == 0);
        CHECK(threshold_vote(r0, r1, 1) == 0u);
    }
    SUBCASE("thresholds below one are rejected")
    {
        const auto [r0, r1] = rows(1, 0);
        CHECK_THROWS_AS(threshold_vote(r0, r1, 0), Error);
    }
}

TEST_CASE("roc_auc basics")
{
    const std::vector<double> sep{3, 2, 1, 0};
    const std::vector<int> lab{1, 1, 0, 0};
    CHECK(roc_auc(sep, lab).auc == 1.0);
    const std::vector<double> same{1, 1, 1, 1};
    CHECK(roc_auc(same, lab).auc == 0.5);
    const std::vector<int> all_pos{1, 1, 1, 1};
    CHECK_THROWS_AS(roc_auc(sep, all_pos), Error);
    const std::vector<int> short_labels{1, 0};
    CHECK_THROWS_AS(roc_auc(sep, short_labels), Error);

    const auto c = roc_auc(sep, lab);
    CHECK(c.points.front().fpr == 0);
    CHECK(c.points.front().tpr == 0);
    CHECK(c.points.back().fpr == 1);
    CHECK(c.points.back().tpr == 1);
    CHECK(c.best_at_fpr(0).tpr == 1.0);
}

TEST_CASE("auc equals the Mann-Whitney statistic")
{
    std::mt19937_64 rng(3);
    for (int round = 0; round < 50; ++round) {
        std::vector<double> s(20);
        std::vector<int> l(20);
        for (std::size_t i = 0; i < 20; ++i) {
            s[i] = static_cast<double>(rng() % 6);
            l[i] = static_cast<int>(i % 2 == 0 ? rng() % 2 : i % 4 == 1);
        }
        const auto c = roc_auc(s, l);
        CHECK(c.auc == doctest::Approx(mann_whitney(s, l)).epsilon(1e-12));
        CHECK(c.auc == doctest::Approx(trapezoid_auc(c.points)).epsilon(1e-12));
    }
}

TEST_CASE("threshold-vote roc")
{
    std::mt19937_64 rng(5);
    SUBCASE("separable votes give auc 1")
    {
        std::vector<Labeled> xs;
        for (int i = 0; i < 40; ++i) xs.push_back(i % 2 ? Labeled{3, 0, 0} : Labeled{1, 4, 1});
        const auto [gt, t] = table(xs);
        CHECK(roc_threshold_vote(gt, t).auc == 1.0);
    }
    SUBCASE("100-row curve equals brute-force confusion counts at every margin")
    {
        const auto xs = random_labeled(rng, 50, 0.7);
        const auto [gt, t] = table(xs);
        const auto curve = roc_threshold_vote(gt, t);
        std::set<int> margins;
        for (const auto& x : xs) {
            margins.insert(x.a - x.b);
            margins.insert(x.b - x.a);
        }
        REQUIRE(curve.points.size() == margins.size() + 1);
        for (std::size_t i = 1; i < curve.points.size(); ++i) {
            const int m = static_cast<int>(curve.points[i].threshold);
            CHECK(margins.count(m) == 1);
            std::size_t tp = 0, fp = 0;
            for (const auto& x : xs) {
                tp += (x.change == 0 ? x.a - x.b : x.b - x.a) >= m;
                fp += (x.change == 0 ? x.b - x.a : x.a - x.b) >= m;
            }
            CHECK(curve.points[i].tpr == static_cast<double>(tp) / 50.0);
            CHECK(curve.points[i].fpr == static_cast<double>(fp) / 50.0);
        }
        // Positive thresholds agree with the threshold-vote classifier.
        for (int th = 1; th <= 8; ++th) {
            std::size_t correct = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) correct += threshold_vote(t.row(i, 0), t.row(i, 1), th) == xs[i].change;
            const auto it = std::find_if(curve.points.begin(), curve.points.end(), [&](const RocPoint& p) { return p.threshold == th; });
            if (it != curve.points.end()) CHECK(it->tpr == static_cast<double>(correct) / 50.0);
        }
    }
    SUBCASE("raising the threshold never raises tpr or fpr")
    {
        const auto [gt, t] = table(random_labeled(rng, 500, 0.6));
        const auto c = roc_threshold_vote(gt, t);
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            CHECK(c.points[i].threshold < c.points[i - 1].threshold);
            CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
            CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
        }
    }
    SUBCASE("swapping output order leaves auc unchanged")
    {
        auto xs = random_labeled(rng, 300, 0.6);
        const auto [gt, t] = table(xs);
        for (auto& x : xs) {
            std::swap(x.a, x.b);
            x.change = 1 - x.change;
        }
        const auto [gt2, t2] = table(xs);
        CHECK(roc_threshold_vote(gt, t).auc == doctest::Approx(roc_threshold_vote(gt2, t2).auc).epsilon(1e-12));
    }
    SUBCASE("labels shuffled against votes give auc near one half")
    {
        const auto [gt, t] = table(random_labeled(rng, 6000, 0.0));
        CHECK(std::abs(roc_threshold_vote(gt, t).auc - 0.5) <= 0.05);
    }
    SUBCASE("zero-vote transactions and transactions outside the ground truth are excluded")
    {
        auto [gt, t] = table({{2, 0, 0}, {0, 1, 1}});
        t.txs.push_back(2);
        t.rows.push_back(VoteRow{});
        t.rows.push_back(VoteRow{});
        gt.entries.push_back({2, 0});
        const auto [r0, r1] = rows(0, 3);
        t.txs.push_back(3);
        t.rows.push_back(r0);
        t.rows.push_back(r1);
        CHECK(vote_margins(gt, t).scores.size() == 4);
        CHECK_THROWS_AS(roc_threshold_vote(GroundTruthSet{}, t), Error);
    }
}

TEST_CASE("threshold-vote roc on the synthetic corpus")
{
    const auto& c = fixture::shared_corpus();
    std::vector<TxPos> txs;
    for (const auto& e : c.gt.entries) txs.push_back(e.tx);
    const auto votes = build_vote_table(txs, c.view);
    const auto curve = roc_threshold_vote(c.gt, votes);
    CHECK(curve.auc >= 0.90);
    std::ostringstream o;
    write_roc_csv(o, curve);
    CHECK(o.str().rfind("threshold,fpr,tpr\n", 0) == 0);
    CHECK(o.str().find("\nauc,") != std::string::npos);
}
