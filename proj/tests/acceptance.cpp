// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "fixtures.hpp"
#include "gini_oracle.hpp"
#include "heuristic_fixture.hpp"

#include "changetrace/analytics.hpp"
#include "changetrace/enhance.hpp"
#include "changetrace/ground_truth.hpp"
#include "changetrace/pipeline.hpp"
#include "changetrace/roc.hpp"
#include "changetrace/synth.hpp"
#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace ct;
namespace fs = std::filesystem;
using fixture::in;
using fixture::out;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Result {
    bool pass = true;
    std::string detail;

    /// Records a failed condition without stopping the remaining checks.
    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(double x, int digits = 4)
{
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(digits);
    o << x;
    return o.str();
}

// ---------------------------------------------------------------------------
// Shared default-config corpus and models, built on first use.

struct World {
    SynthCorpus synth;
    ChainView view;
    ClusterAssignment base;
    GroundTruthSet gt;
    double extract_seconds = 0;
};

const World& world()
{
    static const World w = [] {
        World x;
        x.synth = generate(default_synth_config(), 42);
        x.view = build_view(x.synth.records, x.synth.header.activation);
        x.base = multi_input_clustering(x.view);
        const auto t0 = Clock::now();
        x.gt = extract_ground_truth(x.view, x.base, x.synth.tags);
        x.extract_seconds = seconds_since(t0);
        return x;
    }();
    return w;
}

struct Models {
    TrainedModels trained;
    double train_seconds = 0;
};

const Models& models()
{
    static const Models m = [] {
        Models x;
        const auto t0 = Clock::now();
        x.trained = train_models(world().view, world().base, world().gt);
        x.train_seconds = seconds_since(t0);
        return x;
    }();
    return m;
}

const PredictionSet& predictions()
{
    static const PredictionSet p = predict_all(world().view, world().base, models().trained.full, models().trained.reduced);
    return p;
}

std::uint32_t entity_of(const World& w, AddressId a) { return *w.synth.labels.entity_of(w.view.address_name(a)); }

// ---------------------------------------------------------------------------
// 1. Multi-input clustering against breadth-first connected components.

std::vector<std::uint32_t> bfs_components(const ChainView& v)
{
    std::vector<std::vector<AddressId>> groups;
    std::vector<std::vector<std::uint32_t>> member_of(v.address_count());
    for (const auto& tx : v.txs()) {
        if (tx.coinbase || is_coinjoin(tx)) continue;
        std::vector<AddressId> g;
        for (const auto& i : tx.inputs) g.push_back(v.prevout(i).address);
        for (auto a : g) member_of[a].push_back(static_cast<std::uint32_t>(groups.size()));
        groups.push_back(std::move(g));
    }
    constexpr std::uint32_t unset = ~0u;
    std::vector<std::uint32_t> label(v.address_count(), unset);
    std::vector<AddressId> queue;
    for (AddressId s = 0; s < v.address_count(); ++s) {
        if (label[s] != unset) continue;
        label[s] = s;
        queue.assign(1, s);
        while (!queue.empty()) {
            const auto a = queue.back();
            queue.pop_back();
            for (auto g : member_of[a])
                for (auto b : groups[g])
                    if (label[b] == unset) {
                        label[b] = s;
                        queue.push_back(b);
                    }
        }
    }
    return label;
}

Result criterion_union_find()
{
    Result r;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    std::size_t mismatches = 0, total_txs = 0, largest = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t txs = i % 100 == 99 ? 10000 : 1 + rng() % 2000;
        const std::size_t addresses = 2 + rng() % (txs + 100);
        const auto v = build_view(fixture::random_chain(rng, {.txs = txs, .addresses = addresses}));
        mismatches += !fixture::same_partition(multi_input_clustering(v).roots(), bfs_components(v));
        total_txs += txs;
        largest = std::max(largest, txs);
    }
    const double secs = seconds_since(t0);
    r.require(mismatches == 0, std::to_string(mismatches) + " partitions differ");
    r.require(largest <= 10000, "corpus above 10k transactions");
    r.require(secs <= 120, "runtime " + fmt(secs, 1) + " s over 120 s");
    r.note("1000 corpora, " + std::to_string(total_txs) + " txs, largest " + std::to_string(largest) + ", " + fmt(secs, 1) + " s");
    return r;
}

// ---------------------------------------------------------------------------
// 2. Every ground-truth change index agrees with the generator's labels.

Result criterion_ground_truth()
{
    Result r;
    const auto& w = world();
    std::size_t unowned = 0;
    for (AddressId a = 0; a < w.view.address_count(); ++a) unowned += !w.synth.labels.entity_of(w.view.address_name(a));
    std::size_t wrong = 0;
    for (const auto& e : w.gt.entries) wrong += w.synth.labels.change_of(w.view.tx(e.tx).txid) != std::optional<std::uint32_t>(e.change_index);
    r.require(w.view.size() >= 50000, "fewer than 50k transactions");
    r.require(w.synth.labels.entities.size() >= 500, "fewer than 500 entities");
    r.require(unowned == 0, std::to_string(unowned) + " addresses without a single owner");
    r.require(!w.gt.empty(), "empty ground truth");
    r.require(wrong == 0, std::to_string(wrong) + " entries disagree with the labels");
    r.require(w.extract_seconds <= 60, "extraction over 60 s");
    r.note(std::to_string(w.view.size()) + " txs, " + std::to_string(w.synth.labels.entities.size()) + " entities, " +
           std::to_string(w.gt.size()) + " entries, precision " + fmt(w.gt.empty() ? 0 : 1.0 - double(wrong) / double(w.gt.size())) +
           ", extraction " + fmt(w.extract_seconds, 2) + " s");
    return r;
}

// ---------------------------------------------------------------------------
// 3. Filter counters are conserved on every run.

bool conserved(const FilterReport& f)
{
    const std::size_t removed = f.unspent_removed + f.two_candidate_removed + f.high_self_rate_removed + f.tag_conflict_removed +
                                f.blocklist_removed + f.reused_change_removed;
    return f.candidates >= removed && f.candidates - removed == f.final;
}

Result criterion_conservation()
{
    Result r;
    std::mt19937_64 rng(303);
    std::size_t runs = 0, broken = 0, two_candidate = 0, tagged = 0, blocked = 0;
    auto check = [&](const GroundTruthSet& gt) {
        ++runs;
        broken += !conserved(gt.report) || gt.report.final != gt.size();
        two_candidate += gt.report.two_candidate_removed > 0;
        tagged += gt.report.tag_conflict_removed > 0;
        blocked += gt.report.blocklist_removed > 0;
    };
    check(world().gt);
    const TagCategory cats[] = {TagCategory::Exchange, TagCategory::Darknet, TagCategory::Gambling, TagCategory::Other};
    for (int round = 0; round < 300; ++round) {
        const std::size_t addresses = 100 + rng() % 2000;
        const auto v = build_view(fixture::random_chain(rng, {.txs = 200 + rng() % 800, .addresses = addresses}));
        const auto base = multi_input_clustering(v);
        TagSet tags;
        GroundTruthOptions opt;
        opt.two_candidate_threshold = static_cast<double>(rng() % 101) / 100.0;
        for (std::size_t k = 0; k < addresses / 10; ++k) {
            const auto a = "a" + std::to_string(rng() % addresses);
            if (!tags.find(a)) tags.add(a, {"e" + std::to_string(rng() % 5), cats[rng() % 4]});
        }
        const std::size_t blocked_count = rng() % 4;
        for (std::size_t k = 0; k < blocked_count; ++k) opt.blocklist.push_back("a" + std::to_string(rng() % addresses));
        check(extract_ground_truth(v, base, tags, opt));
    }
    r.require(broken == 0, std::to_string(broken) + " runs not conserved");
    r.require(two_candidate > 0 && tagged > 0 && blocked > 0, "some filter stage never removed anything");
    r.note(std::to_string(runs) + " runs; removals by two-candidate in " + std::to_string(two_candidate) + ", tag conflict in " +
           std::to_string(tagged) + ", blocklist in " + std::to_string(blocked));
    return r;
}

// ---------------------------------------------------------------------------
// 4. Three fixtures per heuristic: fires on the change, abstains, fires on the spend.

struct HeuristicFixture {
    fixture::Scenario fires;   // unique candidate expected
    std::uint32_t candidate;   // the output it should pick
    fixture::Scenario abstains;
};

std::map<Heuristic, HeuristicFixture> heuristic_fixtures()
{
    std::map<Heuristic, HeuristicFixture> m;
    fixture::Scenario optimal;
    optimal.out_values = {75000, 20000};
    {
        auto single = optimal;
        single.in_values = {100000};
        m[Heuristic::OptimalChange] = {optimal, 1, single};
        auto fee_blocked = optimal;
        fee_blocked.out_values = {50000, 46000};  // 46000 + fee 4000 is not below 50000
        m[Heuristic::OptimalChangeFee] = {optimal, 1, fee_blocked};
    }
    {
        fixture::Scenario typed;
        typed.out_types = {ScriptType::P2SH, ScriptType::P2PKH};
        m[Heuristic::AddressType] = {typed, 1, fixture::Scenario{}};  // both outputs match the inputs
    }
    for (int n = 2; n <= 7; ++n) {
        Satoshi p = 1;
        for (int i = 0; i < n; ++i) p *= 10;
        fixture::Scenario s;
        s.in_values = {4 * p, 4 * p};
        s.out_values = {3 * p, 3 * p + p / 10};
        auto neither = s;
        neither.out_values = {3 * p + 1, 3 * p + 2};
        m[power_of_ten(n)] = {s, 1, neither};
    }
    for (const auto& c : fixture::fingerprint_cases()) {
        auto fires = c.base;
        c.differ(fires.side[0]);
        auto abstains = c.base;
        c.differ(abstains.side[0]);
        c.differ(abstains.side[1]);
        m[c.kind] = {fires, 1, abstains};
    }
    return m;
}

Result criterion_heuristic_fixtures()
{
    Result r;
    const auto fx = heuristic_fixtures();
    std::size_t passed = 0;
    for (auto h : all_heuristics()) {
        const auto it = fx.find(h);
        if (it == fx.end()) {
            r.require(false, std::string(to_string(h)) + " has no fixture");
            continue;
        }
        const auto& f = it->second;
        const auto v = f.fires.chain().view();
        const auto t = fixture::pos(v, "t");
        const auto call = unique_candidate(h, t, v);
        // The same transaction read against two labelings: change at the
        // candidate (a correct call) and change at the other output (a wrong one).
        const bool correct = call == f.candidate;
        const bool wrong = call.has_value() && *call != 1 - f.candidate;
        const auto va = f.abstains.chain().view();
        const bool abstain = !unique_candidate(h, fixture::pos(va, "t"), va);
        r.require(correct, std::string(to_string(h)) + " fire-correct");
        r.require(wrong, std::string(to_string(h)) + " fire-wrong");
        r.require(abstain, std::string(to_string(h)) + " abstain");
        passed += correct && wrong && abstain;
    }
    r.note(std::to_string(passed) + "/" + std::to_string(kHeuristicCount) + " heuristics pass fire-correct, fire-wrong and abstain");
    return r;
}

// ---------------------------------------------------------------------------
// 5. Threshold-vote ROC.

Result criterion_vote_roc()
{
    Result r;
    const auto& w = world();
    std::vector<TxPos> gt_txs;
    for (const auto& e : w.gt.entries) gt_txs.push_back(e.tx);
    const auto votes = build_vote_table(gt_txs, w.view);
    const auto curve = roc_threshold_vote(w.gt, votes);

    bool monotone = true;
    for (std::size_t i = 1; i < curve.points.size(); ++i)
        monotone = monotone && curve.points[i].threshold < curve.points[i - 1].threshold && curve.points[i].fpr >= curve.points[i - 1].fpr &&
                   curve.points[i].tpr >= curve.points[i - 1].tpr;
    // Integer thresholds counted directly with the classifier.
    std::size_t last_hits = ~std::size_t{0};
    for (int t = 1; t <= static_cast<int>(kHeuristicCount); ++t) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < votes.tx_count(); ++i) hits += threshold_vote(votes.row(i, 0), votes.row(i, 1), t).has_value();
        monotone = monotone && hits <= last_hits;
        last_hits = hits;
    }
    r.require(monotone, "curve not monotone in the threshold");
    r.require(curve.auc >= 0.90, "ground-truth auc " + fmt(curve.auc) + " below 0.90");

    // Labels drawn independently of the votes over every voted standard transaction.
    std::vector<TxPos> standard;
    for (TxPos p = 0; p < w.view.size(); ++p)
        if (is_standard(w.view.tx(p)) && !w.view.tx(p).coinbase) standard.push_back(p);
    const auto all_votes = build_vote_table(standard, w.view);
    std::mt19937_64 rng(55);
    GroundTruthSet shuffled;
    for (auto p : standard) shuffled.entries.push_back({p, static_cast<std::uint32_t>(rng() & 1u)});
    shuffled.report.final = shuffled.size();
    const auto margins = vote_margins(shuffled, all_votes);
    const auto noise = roc_auc(margins.scores, margins.labels);
    r.require(margins.scores.size() >= 10000, "shuffled table has fewer than 10k rows");
    r.require(std::abs(noise.auc - 0.5) <= 0.05, "shuffled auc " + fmt(noise.auc) + " outside 0.5 +- 0.05");
    r.note("ground-truth auc " + fmt(curve.auc) + " over " + std::to_string(w.gt.size()) + " txs; shuffled auc " + fmt(noise.auc) +
           " over " + std::to_string(margins.scores.size()) + " rows; " + std::to_string(curve.points.size()) + " curve points");
    return r;
}

// ---------------------------------------------------------------------------
// 6 and 7. Forest against the exhaustive split oracle and the vote classifier.

Dataset random_dataset(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int distinct)
{
    Dataset d;
    d.cols = cols;
    std::uniform_int_distribution<int> v(0, distinct - 1);
    std::vector<double> x(cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (auto& e : x) e = v(rng);
        const bool y = x[0] + x[1] + v(rng) / 2.0 > distinct;
        d.add(x, y, static_cast<std::uint32_t>(i / 2));
    }
    return d;
}

/// Held-out scores recomputed outside the training pipeline.
struct HeldOut {
    std::vector<double> forest, vote;
    std::vector<int> labels;
    bool grouped = true;
    std::size_t train_rows = 0;
};

HeldOut held_out()
{
    const auto& w = world();
    const auto& m = models().trained;
    std::vector<TxPos> txs;
    for (const auto& e : w.gt.entries) txs.push_back(e.tx);
    const auto votes = build_vote_table(txs, w.view);
    const auto rows = build_feature_rows(votes, w.view, w.base, &w.gt);
    std::vector<std::uint32_t> groups;
    for (const auto& row : rows) groups.push_back(row.group);
    const auto test = grouped_split(groups, TrainOptions{}.test_fraction, TrainOptions{}.split_seed);

    HeldOut h;
    std::map<std::uint32_t, std::set<bool>> sides;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sides[groups[i]].insert(test[i]);
        // Every row of a base cluster must map to that cluster.
        const auto& tx = w.view.tx(rows[i].tx);
        h.grouped = h.grouped && rows[i].group == w.base.input_root(tx, w.view);
    }
    for (const auto& [g, s] : sides) h.grouped = h.grouped && s.size() == 1;

    std::vector<double> x(feature_count(ModelVariant::Full));
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
        if (!test[i]) {
            h.train_rows += 2;
            continue;
        }
        auto voted = [](const VoteRow& v) { return std::any_of(v.begin(), v.end(), [](auto x) { return x != 0; }); };
        if (!voted(rows[i].votes) && !voted(rows[i + 1].votes)) continue;
        const int a = positive_votes(rows[i].votes), b = positive_votes(rows[i + 1].votes);
        for (std::size_t k = 0; k < 2; ++k) {
            encode_features(rows[i + k], ModelVariant::Full, x);
            h.forest.push_back(m.full.predict_proba(x));
            h.labels.push_back(rows[i + k].label);
        }
        h.vote.push_back(a - b);
        h.vote.push_back(b - a);
    }
    return h;
}

Result criterion_forest()
{
    Result r;
    std::mt19937_64 rng(606);
    fixture::GiniAudit total;
    for (int round = 0; round < 10; ++round) {
        const auto d = random_dataset(rng, 200, 6, 20);
        const ForestParams p{.n_trees = 5, .max_features = static_cast<std::uint32_t>(1 + round % 6), .min_samples_split = static_cast<std::uint32_t>(2 + round),
                             .seed = rng(), .bootstrap = round % 2 == 0};
        fixture::GiniAudit audit;
        fit(d, p, ModelVariant::Full, fixture::gini_auditor(d, p, audit));
        total.nodes += audit.nodes;
        total.splits += audit.splits;
        total.mismatches += audit.mismatches;
    }
    r.require(total.mismatches == 0, std::to_string(total.mismatches) + " nodes differ from exhaustive enumeration");

    const auto h = held_out();
    const auto forest = roc_auc(h.forest, h.labels);
    const auto vote = roc_auc(h.vote, h.labels);
    r.require(forest.auc >= vote.auc - 0.005, "forest auc " + fmt(forest.auc) + " below vote auc " + fmt(vote.auc) + " - 0.005");
    r.require(std::abs(forest.auc - models().trained.report.forest_roc.auc) < 1e-12, "pipeline report disagrees with recomputation");

    std::size_t straddles = 0;
    for (int round = 0; round < 200; ++round) {
        std::vector<std::uint32_t> groups(50 + rng() % 500);
        for (auto& g : groups) g = static_cast<std::uint32_t>(rng() % (1 + groups.size() / 3));
        const auto test = grouped_split(groups, 0.2, rng());
        straddles += !split_is_grouped(groups, test);
    }
    r.require(h.grouped && straddles == 0, "a base cluster straddles the split");
    r.note(std::to_string(total.nodes) + " audited nodes, " + std::to_string(total.splits) + " splits; forest auc " + fmt(forest.auc) +
           " vs vote auc " + fmt(vote.auc) + " on " + std::to_string(h.labels.size()) + " test rows; grouped split holds");
    return r;
}

Result criterion_low_fpr()
{
    Result r;
    const auto h = held_out();
    const auto forest = roc_auc(h.forest, h.labels);
    const auto vote = roc_auc(h.vote, h.labels);
    RocPoint v{};
    for (const auto& p : vote.points)
        if (p.fpr <= kLowFpr && p.tpr >= v.tpr) v = p;
    RocPoint f{};
    for (const auto& p : forest.points)
        if (p.fpr <= v.fpr && p.tpr >= f.tpr) f = p;
    const double secs = models().train_seconds;
    r.require(f.tpr >= v.tpr, "forest tpr " + fmt(f.tpr) + " below vote tpr " + fmt(v.tpr));
    r.require(secs <= 300, "training over 5 min");
    r.note("vote tpr " + fmt(v.tpr) + " at fpr " + fmt(v.fpr, 5) + " (t = " + fmt(v.threshold, 0) + "); forest tpr " + fmt(f.tpr) +
           " at fpr " + fmt(f.fpr, 5) + "; training " + fmt(secs, 1) + " s");
    return r;
}

// ---------------------------------------------------------------------------
// 8. Constraint safety and refinement.

PredictionSet random_predictions(const ChainView& v, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0, 1);
    auto draw = [&] {
        const double x = u(rng);
        return x < 0.3 ? u(rng) * 0.01 : x < 0.6 ? 0.99 + u(rng) * 0.01 : u(rng);
    };
    PredictionSet ps;
    for (TxPos p = 0; p < v.size(); ++p) {
        const auto& tx = v.tx(p);
        if (tx.coinbase || tx.outputs.size() != 2 || tx.outputs[0].address == kNoAddress || tx.outputs[1].address == kNoAddress) continue;
        Prediction pr;
        pr.tx = p;
        pr.probability = {draw(), draw()};
        ps.items.push_back(pr);
    }
    return ps;
}

Result criterion_constraints()
{
    Result r;
    std::size_t runs = 0, violations = 0, not_refined = 0, pairs = 0, skipped = 0;
    auto check = [&](const ChainView& v, const ClusterAssignment& base, const PredictionSet& ps) {
        ++runs;
        const auto naive = naive_enhance(v, base, ps);
        const auto cons = constrained_enhance(v, base, ps);
        for (const auto& [a, b] : spend_constraints(ps, v, base)) {
            ++pairs;
            violations += cons.clusters.root(a) == cons.clusters.root(b);
        }
        not_refined += !fixture::refines(cons.clusters.roots(), naive.clusters.roots());
        skipped += cons.stats.skipped_conflict;
    };
    check(world().view, world().base, predictions());
    std::mt19937_64 rng(808);
    for (int round = 0; round < 30; ++round) {
        const auto v = build_view(fixture::random_chain(rng, {.txs = 500 + rng() % 3000, .addresses = 100 + rng() % 2000}));
        check(v, multi_input_clustering(v), random_predictions(v, rng));
    }
    r.require(violations == 0, std::to_string(violations) + " forbidden pairs share a root");
    r.require(not_refined == 0, std::to_string(not_refined) + " runs where constrained does not refine naive");
    r.require(skipped > 0, "no merge was ever refused");
    r.note(std::to_string(runs) + " runs, " + std::to_string(pairs) + " forbidden pairs checked, " + std::to_string(skipped) +
           " merges refused");
    return r;
}

// ---------------------------------------------------------------------------
// 9. Injected cross-entity misclassifications.

Result criterion_collapse()
{
    Result r;
    const auto& w = world();
    auto ps = predictions();
    const double p_change = ps.thresholds.p_change, p_spend = ps.thresholds.p_spend;

    // Confident spends already present: (sender base root, receiver base root).
    std::set<std::pair<AddressId, AddressId>> spends;
    for (const auto& it : ps.items) {
        const auto& tx = w.view.tx(it.tx);
        const auto from = w.base.input_root(tx, w.view);
        for (std::uint32_t k = 0; k < 2; ++k)
            if (it.probability[k] <= p_spend) spends.insert({from, w.base.root(tx.outputs[k].address)});
    }

    // Flip transactions whose payment crosses entities into a cluster the
    // sender is already known to pay: the payment becomes "change".
    struct Injected {
        AddressId sender, receiver;
    };
    std::vector<Injected> injected;
    for (auto& it : ps.items) {
        if (injected.size() >= 200) break;
        const auto& tx = w.view.tx(it.tx);
        const auto change = w.synth.labels.change_of(tx.txid);
        if (!change || *change > 1) continue;
        const std::uint32_t pay = 1 - *change;
        const auto sender = w.view.prevout(tx.inputs[0]).address;
        const auto receiver = tx.outputs[pay].address;
        if (entity_of(w, sender) == entity_of(w, receiver)) continue;
        const auto from = w.base.input_root(tx, w.view), to = w.base.root(receiver);
        if (it.probability[pay] <= p_spend) continue;  // that spend is the evidence; keep it
        if (!spends.contains({from, to})) continue;
        it.probability[pay] = std::min(1.0, p_change + 0.005);
        it.probability[*change] = 0.5;
        injected.push_back({sender, receiver});
    }
    const auto naive = naive_enhance(w.view, w.base, ps);
    const auto cons = constrained_enhance(w.view, w.base, ps);
    std::set<AddressId> naive_mixed, cons_mixed;
    for (const auto& i : injected) {
        if (naive.clusters.root(i.sender) == naive.clusters.root(i.receiver)) naive_mixed.insert(naive.clusters.root(i.sender));
        if (cons.clusters.root(i.sender) == cons.clusters.root(i.receiver)) cons_mixed.insert(cons.clusters.root(i.sender));
    }
    r.require(!injected.empty(), "no injectable transaction found");
    r.require(!naive_mixed.empty(), "naive enhancement produced no multi-entity cluster from the injected edges");
    r.require(cons_mixed.empty(), std::to_string(cons_mixed.size()) + " multi-entity clusters survive constrained enhancement");
    r.note(std::to_string(injected.size()) + " flips injected; naive multi-entity clusters " + std::to_string(naive_mixed.size()) +
           ", constrained " + std::to_string(cons_mixed.size()) + " (refused merges " + std::to_string(cons.stats.skipped_conflict) + ")");
    return r;
}

// ---------------------------------------------------------------------------
// 10. Analytics oracles.

Result criterion_analytics()
{
    Result r;
    const auto& w = world();

    // Pair probability: sum of C(size, 2) over C(N, 2), in integers.
    {
        std::mt19937_64 rng(1010);
        std::size_t wrong = 0;
        for (int round = 0; round < 100; ++round) {
            const std::size_t n = 2 + rng() % 500;
            std::vector<std::size_t> sizes;
            for (std::size_t left = n; left > 0;) {
                const std::size_t s = 1 + rng() % std::min<std::size_t>(left, 1 + rng() % 40);
                sizes.push_back(s);
                left -= s;
            }
            std::uint64_t same = 0;
            for (auto s : sizes) same += static_cast<std::uint64_t>(s) * (s - 1) / 2;
            const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
            const auto pc = pair_counts(sizes);
            wrong += pc.same != same || pc.total != total || pair_probability(sizes) != static_cast<double>(same) / static_cast<double>(total);
        }
        r.require(wrong == 0, std::to_string(wrong) + " pair probabilities differ from the closed form");
    }

    // Velocity on the two-input payment with change.
    {
        fixture::Chain ch;
        ch.coinbase("f", {out(50000, "A"), out(50000, "B")});
        ch.add("t", {in("f", 0), in("f", 1)}, {out(75000, "P"), out(20000, "C")});
        const auto v = ch.view();
        DisjointSet ds(v.address_count());
        ds.unite(fixture::addr(v, "A"), fixture::addr(v, "B"));
        ds.unite(fixture::addr(v, "A"), fixture::addr(v, "C"));
        Satoshi moved = 0;
        for (const auto& b : velocity(v, ClusterAssignment(std::move(ds), v), 1'000'000'000)) moved += b.moved;
        r.require(moved == 75000, "velocity moved " + std::to_string(moved) + ", expected 75000");
    }

    // Flows under entity clustering reproduce the generator's cash-out ledger.
    {
        DisjointSet ds(w.view.address_count());
        std::map<std::uint32_t, AddressId> first;
        for (AddressId a = 0; a < w.view.address_count(); ++a) {
            auto [it, fresh] = first.emplace(entity_of(w, a), a);
            if (!fresh) ds.unite(it->second, a);
        }
        const ClusterAssignment entities(std::move(ds), w.view);
        std::set<std::uint32_t> src, dst;
        for (const auto& [addr, tag] : w.synth.tags.sorted()) {
            const auto e = *w.synth.labels.entity_of(addr);
            if (tag.category == TagCategory::Darknet) src.insert(e);
            if (tag.category == TagCategory::Exchange) dst.insert(e);
        }
        std::map<std::string, Satoshi> ledger;
        for (const auto& p : w.synth.labels.payments) {
            if (p.from_entity == p.to_entity || !src.contains(p.from_entity) || !dst.contains(p.to_entity)) continue;
            if (is_coinjoin(w.view.tx(*w.view.find_tx(p.txid)))) continue;
            ledger[w.synth.labels.entities.at(p.from_entity).label] += p.value;
        }
        r.require(!ledger.empty(), "the corpus has no tagged cash-outs");
        r.require(flows(w.view, entities, w.synth.tags, TagCategory::Darknet, TagCategory::Exchange) == ledger,
                  "flows differ from the generator ledger");
        r.note(std::to_string(ledger.size()) + " cash-out senders match the ledger");
    }

    // Fresh-address rule, locally and globally.
    {
        fixture::Chain ch;
        ch.coinbase("f", {out(50000, "A"), out(50000, "A"), out(9000, "S")});
        ch.add("both_fresh", {in("f", 0)}, {out(20000, "N1"), out(29000, "N2")});
        ch.add("one_fresh", {in("f", 1)}, {out(20000, "S"), out(29000, "N3")});
        ch.add("reuse_later", {in("both_fresh", 0)}, {out(5000, "N3"), out(14000, "N4")});
        const auto v = ch.view();
        const std::vector<TxPos> txs{fixture::pos(v, "both_fresh"), fixture::pos(v, "one_fresh"), fixture::pos(v, "reuse_later")};
        const auto local = meiklejohn_predict(v, txs, MeiklejohnVariant::Local);
        const auto global = meiklejohn_predict(v, txs, MeiklejohnVariant::Global);
        const bool ok = !local[0] && local[1] == 1u && !global[1] && local[2] == 1u && global[2] == 1u && !global[0];
        r.require(ok, "fresh-address fixture");
    }
    r.note("pair probability, velocity and fresh-address fixtures exact");
    return r;
}

// ---------------------------------------------------------------------------
// 11. Full command-line pipeline twice: identical bytes, bounded runtime.

int cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "changetrace");
    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    return ct::cli::run(static_cast<int>(argv.size()), argv.data());
}

/// Runs every subcommand into `dir`; returns the first failing step, if any.
std::optional<std::string> run_pipeline(const fs::path& dir)
{
    fs::create_directories(dir);
    auto p = [&](const std::string& name) { return (dir / name).string(); };
    const std::vector<std::vector<std::string>> steps{
        {"generate", "--seed", "2024", "--days", "130", "--out-dir", dir.string()},
        {"cluster-base", "--corpus", p("corpus.jsonl"), "--out", p("base.jsonl"), "--summary", p("base_summary.csv")},
        {"extract-gt", "--corpus", p("corpus.jsonl"), "--clusters", p("base.jsonl"), "--tags", p("tags.jsonl"), "--out", p("gt.jsonl")},
        {"eval-heuristics", "--corpus", p("corpus.jsonl"), "--clusters", p("base.jsonl"), "--ground-truth", p("gt.jsonl"), "--out",
         p("scores.csv"), "--votes", p("votes.bin")},
        {"vote-roc", "--corpus", p("corpus.jsonl"), "--ground-truth", p("gt.jsonl"), "--votes", p("votes.bin"), "--out", p("vote_roc.csv")},
        {"train", "--corpus", p("corpus.jsonl"), "--clusters", p("base.jsonl"), "--ground-truth", p("gt.jsonl"), "--out-dir", p("models"),
         "--seed", "3"},
        {"predict", "--corpus", p("corpus.jsonl"), "--clusters", p("base.jsonl"), "--full-model", p("models/full.model"), "--reduced-model",
         p("models/reduced.model"), "--out", p("predictions.jsonl")},
        {"enhance", "--naive", "--corpus", p("corpus.jsonl"), "--clusters", p("base.jsonl"), "--predictions", p("predictions.jsonl"), "--out",
         p("naive.jsonl"), "--collapse-csv", p("naive_collapse.csv")},
        {"enhance", "--constrained", "--corpus", p("corpus.jsonl"), "--clusters", p("base.jsonl"), "--predictions", p("predictions.jsonl"),
         "--out", p("constrained.jsonl"), "--collapse-csv", p("constrained_collapse.csv")},
        {"analyze", "flows", "--corpus", p("corpus.jsonl"), "--tags", p("tags.jsonl"), "--before", p("base.jsonl"), "--after",
         p("constrained.jsonl"), "--out", p("flows.csv")},
        {"analyze", "velocity", "--corpus", p("corpus.jsonl"), "--clusters", p("constrained.jsonl"), "--out", p("velocity.csv")},
        {"analyze", "meiklejohn", "--corpus", p("corpus.jsonl"), "--clusters", p("base.jsonl"), "--variant", "global", "--out",
         p("meiklejohn.jsonl"), "--clusters-out", p("meiklejohn_clusters.jsonl")},
        {"analyze", "compare", "--corpus", p("corpus.jsonl"), "--base", p("base.jsonl"), "--ours", p("constrained.jsonl"), "--theirs",
         p("meiklejohn_clusters.jsonl"), "--ours-calls", p("predictions.jsonl"), "--theirs-calls", p("meiklejohn.jsonl"), "--out",
         p("compare.csv")},
        {"validate", "--corpus", p("corpus.jsonl"), "--predictions", p("predictions.jsonl"), "--labels", p("labels.jsonl"), "--out",
         p("validate.csv")},
    };
    for (const auto& s : steps)
        if (cli(s) != 0) return s[0] + (s[0] == "analyze" ? " " + s[1] : "");
    return std::nullopt;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Relative paths of every file except run manifests, which carry timings.
std::vector<fs::path> artifacts(const fs::path& dir)
{
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto name = e.path().filename().string();
        if (name == "manifest.json" || name.ends_with(".manifest.json")) continue;
        files.push_back(fs::relative(e.path(), dir));
    }
    std::sort(files.begin(), files.end());
    return files;
}

Result criterion_determinism()
{
    Result r;
    std::random_device rd;
    const auto root = fs::temp_directory_path() / ("ct_accept_" + std::to_string(rd()));
    struct Cleanup {
        fs::path p;
        ~Cleanup() { fs::remove_all(p); }
    } cleanup{root};

    double worst = 0;
    for (const char* run : {"a", "b"}) {
        const auto t0 = Clock::now();
        const auto failed = run_pipeline(root / run);
        const double secs = seconds_since(t0);
        worst = std::max(worst, secs);
        r.require(!failed, std::string("run ") + run + " failed at " + failed.value_or(""));
        r.require(secs <= 600, std::string("run ") + run + " took " + fmt(secs, 1) + " s");
    }
    const auto a = artifacts(root / "a"), b = artifacts(root / "b");
    r.require(a == b, "the runs wrote different file sets");
    std::size_t differ = 0;
    for (const auto& f : a)
        if (slurp(root / "a" / f) != slurp(root / "b" / f)) {
            ++differ;
            r.require(false, f.string() + " differs");
        }
    std::size_t txs = 0;
    {
        std::ifstream c(root / "a" / "corpus.jsonl");
        for (std::string line; std::getline(c, line);) ++txs;
        txs -= txs > 0;  // header line
    }
    r.require(txs >= 200000, "corpus has " + std::to_string(txs) + " transactions, fewer than 200k");
    r.note(std::to_string(a.size()) + " artifacts compared, " + std::to_string(differ) + " differ; " + std::to_string(txs) +
           " txs; slowest run " + fmt(worst, 1) + " s");
    return r;
}

}  // namespace

/// Optional arguments select criteria by number; all run by default.
int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
        {"union-find oracle", criterion_union_find},
        {"ground-truth exactness", criterion_ground_truth},
        {"filter conservation", criterion_conservation},
        {"heuristic fixtures", criterion_heuristic_fixtures},
        {"threshold-vote roc", criterion_vote_roc},
        {"forest vs oracle", criterion_forest},
        {"low-fpr dominance", criterion_low_fpr},
        {"constraint safety", criterion_constraints},
        {"collapse prevention", criterion_collapse},
        {"analytics oracles", criterion_analytics},
        {"end-to-end determinism", criterion_determinism},
    };
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.contains(i + 1)) continue;
        const auto t0 = Clock::now();
        Result res;
        try {
            res = criteria[i].second();
        } catch (const std::exception& e) {
            res.pass = false;
            res.detail = std::string("exception: ") + e.what();
        }
        failures += !res.pass;
        std::cout << (res.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << " (" << fmt(seconds_since(t0), 1)
                  << " s): " << res.detail << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
