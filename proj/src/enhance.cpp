#include "changetrace/enhance.hpp"

#include "changetrace/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

namespace ct {

void Thresholds::validate() const
{
    if (!(p_spend >= 0.0 && p_spend < p_change && p_change <= 1.0)) throw Error("thresholds must satisfy 0 <= p_spend < p_change <= 1");
}

PredictionSet predict_txs(std::span<const TxPos> txs, const ChainView& view, const ClusterAssignment& base, const ForestModel& full,
                          const ForestModel& reduced, const Thresholds& thresholds, const CoinJoinRule& rule)
{
    thresholds.validate();
    if (full.variant != ModelVariant::Full || full.features != feature_count(ModelVariant::Full))
        throw Error("full model has the wrong variant");
    if (reduced.variant != ModelVariant::NoFingerprint || reduced.features != feature_count(ModelVariant::NoFingerprint))
        throw Error("reduced model has the wrong variant");

    const auto votes = build_vote_table(txs, view, all_heuristics(), rule);
    const auto rows = build_feature_rows(votes, view, base);
    std::vector<Prediction> slots(votes.tx_count());
    std::vector<char> keep(votes.tx_count(), 0);
    parallel_for(votes.tx_count(), [&](std::size_t i) {
        if (votes.no_votes(i)) return;
        const bool spent = view.all_outputs_spent(votes.txs[i]);
        const auto& model = spent ? full : reduced;
        std::vector<double> x(model.features);
        Prediction p;
        p.tx = votes.txs[i];
        p.variant = model.variant;
        for (std::uint32_t o = 0; o < 2; ++o) {
            encode_features(rows[2 * i + o], model.variant, x);
            p.probability[o] = model.predict_proba(x);
        }
        slots[i] = p;
        keep[i] = 1;
    });
    PredictionSet out;
    out.thresholds = thresholds;
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (keep[i]) out.items.push_back(slots[i]);
    std::sort(out.items.begin(), out.items.end(), [](const auto& a, const auto& b) { return a.tx < b.tx; });
    return out;
}

PredictionSet predict_all(const ChainView& view, const ClusterAssignment& base, const ForestModel& full, const ForestModel& reduced,
                          const Thresholds& thresholds, const CoinJoinRule& rule)
{
    const auto txs = unknown_change_txs(view, base, rule);
    return predict_txs(txs, view, base, full, reduced, thresholds, rule);
}

void write_predictions(std::ostream& out, const PredictionSet& p, const ChainView& view)
{
    for (const auto& it : p.items) {
        for (std::uint32_t o = 0; o < 2; ++o) {
            nlohmann::ordered_json j;
            j["txid"] = view.tx(it.tx).txid;
            j["output_index"] = o;
            j["probability"] = it.probability[o];
            j["model"] = to_string(it.variant);
            out << j.dump() << '\n';
        }
    }
}

PredictionSet read_predictions(std::istream& in, const ChainView& view, const Thresholds& thresholds)
{
    thresholds.validate();
    std::map<TxPos, Prediction> by_tx;
    std::map<TxPos, std::uint8_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string txid, model;
        std::uint32_t out = 0;
        double prob = 0;
        try {
            auto j = nlohmann::json::parse(line);
            txid = j.at("txid").get<std::string>();
            out = j.at("output_index").get<std::uint32_t>();
            prob = j.at("probability").get<double>();
            model = j.value("model", std::string("full"));
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(lineno, std::string("malformed prediction record: ") + e.what());
        }
        auto p = view.find_tx(txid);
        if (!p) throw CorpusError(lineno, "prediction references unknown transaction " + txid);
        if (out > 1 || view.tx(*p).outputs.size() != 2) throw CorpusError(lineno, "prediction must target output 0 or 1 of a two-output transaction");
        if (!(prob >= 0.0 && prob <= 1.0)) throw CorpusError(lineno, "probability outside [0,1]");
        auto& item = by_tx[*p];
        item.tx = *p;
        item.probability[out] = prob;
        if (model == "no_fingerprint") item.variant = ModelVariant::NoFingerprint;
        else if (model != "full") throw CorpusError(lineno, "unknown model variant " + model);
        seen[*p] |= static_cast<std::uint8_t>(1u << out);
    }
    PredictionSet ps;
    ps.thresholds = thresholds;
    for (auto& [tx, item] : by_tx) {
        if (seen[tx] != 0b11) throw Error("prediction file lacks an output of transaction " + view.tx(tx).txid);
        ps.items.push_back(item);
    }
    return ps;
}

// ---------------------------------------------------------------------------

namespace {

/// Index of the single output above p_change; -1 if none, -2 if both.
int change_call(const Prediction& p, const Thresholds& t)
{
    const bool a = p.probability[0] > t.p_change, b = p.probability[1] > t.p_change;
    if (a && b) return -2;
    if (a) return 0;
    if (b) return 1;
    return -1;
}

}  // namespace

std::vector<std::pair<AddressId, AddressId>> spend_constraints(const PredictionSet& p, const ChainView& view,
                                                               const ClusterAssignment& base)
{
    std::vector<std::pair<AddressId, AddressId>> out;
    for (const auto& it : p.items) {
        const auto& tx = view.tx(it.tx);
        const auto in_root = base.input_root(tx, view);
        for (std::uint32_t o = 0; o < 2; ++o) {
            if (it.probability[o] > p.thresholds.p_spend) continue;
            const auto r = base.root(tx.outputs[o].address);
            if (r != in_root) out.emplace_back(in_root, r);
        }
    }
    return out;
}

EnhanceResult naive_enhance(const ChainView& view, const ClusterAssignment& base, const PredictionSet& p)
{
    p.thresholds.validate();
    DisjointSet ds = base.disjoint_set();
    EnhanceStats st;
    for (const auto& it : p.items) {
        const int c = change_call(it, p.thresholds);
        if (c == -2) ++st.both_above;
        if (c < 0) continue;
        ++st.change_edges;
        const auto& tx = view.tx(it.tx);
        const auto a = ds.find(view.prevout(tx.inputs.front()).address);
        const auto b = ds.find(tx.outputs[static_cast<std::size_t>(c)].address);
        if (a == b) {
            ++st.redundant;
            continue;
        }
        ds.unite(a, b);
        ++st.merges;
    }
    return {ClusterAssignment(std::move(ds), view), st};
}

namespace {

/// Forbidden roots per root; entries may be stale ids resolved through find().
class ConstraintStore {
public:
    explicit ConstraintStore(DisjointSet& ds) : ds_(ds) {}

    void forbid(AddressId a, AddressId b)
    {
        a = ds_.find(a);
        b = ds_.find(b);
        if (a == b) return;
        sets_[a].push_back(b);
        sets_[b].push_back(a);
    }

    /// True if the clusters rooted at a and b may not be merged.
    bool conflict(AddressId a, AddressId b)
    {
        auto ia = sets_.find(a), ib = sets_.find(b);
        if (ia == sets_.end() || ib == sets_.end()) return false;
        // Storage is symmetric, so scanning the smaller side suffices.
        const bool a_smaller = ia->second.size() <= ib->second.size();
        auto& scan = a_smaller ? ia->second : ib->second;
        const AddressId other = a_smaller ? b : a;
        for (auto x : scan)
            if (ds_.find(x) == other) return true;
        return false;
    }

    void merged(AddressId a, AddressId b, AddressId root)
    {
        const AddressId gone = root == a ? b : a;
        auto ig = sets_.find(gone);
        if (ig == sets_.end()) return;
        auto moved = std::move(ig->second);
        sets_.erase(ig);
        auto& dst = sets_[root];
        dst.insert(dst.end(), moved.begin(), moved.end());
        if (dst.size() > 64 && dst.size() > 2 * canonical_size_[root]) canonicalize(root);
    }

private:
    void canonicalize(AddressId root)
    {
        auto& v = sets_[root];
        for (auto& x : v) x = ds_.find(x);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        canonical_size_[root] = v.size();
    }

    DisjointSet& ds_;
    std::unordered_map<AddressId, std::vector<AddressId>> sets_;
    std::unordered_map<AddressId, std::size_t> canonical_size_;
};

}  // namespace

EnhanceResult constrained_enhance(const ChainView& view, const ClusterAssignment& base, const PredictionSet& p)
{
    p.thresholds.validate();
    DisjointSet ds = base.disjoint_set();
    ConstraintStore store(ds);
    EnhanceStats st;
    for (const auto& [a, b] : spend_constraints(p, view, base)) {
        store.forbid(a, b);
        ++st.constraints;
    }
    for (const auto& it : p.items) {
        const int c = change_call(it, p.thresholds);
        if (c == -2) ++st.both_above;
        if (c < 0) continue;
        ++st.change_edges;
        const auto& tx = view.tx(it.tx);
        const auto a = ds.find(view.prevout(tx.inputs.front()).address);
        const auto b = ds.find(tx.outputs[static_cast<std::size_t>(c)].address);
        if (a == b) {
            ++st.redundant;
            continue;
        }
        if (store.conflict(a, b)) {
            ++st.skipped_conflict;
            continue;
        }
        const auto r = ds.unite(a, b);
        store.merged(a, b, r);
        ++st.merges;
    }
    return {ClusterAssignment(std::move(ds), view), st};
}

ClusterAssignment merge_change_calls(const ChainView& view, const ClusterAssignment& base,
                                     std::span<const std::pair<TxPos, std::uint32_t>> calls)
{
    DisjointSet ds = base.disjoint_set();
    for (const auto& [p, o] : calls) {
        const auto& tx = view.tx(p);
        if (tx.coinbase || o >= tx.outputs.size() || tx.outputs[o].address == kNoAddress) continue;
        ds.unite(view.prevout(tx.inputs.front()).address, tx.outputs[o].address);
    }
    return ClusterAssignment(std::move(ds), view);
}

// ---------------------------------------------------------------------------

std::uint32_t nearest_rank(std::span<const std::uint32_t> sorted, double q)
{
    if (sorted.empty()) return 0;
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(sorted.size()) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

CollapseReport collapse_report(const ClusterAssignment& before, const ClusterAssignment& after, const ChainView& view,
                               const EnhanceStats& stats)
{
    (void)view;
    if (before.address_count() != after.address_count()) throw Error("clusterings cover different corpora");
    // Constituent base roots of each enhanced root.
    std::map<AddressId, std::vector<AddressId>> parts;
    for (auto r : before.cluster_roots()) parts[after.root(r)].push_back(r);

    CollapseReport rep;
    rep.stats = stats;
    std::vector<std::uint32_t> smaller;
    for (auto& [root, bases] : parts) {
        if (bases.size() < 2) continue;
        AffectedCluster a;
        a.root = root;
        a.constituents = static_cast<std::uint32_t>(bases.size());
        std::uint32_t max_addr = 0, max_tx = 0;
        std::int64_t max_span = 0;
        std::size_t largest = 0;
        for (std::size_t i = 0; i < bases.size(); ++i) {
            const auto& s = before.stats(bases[i]);
            max_addr = std::max(max_addr, s.address_count);
            if (s.tx_count > max_tx) {
                max_tx = s.tx_count;
                largest = i;
            }
            if (s.tx_count >= 2) {
                a.has_time_gap = true;
                max_span = std::max(max_span, s.last_time - s.first_time);
            }
        }
        for (std::size_t i = 0; i < bases.size(); ++i)
            if (i != largest) smaller.push_back(before.stats(bases[i]).tx_count);
        const auto& s = after.stats(root);
        a.address_increase = s.address_count - max_addr;
        a.tx_increase = static_cast<std::int64_t>(s.tx_count) - static_cast<std::int64_t>(max_tx);
        if (a.has_time_gap) a.time_gap_change = (s.last_time - s.first_time) - max_span;
        rep.clusters.push_back(a);
    }
    std::sort(smaller.begin(), smaller.end());
    if (!smaller.empty())
        for (double q : kCollapsePercentiles) rep.smaller_tx_percentiles.emplace_back(q, nearest_rank(smaller, q));
    return rep;
}

void write_collapse_report(std::ostream& out, const CollapseReport& r, const ChainView& view)
{
    nlohmann::ordered_json j;
    j["affected_clusters"] = r.clusters.size();
    std::uint64_t addr = 0;
    std::int64_t txs = 0;
    std::uint32_t max_addr = 0;
    for (const auto& c : r.clusters) {
        addr += c.address_increase;
        txs += c.tx_increase;
        max_addr = std::max(max_addr, c.address_increase);
    }
    j["total_address_increase"] = addr;
    j["total_tx_increase"] = txs;
    j["max_address_increase"] = max_addr;
    auto pct = nlohmann::ordered_json::array();
    for (const auto& [q, v] : r.smaller_tx_percentiles) pct.push_back({{"percentile", q}, {"smaller_cluster_tx_count", v}});
    j["smaller_cluster_tx_percentiles"] = pct;
    j["change_edges"] = r.stats.change_edges;
    j["merges"] = r.stats.merges;
    j["redundant_merges"] = r.stats.redundant;
    j["skipped_both_above"] = r.stats.both_above;
    j["constraints"] = r.stats.constraints;
    j["skipped_conflicting_merges"] = r.stats.skipped_conflict;
    (void)view;
    out << j.dump(2) << '\n';
}

void write_collapse_csv(std::ostream& out, const CollapseReport& r, const ChainView& view)
{
    out << "root,constituents,address_increase,tx_increase,time_gap_change\n";
    for (const auto& c : r.clusters) {
        out << view.address_name(c.root) << ',' << c.constituents << ',' << c.address_increase << ',' << c.tx_increase << ',';
        if (c.has_time_gap) out << c.time_gap_change;
        out << '\n';
    }
}

}  // namespace ct
