#include "changetrace/ground_truth.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace ct {

namespace {

bool reuses_input_address(const Transaction& tx, const ChainView& view)
{
    for (const auto& in : tx.inputs) {
        const auto a = view.prevout(in).address;
        for (const auto& o : tx.outputs)
            if (o.address == a) return true;
    }
    return false;
}

}  // namespace

std::optional<std::uint32_t> GroundTruthSet::change_of(TxPos tx) const
{
    auto it = std::lower_bound(entries.begin(), entries.end(), tx, [](const GroundTruthEntry& e, TxPos p) { return e.tx < p; });
    if (it == entries.end() || it->tx != tx) return std::nullopt;
    return it->change_index;
}

CandidateSet extract_candidates(const ChainView& view, const ClusterAssignment& base, const CoinJoinRule& rule)
{
    CandidateSet out;
    for (TxPos p = 0; p < view.size(); ++p) {
        const auto& tx = view.tx(p);
        if (!is_standard(tx, rule)) continue;
        ++out.standard;
        if (reuses_input_address(tx, view)) {
            ++out.address_reuse;
            continue;
        }
        const auto root = base.input_root(tx, view);
        std::uint8_t mask = 0;
        for (std::uint32_t i = 0; i < 2; ++i)
            if (base.root(tx.outputs[i].address) == root) mask |= static_cast<std::uint8_t>(1u << i);
        if (mask) out.txs.push_back({p, mask, root});
    }
    return out;
}

std::vector<Candidate> filter_unspent(std::vector<Candidate> c, const ChainView& view, FilterReport& report)
{
    const auto before = c.size();
    std::erase_if(c, [&](const Candidate& k) { return !view.all_outputs_spent(k.tx); });
    report.unspent_removed += before - c.size();
    return c;
}

std::vector<Candidate> filter_two_candidates(std::vector<Candidate> c, const ClusterAssignment& base, double threshold,
                                             FilterReport& report)
{
    (void)base;
    report.two_candidate_threshold = threshold;
    // Rate denominator: the cluster's candidate transactions.
    std::unordered_map<AddressId, std::pair<std::size_t, std::size_t>> per_root;  // (two-sided, total)
    for (const auto& k : c) {
        auto& e = per_root[k.root];
        e.first += k.two_sided();
        ++e.second;
    }
    std::unordered_set<AddressId> dropped;
    for (const auto& [root, counts] : per_root)
        if (counts.second > 0 && static_cast<double>(counts.first) > threshold * static_cast<double>(counts.second))
            dropped.insert(root);
    report.high_self_rate_clusters += dropped.size();
    std::vector<Candidate> out;
    out.reserve(c.size());
    for (const auto& k : c) {
        if (k.two_sided()) ++report.two_candidate_removed;
        else if (dropped.contains(k.root)) ++report.high_self_rate_removed;
        else out.push_back(k);
    }
    return out;
}

std::vector<Candidate> filter_tag_conflicts(std::vector<Candidate> c, const ChainView& view, const ClusterAssignment& base,
                                            const TagSet& tags, const std::vector<std::string>& blocklist, FilterReport& report)
{
    std::unordered_map<AddressId, std::set<std::string>> labels;
    for (const auto& [addr, tag] : tags.sorted())
        if (auto a = view.find_address(addr)) labels[base.root(*a)].insert(tag.label);
    std::unordered_set<AddressId> conflicted;
    for (const auto& [root, ls] : labels)
        if (ls.size() >= 2) conflicted.insert(root);
    std::unordered_set<AddressId> blocked;
    for (const auto& addr : blocklist)
        if (auto a = view.find_address(addr)) blocked.insert(base.root(*a));

    std::unordered_set<AddressId> hit_conflict;
    std::vector<Candidate> out;
    out.reserve(c.size());
    for (const auto& k : c) {
        if (blocked.contains(k.root)) {
            ++report.blocklist_removed;
        } else if (conflicted.contains(k.root)) {
            ++report.tag_conflict_removed;
            hit_conflict.insert(k.root);
        } else {
            out.push_back(k);
        }
    }
    report.tag_conflict_clusters += hit_conflict.size();
    return out;
}

GroundTruthSet filter_known_change(std::vector<Candidate> c, const ChainView& view, FilterReport report, const CoinJoinRule& rule)
{
    c = filter_unspent(std::move(c), view, report);
    std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) { return a.tx < b.tx; });

    GroundTruthSet gt;
    DisjointSet prefix(view.address_count());
    std::size_t next = 0;
    for (TxPos p = 0; p < view.size() && next < c.size(); ++p) {
        const auto& tx = view.tx(p);
        while (next < c.size() && c[next].tx == p) {
            const auto& k = c[next++];
            const auto change = k.change_index();
            const auto change_addr = tx.outputs[change].address;
            const bool fresh = view.first_seen(change_addr) == p;
            bool known = false;
            if (!fresh) {
                const auto r = prefix.find(change_addr);
                for (const auto& in : tx.inputs)
                    if (prefix.find(view.prevout(in).address) == r) {
                        known = true;
                        break;
                    }
            }
            if (known) {
                ++report.reused_change_removed;
                continue;
            }
            const auto spend_addr = tx.outputs[1 - change].address;
            const bool spend_fresh = view.first_seen(spend_addr) == p;
            ++report.freshness[fresh ? 1 : 0][spend_fresh ? 1 : 0];
            gt.entries.push_back({p, change});
        }
        if (skip_multi_input(tx, rule)) continue;
        const auto first = view.prevout(tx.inputs.front()).address;
        for (std::size_t i = 1; i < tx.inputs.size(); ++i) prefix.unite(first, view.prevout(tx.inputs[i]).address);
    }
    report.final = gt.entries.size();
    gt.report = report;
    return gt;
}

GroundTruthSet extract_ground_truth(const ChainView& view, const ClusterAssignment& base, const TagSet& tags,
                                    const GroundTruthOptions& options)
{
    auto cs = extract_candidates(view, base, options.coinjoin);
    FilterReport report;
    report.standard = cs.standard;
    report.address_reuse = cs.address_reuse;
    report.candidates = cs.txs.size();
    auto c = filter_unspent(std::move(cs.txs), view, report);
    c = filter_two_candidates(std::move(c), base, options.two_candidate_threshold, report);
    c = filter_tag_conflicts(std::move(c), view, base, tags, options.blocklist, report);
    return filter_known_change(std::move(c), view, report, options.coinjoin);
}

std::vector<TxPos> unknown_change_txs(const ChainView& view, const ClusterAssignment& base, const CoinJoinRule& rule)
{
    std::vector<TxPos> out;
    for (TxPos p = 0; p < view.size(); ++p) {
        const auto& tx = view.tx(p);
        if (!is_standard(tx, rule) || reuses_input_address(tx, view)) continue;
        const auto root = base.input_root(tx, view);
        if (base.root(tx.outputs[0].address) == root || base.root(tx.outputs[1].address) == root) continue;
        out.push_back(p);
    }
    return out;
}

void write_ground_truth(std::ostream& out, const GroundTruthSet& gt, const ChainView& view)
{
    for (const auto& e : gt.entries) {
        nlohmann::ordered_json j;
        j["txid"] = view.tx(e.tx).txid;
        j["change_index"] = e.change_index;
        out << j.dump() << '\n';
    }
}

GroundTruthSet read_ground_truth(std::istream& in, const ChainView& view)
{
    GroundTruthSet gt;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string txid;
        std::uint32_t idx = 0;
        try {
            auto j = nlohmann::json::parse(line);
            txid = j.at("txid").get<std::string>();
            idx = j.at("change_index").get<std::uint32_t>();
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(lineno, std::string("malformed ground-truth record: ") + e.what());
        }
        auto p = view.find_tx(txid);
        if (!p) throw CorpusError(lineno, "ground truth references unknown transaction " + txid);
        if (idx >= view.tx(*p).outputs.size()) throw CorpusError(lineno, "change index out of range for " + txid);
        gt.entries.push_back({*p, idx});
    }
    std::sort(gt.entries.begin(), gt.entries.end(), [](const auto& a, const auto& b) { return a.tx < b.tx; });
    gt.report.final = gt.entries.size();
    return gt;
}

void write_filter_report(std::ostream& out, const FilterReport& r)
{
    nlohmann::ordered_json j;
    j["standard_transactions"] = r.standard;
    j["address_reuse_excluded"] = r.address_reuse;
    j["candidates"] = r.candidates;
    j["removed"]["unspent"] = r.unspent_removed;
    j["removed"]["two_candidate"] = r.two_candidate_removed;
    j["removed"]["high_self_rate_txs"] = r.high_self_rate_removed;
    j["removed"]["high_self_rate_clusters"] = r.high_self_rate_clusters;
    j["removed"]["tag_conflict_txs"] = r.tag_conflict_removed;
    j["removed"]["tag_conflict_clusters"] = r.tag_conflict_clusters;
    j["removed"]["blocklist"] = r.blocklist_removed;
    j["removed"]["reused_change"] = r.reused_change_removed;
    j["final"] = r.final;
    j["conserved"] = r.conserved();
    j["final_share_of_standard"] = r.standard ? static_cast<double>(r.final) / static_cast<double>(r.standard) : 0.0;
    j["freshness"]["change_reused_spend_reused"] = r.freshness[0][0];
    j["freshness"]["change_reused_spend_fresh"] = r.freshness[0][1];
    j["freshness"]["change_fresh_spend_reused"] = r.freshness[1][0];
    j["freshness"]["change_fresh_spend_fresh"] = r.freshness[1][1];
    j["settings"]["two_candidate_threshold"] = r.two_candidate_threshold;
    j["settings"]["two_candidate_rate_denominator"] = "candidate transactions of the base cluster";
    j["settings"]["coinjoin_rule"] = "stand-in: inputs>=5, outputs>=5, most frequent output value >=3 times";
    out << j.dump(2) << '\n';
}

}  // namespace ct
