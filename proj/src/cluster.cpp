#include "changetrace/cluster.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace ct {

DisjointSet::DisjointSet(std::size_t n) : parent_(n), size_(n, 1)
{
    for (std::size_t i = 0; i < n; ++i) parent_[i] = static_cast<std::uint32_t>(i);
}

std::uint32_t DisjointSet::add()
{
    const auto id = static_cast<std::uint32_t>(parent_.size());
    parent_.push_back(id);
    size_.push_back(1);
    return id;
}

void DisjointSet::check(std::uint32_t a) const
{
    if (a >= parent_.size()) throw std::out_of_range("unknown disjoint-set id " + std::to_string(a));
}

std::uint32_t DisjointSet::find(std::uint32_t a)
{
    check(a);
    std::uint32_t r = a;
    while (parent_[r] != r) r = parent_[r];
    while (parent_[a] != r) {
        const auto next = parent_[a];
        parent_[a] = r;
        a = next;
    }
    return r;
}

std::uint32_t DisjointSet::find(std::uint32_t a) const
{
    check(a);
    while (parent_[a] != a) a = parent_[a];
    return a;
}

std::uint32_t DisjointSet::unite(std::uint32_t a, std::uint32_t b)
{
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
}

// ---------------------------------------------------------------------------

ClusterAssignment::ClusterAssignment(DisjointSet ds, const ChainView& view)
    : ds_(std::move(ds)), root_(view.address_count()), stats_(view.address_count())
{
    if (ds_.size() != view.address_count()) throw Error("disjoint set does not match corpus address count");
    for (AddressId a = 0; a < root_.size(); ++a) {
        root_[a] = ds_.find(a);
        ++stats_[root_[a]].address_count;
    }
    std::vector<AddressId> seen;
    for (const auto& tx : view.txs()) {
        if (tx.coinbase) continue;
        seen.clear();
        for (const auto& in : tx.inputs) {
            const auto r = root_[view.prevout(in).address];
            if (std::find(seen.begin(), seen.end(), r) != seen.end()) continue;
            seen.push_back(r);
            auto& s = stats_[r];
            if (s.tx_count == 0) s.first_time = tx.block_time;
            s.last_time = tx.block_time;
            ++s.tx_count;
        }
    }
}

std::vector<AddressId> ClusterAssignment::cluster_roots() const
{
    std::vector<AddressId> r;
    for (AddressId a = 0; a < root_.size(); ++a)
        if (root_[a] == a) r.push_back(a);
    return r;
}

std::size_t ClusterAssignment::cluster_count() const
{
    std::size_t n = 0;
    for (AddressId a = 0; a < root_.size(); ++a) n += root_[a] == a;
    return n;
}

AddressId ClusterAssignment::input_root(const Transaction& tx, const ChainView& view) const
{
    if (tx.inputs.empty()) return kNoAddress;
    return root_[view.prevout(tx.inputs.front()).address];
}

bool skip_multi_input(const Transaction& tx, const CoinJoinRule& rule)
{
    return tx.coinbase || is_coinjoin(tx, rule);
}

DisjointSet multi_input_disjoint_set(const ChainView& view, const CoinJoinRule& rule)
{
    DisjointSet ds(view.address_count());
    for (const auto& tx : view.txs()) {
        if (skip_multi_input(tx, rule)) continue;
        const auto first = view.prevout(tx.inputs.front()).address;
        for (std::size_t i = 1; i < tx.inputs.size(); ++i) ds.unite(first, view.prevout(tx.inputs[i]).address);
    }
    return ds;
}

ClusterAssignment multi_input_clustering(const ChainView& view, const CoinJoinRule& rule)
{
    return ClusterAssignment(multi_input_disjoint_set(view, rule), view);
}

// ---------------------------------------------------------------------------

void write_clusters(std::ostream& out, const ClusterAssignment& c, const ChainView& view)
{
    for (AddressId a = 0; a < c.address_count(); ++a) {
        nlohmann::ordered_json j;
        j["address"] = view.address_name(a);
        j["root"] = view.address_name(c.root(a));
        out << j.dump() << '\n';
    }
}

ClusterAssignment read_clusters(std::istream& in, const ChainView& view)
{
    DisjointSet ds(view.address_count());
    std::vector<bool> seen(view.address_count(), false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string addr, root;
        try {
            auto j = nlohmann::json::parse(line);
            addr = j.at("address").get<std::string>();
            root = j.at("root").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(lineno, std::string("malformed cluster record: ") + e.what());
        }
        auto a = view.find_address(addr);
        auto r = view.find_address(root);
        if (!a || !r) throw CorpusError(lineno, "cluster file references address absent from corpus");
        seen[*a] = true;
        ds.unite(*a, *r);
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw Error("cluster file does not cover every corpus address");
    return ClusterAssignment(std::move(ds), view);
}

void write_cluster_summary(std::ostream& out, const ClusterAssignment& c, const ChainView& view)
{
    out << "root,address_count,tx_count,first_time,last_time\n";
    for (auto r : c.cluster_roots()) {
        const auto& s = c.stats(r);
        out << view.address_name(r) << ',' << s.address_count << ',' << s.tx_count << ',' << s.first_time << ','
            << s.last_time << '\n';
    }
}

}  // namespace ct
