#include "changetrace/analytics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

#include <json.hpp>

namespace ct {

std::optional<double> FlowRow::percent_change() const
{
    if (before == 0) return std::nullopt;
    return 100.0 * static_cast<double>(after - before) / static_cast<double>(before);
}

namespace {

struct ClusterTags {
    std::unordered_map<AddressId, std::string> src_label;  // smallest src label per root
    std::set<AddressId> dst;
};

ClusterTags tag_clusters(const ChainView& view, const ClusterAssignment& c, const TagSet& tags, TagCategory src, TagCategory dst)
{
    ClusterTags out;
    for (const auto& [addr, tag] : tags.sorted()) {
        auto a = view.find_address(addr);
        if (!a) continue;
        const auto r = c.root(*a);
        if (tag.category == src) {
            auto it = out.src_label.find(r);
            if (it == out.src_label.end() || tag.label < it->second) out.src_label[r] = tag.label;
        }
        if (tag.category == dst) out.dst.insert(r);
    }
    return out;
}

}  // namespace

std::map<std::string, Satoshi> flows(const ChainView& view, const ClusterAssignment& clustering, const TagSet& tags, TagCategory src,
                                     TagCategory dst, const CoinJoinRule& rule)
{
    std::map<std::string, Satoshi> out;
    const auto tagged = tag_clusters(view, clustering, tags, src, dst);
    if (tagged.src_label.empty() || tagged.dst.empty()) return out;
    for (const auto& tx : view.txs()) {
        if (tx.coinbase || is_coinjoin(tx, rule)) continue;
        const auto r = clustering.input_root(tx, view);
        auto it = tagged.src_label.find(r);
        if (it == tagged.src_label.end()) continue;
        Satoshi sum = 0;
        for (const auto& o : tx.outputs) {
            if (o.address == kNoAddress) continue;
            const auto orr = clustering.root(o.address);
            if (orr != r && tagged.dst.contains(orr)) sum += o.value;
        }
        if (sum > 0) out[it->second] += sum;
    }
    return out;
}

std::vector<FlowRow> flow_table(const ChainView& view, const ClusterAssignment& before, const ClusterAssignment& after,
                                const TagSet& tags, TagCategory src, TagCategory dst, const CoinJoinRule& rule)
{
    const auto b = flows(view, before, tags, src, dst, rule);
    const auto a = flows(view, after, tags, src, dst, rule);
    std::map<std::string, FlowRow> rows;
    for (const auto& [k, v] : b) {
        rows[k].source = k;
        rows[k].before = v;
    }
    for (const auto& [k, v] : a) {
        rows[k].source = k;
        rows[k].after = v;
    }
    std::vector<FlowRow> out;
    for (auto& [k, r] : rows) out.push_back(r);
    return out;
}

void write_flow_csv(std::ostream& out, std::span<const FlowRow> rows)
{
    out << "source,volume_before,volume_after,percent_change\n";
    char buf[64];
    for (const auto& r : rows) {
        out << r.source << ',' << r.before << ',' << r.after << ',';
        if (auto p = r.percent_change()) {
            std::snprintf(buf, sizeof buf, "%.4f", *p);
            out << buf;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

std::vector<VelocityBucket> velocity(const ChainView& view, const ClusterAssignment& clustering, std::int64_t bucket_seconds)
{
    if (bucket_seconds <= 0) throw Error("bucket width must be positive");
    auto bucket_of = [&](std::int64_t t) {
        std::int64_t b = t / bucket_seconds;
        if (t % bucket_seconds != 0 && t < 0) --b;
        return b;
    };
    std::map<std::int64_t, VelocityBucket> acc;
    std::vector<AddressId> in_roots;
    for (const auto& tx : view.txs()) {
        if (tx.coinbase) continue;
        in_roots.clear();
        for (const auto& in : tx.inputs) in_roots.push_back(clustering.root(view.prevout(in).address));
        auto& b = acc[bucket_of(tx.block_time)];
        for (const auto& o : tx.outputs) {
            b.total += o.value;
            if (o.address == kNoAddress) continue;
            if (std::find(in_roots.begin(), in_roots.end(), clustering.root(o.address)) == in_roots.end()) b.moved += o.value;
        }
    }
    std::vector<VelocityBucket> out;
    if (acc.empty()) return out;
    for (std::int64_t k = acc.begin()->first; k <= acc.rbegin()->first; ++k) {
        VelocityBucket b;
        if (auto it = acc.find(k); it != acc.end()) b = it->second;
        b.start = k * bucket_seconds;
        out.push_back(b);
    }
    return out;
}

void write_velocity_csv(std::ostream& out, std::span<const VelocityBucket> series)
{
    out << "bucket_start,moved,total_output\n";
    for (const auto& b : series) out << b.start << ',' << b.moved << ',' << b.total << '\n';
}

// ---------------------------------------------------------------------------

std::vector<std::optional<std::uint32_t>> meiklejohn_predict(const ChainView& view, std::span<const TxPos> txs, MeiklejohnVariant v)
{
    std::vector<std::uint32_t> appearances;
    if (v == MeiklejohnVariant::Global) {
        appearances.assign(view.address_count(), 0);
        for (const auto& tx : view.txs())
            for (const auto& o : tx.outputs)
                if (o.address != kNoAddress) ++appearances[o.address];
    }
    std::vector<std::optional<std::uint32_t>> out;
    out.reserve(txs.size());
    for (auto p : txs) {
        const auto& tx = view.tx(p);
        std::optional<std::uint32_t> pick;
        int n = 0;
        for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) {
            const auto a = tx.outputs[i].address;
            if (a == kNoAddress) continue;
            const bool cand = v == MeiklejohnVariant::Local ? view.first_seen(a) == p : appearances[a] == 1;
            if (cand) {
                ++n;
                pick = i;
            }
        }
        if (n != 1) pick.reset();
        if (pick) {
            const auto a = tx.outputs[*pick].address;
            for (const auto& in : tx.inputs)
                if (view.prevout(in).address == a) {
                    pick.reset();
                    break;
                }
        }
        out.push_back(pick);
    }
    return out;
}

// ---------------------------------------------------------------------------

PairCounts pair_counts(std::span<const std::size_t> sizes)
{
    PairCounts c;
    std::uint64_t n = 0;
    for (auto s : sizes) {
        n += s;
        c.same += static_cast<std::uint64_t>(s) * (s - (s > 0)) / 2;
    }
    if (n < 2) throw Error("pair probability needs at least two addresses");
    c.total = n * (n - 1) / 2;
    return c;
}

double pair_probability(std::span<const std::size_t> sizes)
{
    const auto c = pair_counts(sizes);
    return static_cast<double>(c.same) / static_cast<double>(c.total);
}

double pair_probability(const ClusterAssignment& c)
{
    std::vector<std::size_t> sizes;
    for (auto r : c.cluster_roots()) sizes.push_back(c.stats(r).address_count);
    return pair_probability(sizes);
}

Quadrants pair_quadrants(const ClusterAssignment& ours, const ClusterAssignment& theirs, const CompareOptions& opt)
{
    const std::size_t n = ours.address_count();
    if (theirs.address_count() != n) throw Error("clusterings cover different corpora");
    if (n < 2) throw Error("pair quadrants need at least two addresses");
    Quadrants q;
    const bool sample = opt.force_sampling || (n >= 10000 && opt.sample_size > 0);
    if (!sample) {
        auto pairs = [](long double k) { return k * (k - 1) / 2; };
        std::unordered_map<AddressId, std::size_t> a, b;
        std::unordered_map<std::uint64_t, std::size_t> ab;
        for (AddressId i = 0; i < n; ++i) {
            ++a[ours.root(i)];
            ++b[theirs.root(i)];
            ++ab[(static_cast<std::uint64_t>(ours.root(i)) << 32) | theirs.root(i)];
        }
        long double sa = 0, sb = 0, sab = 0;
        for (auto& [k, c] : a) sa += pairs(c);
        for (auto& [k, c] : b) sb += pairs(c);
        for (auto& [k, c] : ab) sab += pairs(c);
        const long double total = pairs(static_cast<long double>(n));
        q.both = static_cast<double>(sab / total);
        q.ours_only = static_cast<double>((sa - sab) / total);
        q.theirs_only = static_cast<double>((sb - sab) / total);
        q.neither = static_cast<double>((total - sa - sb + sab) / total);
        q.pairs = static_cast<std::uint64_t>(total);
        return q;
    }
    if (opt.sample_size == 0) throw Error("sampling requested with zero sample size");
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::uint64_t c[4] = {0, 0, 0, 0};
    for (std::uint64_t s = 0; s < opt.sample_size; ++s) {
        const auto i = static_cast<AddressId>(pick(rng));
        AddressId j;
        do j = static_cast<AddressId>(pick(rng));
        while (j == i);
        const bool o = ours.root(i) == ours.root(j), t = theirs.root(i) == theirs.root(j);
        ++c[(o ? 1 : 0) + (t ? 2 : 0)];
    }
    const double m = static_cast<double>(opt.sample_size);
    q.neither = static_cast<double>(c[0]) / m;
    q.ours_only = static_cast<double>(c[1]) / m;
    q.theirs_only = static_cast<double>(c[2]) / m;
    q.both = static_cast<double>(c[3]) / m;
    q.sampled = true;
    q.pairs = opt.sample_size;
    return q;
}

ComparisonTable compare_clusterings(const ClusterAssignment& ours, const ClusterAssignment& theirs, std::span<const ChangeCall> ours_calls,
                                    std::span<const ChangeCall> theirs_calls, std::span<const TxPos> universe, const ChainView& view,
                                    const CompareOptions& opt)
{
    ComparisonTable t;
    t.seed = opt.seed;
    std::set<TxPos> uni(universe.begin(), universe.end());
    std::map<TxPos, std::uint32_t> mine, other;
    for (const auto& c : ours_calls) mine[c.tx] = c.output;
    for (const auto& c : theirs_calls) other[c.tx] = c.output;
    auto coverage = [&](const std::map<TxPos, std::uint32_t>& m) {
        if (uni.empty()) return 0.0;
        std::size_t k = 0;
        for (auto& [tx, o] : m) k += uni.contains(tx);
        return static_cast<double>(k) / static_cast<double>(uni.size());
    };
    t.ours_coverage = coverage(mine);
    t.theirs_coverage = coverage(other);
    for (auto r : ours.cluster_roots()) t.ours_largest = std::max(t.ours_largest, ours.stats(r).address_count);
    for (auto r : theirs.cluster_roots()) t.theirs_largest = std::max(t.theirs_largest, theirs.stats(r).address_count);
    t.quadrants = pair_quadrants(ours, theirs, opt);

    double usd = 0;
    bool any_price = false;
    for (const auto& [tx, o] : mine) {
        auto it = other.find(tx);
        if (it == other.end()) continue;
        const auto& x = view.tx(tx);
        if (it->second == o) {
            ++t.overlapping;
            t.overlapping_value += x.outputs[o].value;
        } else {
            ++t.conflicting;
            const Satoshi d = std::llabs(x.outputs[o].value - x.outputs[it->second].value);
            t.conflicting_value += d;
            std::int64_t day = x.block_time / 86400;
            if (auto pit = opt.usd_per_btc.find(day); pit != opt.usd_per_btc.end()) {
                usd += static_cast<double>(d) / 1e8 * pit->second;
                any_price = true;
            }
        }
    }
    if (!opt.usd_per_btc.empty() && (any_price || t.conflicting == 0)) t.conflicting_usd = usd;
    return t;
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& t)
{
    char buf[96];
    auto row = [&](const char* k, double v) {
        std::snprintf(buf, sizeof buf, "%.6f", v);
        out << k << ',' << buf << '\n';
    };
    out << "metric,value\n";
    row("coverage_ours", t.ours_coverage);
    row("coverage_theirs", t.theirs_coverage);
    out << "largest_cluster_ours," << t.ours_largest << '\n';
    out << "largest_cluster_theirs," << t.theirs_largest << '\n';
    row("pairs_neither", t.quadrants.neither);
    row("pairs_ours_only", t.quadrants.ours_only);
    row("pairs_theirs_only", t.quadrants.theirs_only);
    row("pairs_both", t.quadrants.both);
    out << "pairs_sampled," << (t.quadrants.sampled ? "true" : "false") << '\n';
    out << "pairs_evaluated," << t.quadrants.pairs << '\n';
    out << "sample_seed," << t.seed << '\n';
    out << "overlapping_predictions," << t.overlapping << '\n';
    out << "overlapping_value," << t.overlapping_value << '\n';
    out << "conflicting_predictions," << t.conflicting << '\n';
    out << "conflicting_value_difference," << t.conflicting_value << '\n';
    if (t.conflicting_usd) row("conflicting_value_difference_usd", *t.conflicting_usd);
}

std::map<std::int64_t, double> read_price_csv(std::istream& in)
{
    std::map<std::int64_t, double> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (lineno == 1 && line.rfind("date", 0) == 0)) continue;
        int y = 0;
        unsigned m = 0, d = 0;
        double price = 0;
        if (std::sscanf(line.c_str(), "%d-%u-%u,%lf", &y, &m, &d, &price) != 4) throw CorpusError(lineno, "expected date,usd_per_btc");
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) throw CorpusError(lineno, "invalid date");
        out[std::chrono::sys_days{ymd}.time_since_epoch().count()] = price;
    }
    return out;
}

void write_change_calls(std::ostream& out, std::span<const ChangeCall> calls, const ChainView& view)
{
    for (const auto& c : calls) {
        nlohmann::ordered_json j;
        j["txid"] = view.tx(c.tx).txid;
        j["output_index"] = c.output;
        out << j.dump() << '\n';
    }
}

std::vector<ChangeCall> read_change_calls(std::istream& in, const ChainView& view)
{
    std::vector<ChangeCall> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            const auto txid = j.at("txid").get<std::string>();
            const auto o = j.at("output_index").get<std::uint32_t>();
            auto p = view.find_tx(txid);
            if (!p) throw CorpusError(lineno, "unknown transaction " + txid);
            if (o >= view.tx(*p).outputs.size()) throw CorpusError(lineno, "output index out of range for " + txid);
            out.push_back({*p, o});
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(lineno, std::string("malformed change record: ") + e.what());
        }
    }
    return out;
}

}  // namespace ct
