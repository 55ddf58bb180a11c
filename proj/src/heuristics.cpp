#include "changetrace/heuristics.hpp"

#include "changetrace/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>

namespace ct {

namespace {

constexpr std::array<Heuristic, kHeuristicCount> kAll = [] {
    std::array<Heuristic, kHeuristicCount> a{};
    for (std::size_t i = 0; i < kHeuristicCount; ++i) a[i] = static_cast<Heuristic>(i);
    return a;
}();

constexpr std::array<std::string_view, kHeuristicCount> kNames = {
    "optimal_change",   "optimal_change_fee", "address_type",      "power_of_ten_2",    "power_of_ten_3",
    "power_of_ten_4",   "power_of_ten_5",     "power_of_ten_6",    "power_of_ten_7",    "fp_output_count",
    "fp_in_out_count",  "fp_version",         "fp_locktime",       "fp_rbf",            "fp_segwit",
    "fp_segwit_conform", "fp_bip69",          "fp_zero_conf",      "fp_absolute_fee",   "fp_relative_fee",
    "fp_multisig",      "fp_addr_p2pkh",      "fp_addr_p2sh",      "fp_addr_p2wpkh",    "fp_addr_p2wsh",
    "fp_addr_all",
};

constexpr Satoshi pow10(int n)
{
    Satoshi r = 1;
    while (n-- > 0) r *= 10;
    return r;
}

std::uint8_t type_bit(ScriptType t) { return static_cast<std::uint8_t>(1u << static_cast<int>(t)); }

bool fingerprint_match(Heuristic h, const TxTraits& a, const TxTraits& b)
{
    switch (h) {
    case Heuristic::FpOutputCount: return a.output_count == b.output_count;
    case Heuristic::FpInOutCount: return a.output_count == b.output_count && a.input_count == b.input_count;
    case Heuristic::FpVersion: return a.version == b.version;
    case Heuristic::FpLocktime: return a.locktime == b.locktime;
    case Heuristic::FpRbf: return a.rbf == b.rbf;
    case Heuristic::FpSegWit: return a.segwit == b.segwit;
    case Heuristic::FpSegWitConform: return a.segwit_conform == b.segwit_conform;
    case Heuristic::FpBip69: return a.bip69 == b.bip69;
    case Heuristic::FpZeroConf: return a.zero_conf == b.zero_conf;
    case Heuristic::FpAbsFee: return a.abs_fee == b.abs_fee;
    case Heuristic::FpRelFee: return a.rel_fee == b.rel_fee;
    case Heuristic::FpMultisig: return a.multisig == b.multisig;
    case Heuristic::FpP2PKH: return b.has_input_type(ScriptType::P2PKH);
    case Heuristic::FpP2SH: return b.has_input_type(ScriptType::P2SH);
    case Heuristic::FpP2WPKH: return b.has_input_type(ScriptType::P2WPKH);
    case Heuristic::FpP2WSH: return b.has_input_type(ScriptType::P2WSH);
    case Heuristic::FpAllAddressTypes: return (a.input_types & b.input_types) != 0;
    default: return false;
    }
}

/// Address-type fingerprints need the type among the transaction's own inputs.
bool fingerprint_applies(Heuristic h, const TxTraits& a)
{
    switch (h) {
    case Heuristic::FpP2PKH: return a.has_input_type(ScriptType::P2PKH);
    case Heuristic::FpP2SH: return a.has_input_type(ScriptType::P2SH);
    case Heuristic::FpP2WPKH: return a.has_input_type(ScriptType::P2WPKH);
    case Heuristic::FpP2WSH: return a.has_input_type(ScriptType::P2WSH);
    default: return true;
    }
}

}  // namespace

std::span<const Heuristic> all_heuristics() { return kAll; }

std::string_view to_string(Heuristic h) { return kNames.at(index_of(h)); }

Heuristic parse_heuristic(std::string_view s)
{
    for (std::size_t i = 0; i < kHeuristicCount; ++i)
        if (kNames[i] == s) return static_cast<Heuristic>(i);
    throw Error("unknown heuristic '" + std::string(s) + "'");
}

Feature required_feature(Heuristic h)
{
    switch (h) {
    case Heuristic::FpVersion: return Feature::Version2;
    case Heuristic::FpRbf: return Feature::Rbf;
    case Heuristic::FpSegWit:
    case Heuristic::FpSegWitConform:
    case Heuristic::FpP2WPKH:
    case Heuristic::FpP2WSH: return Feature::SegWit;
    default: return Feature::None;
    }
}

Heuristic power_of_ten(int n)
{
    if (n < 2 || n > 7) throw Error("power-of-ten exponent must be in 2..7");
    return static_cast<Heuristic>(index_of(Heuristic::PowerOfTen2) + static_cast<std::size_t>(n - 2));
}

std::optional<std::uint32_t> OutputSet::single() const
{
    if (size() != 1) return std::nullopt;
    return static_cast<std::uint32_t>(__builtin_ctz(bits));
}

std::int64_t relative_fee(Satoshi fee, std::uint32_t vsize)
{
    if (vsize == 0) return 0;
    return (2 * fee + vsize) / (2 * static_cast<std::int64_t>(vsize));
}

bool is_bip69_sorted(const Transaction& tx, const ChainView& view)
{
    for (std::size_t i = 1; i < tx.inputs.size(); ++i) {
        const auto& a = tx.inputs[i - 1];
        const auto& b = tx.inputs[i];
        const int c = view.tx(a.prev_tx).txid.compare(view.tx(b.prev_tx).txid);
        if (c > 0 || (c == 0 && a.prev_index > b.prev_index)) return false;
    }
    for (std::size_t i = 1; i < tx.outputs.size(); ++i)
        if (tx.outputs[i - 1].value > tx.outputs[i].value) return false;
    return true;
}

TxTraits tx_traits(const Transaction& tx, const ChainView& view)
{
    TxTraits t;
    t.input_count = static_cast<std::uint32_t>(tx.inputs.size());
    t.output_count = static_cast<std::uint32_t>(tx.outputs.size());
    t.version = tx.version;
    t.locktime = tx.locktime > 0;
    t.rbf = is_rbf(tx);
    t.segwit = tx.segwit;
    t.bip69 = is_bip69_sorted(tx, view);
    bool permits = false;
    for (const auto& in : tx.inputs) {
        const auto& prev = view.prevout(in);
        t.input_types |= type_bit(prev.script_type);
        permits = permits || permits_segwit(prev.script_type);
        if (view.tx(in.prev_tx).block_height == tx.block_height) t.zero_conf = true;
        if (prev.script_type == ScriptType::Multisig) t.multisig = true;
    }
    t.segwit_conform = tx.segwit == permits;
    if (!tx.coinbase) {
        t.abs_fee = fee(tx, view);
        t.rel_fee = relative_fee(t.abs_fee, tx.vsize);
    }
    return t;
}

std::array<OutputSet, kHeuristicCount> all_candidates(TxPos p, const ChainView& view, const CoinJoinRule& rule)
{
    std::array<OutputSet, kHeuristicCount> out{};
    const auto& tx = view.tx(p);
    if (!is_standard(tx, rule)) return out;

    Satoshi min_in = view.prevout(tx.inputs.front()).value;
    const ScriptType first_type = view.prevout(tx.inputs.front()).script_type;
    bool same_type = true;
    for (const auto& in : tx.inputs) {
        const auto& prev = view.prevout(in);
        min_in = std::min(min_in, prev.value);
        same_type = same_type && prev.script_type == first_type;
    }
    const Satoshi f = fee(tx, view);
    for (std::uint32_t i = 0; i < 2; ++i) {
        const auto& o = tx.outputs[i];
        if (tx.inputs.size() >= 2) {
            if (o.value < min_in) out[index_of(Heuristic::OptimalChange)].insert(i);
            if (o.value + f < min_in) out[index_of(Heuristic::OptimalChangeFee)].insert(i);
        }
        if (same_type && o.script_type == first_type) out[index_of(Heuristic::AddressType)].insert(i);
        for (int n = 2; n <= 7; ++n)
            if (o.value % pow10(n) != 0) out[index_of(power_of_ten(n))].insert(i);
    }

    if (!view.all_outputs_spent(p)) return out;
    const TxTraits self = tx_traits(tx, view);
    const TxTraits spender[2] = {tx_traits(view.tx(view.spent_by(p, 0)), view), tx_traits(view.tx(view.spent_by(p, 1)), view)};
    for (std::size_t k = kUniversalCount; k < kHeuristicCount; ++k) {
        const auto h = static_cast<Heuristic>(k);
        const auto feature = required_feature(h);
        if (feature != Feature::None && tx.block_height < view.activation_height(feature)) continue;
        if (!fingerprint_applies(h, self)) continue;
        for (std::uint32_t i = 0; i < 2; ++i)
            if (fingerprint_match(h, self, spender[i])) out[k].insert(i);
    }
    return out;
}

OutputSet candidates(Heuristic h, TxPos tx, const ChainView& view, const CoinJoinRule& rule)
{
    return all_candidates(tx, view, rule)[index_of(h)];
}

std::optional<std::uint32_t> unique_candidate(Heuristic h, TxPos tx, const ChainView& view, const CoinJoinRule& rule)
{
    return candidates(h, tx, view, rule).single();
}

// ---------------------------------------------------------------------------

bool VoteTable::no_votes(std::size_t i) const
{
    const auto& r = rows[2 * i];
    return std::all_of(r.begin(), r.end(), [](std::int8_t v) { return v == 0; });
}

VoteTable build_vote_table(std::span<const TxPos> txs, const ChainView& view, std::span<const Heuristic> kinds,
                           const CoinJoinRule& rule)
{
    std::array<bool, kHeuristicCount> selected{};
    for (auto h : kinds) selected[index_of(h)] = true;

    VoteTable t;
    t.txs.assign(txs.begin(), txs.end());
    t.rows.assign(2 * txs.size(), VoteRow{});
    // Each shard writes a disjoint slice, so the result does not depend on scheduling.
    parallel_for(txs.size(), [&](std::size_t i) {
        const auto all = all_candidates(txs[i], view, rule);
        for (std::size_t k = 0; k < kHeuristicCount; ++k) {
            if (!selected[k]) continue;
            if (auto u = all[k].single()) {
                t.rows[2 * i + *u][k] = 1;
                t.rows[2 * i + (1 - *u)][k] = -1;
            }
        }
    });
    return t;
}

namespace {

constexpr char kVoteMagic[8] = {'C', 'T', 'V', 'O', 'T', 'E', '0', '1'};

template <class T>
void put(std::ostream& out, T v)
{
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& in)
{
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw Error("truncated vote table");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace

void write_vote_table(std::ostream& out, const VoteTable& t, const ChainView& view)
{
    out.write(kVoteMagic, sizeof kVoteMagic);
    put<std::uint32_t>(out, kHeuristicCount);
    put<std::uint64_t>(out, t.rows.size());
    for (std::size_t i = 0; i < t.txs.size(); ++i) {
        const auto& txid = view.tx(t.txs[i]).txid;
        for (std::uint32_t o = 0; o < 2; ++o) {
            put<std::uint16_t>(out, static_cast<std::uint16_t>(txid.size()));
            out.write(txid.data(), static_cast<std::streamsize>(txid.size()));
            put<std::uint8_t>(out, static_cast<std::uint8_t>(o));
            out.write(reinterpret_cast<const char*>(t.row(i, o).data()), kHeuristicCount);
        }
    }
}

VoteTable read_vote_table(std::istream& in, const ChainView& view)
{
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kVoteMagic, sizeof magic) != 0) throw Error("not a vote table file");
    if (get<std::uint32_t>(in) != kHeuristicCount) throw Error("vote table has unexpected heuristic count");
    const auto n = get<std::uint64_t>(in);
    if (n % 2 != 0) throw Error("vote table row count must be even");
    VoteTable t;
    t.rows.resize(n);
    t.txs.reserve(n / 2);
    std::string txid;
    for (std::uint64_t r = 0; r < n; ++r) {
        txid.resize(get<std::uint16_t>(in));
        if (!in.read(txid.data(), static_cast<std::streamsize>(txid.size()))) throw Error("truncated vote table");
        const auto out = get<std::uint8_t>(in);
        if (out != r % 2) throw Error("vote table rows must alternate output 0 and 1");
        if (!in.read(reinterpret_cast<char*>(t.rows[r].data()), kHeuristicCount)) throw Error("truncated vote table");
        auto p = view.find_tx(txid);
        if (!p) throw Error("vote table references unknown transaction " + txid);
        if (out == 0) t.txs.push_back(*p);
        else if (t.txs.back() != *p) throw Error("vote table rows of one transaction must be adjacent");
    }
    return t;
}

// ---------------------------------------------------------------------------

HeuristicScore score_predictor(std::string name, const GroundTruthSet& gt, std::span<const TxPos> remaining,
                               const ChangePredictor& predict)
{
    if (gt.empty()) throw Error("ground truth is empty");
    HeuristicScore s;
    s.name = std::move(name);
    std::size_t tp = 0, fp = 0;
    for (const auto& e : gt.entries) {
        if (auto u = predict(e.tx)) (*u == e.change_index ? tp : fp)++;
    }
    std::size_t fired = 0;
    for (auto p : remaining) fired += predict(p).has_value();
    const double n = static_cast<double>(gt.size());
    s.tpr = static_cast<double>(tp) / n;
    s.fpr = static_cast<double>(fp) / n;
    s.coverage = remaining.empty() ? 0.0 : static_cast<double>(fired) / static_cast<double>(remaining.size());
    return s;
}

std::vector<HeuristicScore> evaluate_heuristics(const GroundTruthSet& gt, const ChainView& view, std::span<const TxPos> remaining,
                                                std::span<const Heuristic> kinds, const CoinJoinRule& rule)
{
    if (gt.empty()) throw Error("ground truth is empty");
    std::vector<TxPos> gt_txs;
    gt_txs.reserve(gt.size());
    for (const auto& e : gt.entries) gt_txs.push_back(e.tx);
    const auto gt_votes = build_vote_table(gt_txs, view, kinds, rule);
    const auto rem_votes = build_vote_table(remaining, view, kinds, rule);

    std::vector<HeuristicScore> scores;
    for (auto h : kinds) {
        const auto k = index_of(h);
        HeuristicScore s;
        s.name = std::string(to_string(h));
        std::size_t tp = 0, fp = 0, fired = 0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            const auto v = gt_votes.row(i, gt.entries[i].change_index)[k];
            tp += v > 0;
            fp += v < 0;
        }
        for (std::size_t i = 0; i < rem_votes.tx_count(); ++i) fired += rem_votes.row(i, 0)[k] != 0;
        s.tpr = static_cast<double>(tp) / static_cast<double>(gt.size());
        s.fpr = static_cast<double>(fp) / static_cast<double>(gt.size());
        s.coverage = remaining.empty() ? 0.0 : static_cast<double>(fired) / static_cast<double>(remaining.size());
        scores.push_back(std::move(s));
    }
    return scores;
}

void write_scores_csv(std::ostream& out, std::span<const HeuristicScore> scores)
{
    out << "kind,tpr,fpr,coverage\n";
    char buf[128];
    for (const auto& s : scores) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", s.tpr, s.fpr, s.coverage);
        out << s.name << ',' << buf << '\n';
    }
}

}  // namespace ct
