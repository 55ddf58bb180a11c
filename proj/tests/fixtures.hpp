#pragma once

// Hand-built corpora for unit tests.

#include "changetrace/chain.hpp"
#include "changetrace/cluster.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace fixture {

using namespace ct;

inline OutputRecord out(Satoshi v, std::string addr, ScriptType t = ScriptType::P2PKH) { return {v, std::move(addr), t}; }
inline InputRecord in(std::string tx, std::uint32_t idx = 0, std::uint32_t seq = 0xFFFFFFFFu) { return {std::move(tx), idx, seq}; }

/// Appends records in corpus order. Each transaction opens a new block unless
/// a height is given.
class Chain {
public:
    Activation activation{};
    std::vector<TxRecord> records;

    TxRecord& coinbase(std::string id, std::vector<OutputRecord> outs, std::optional<std::uint32_t> height = {})
    {
        auto& r = add(std::move(id), {}, std::move(outs), height);
        r.coinbase = true;
        return r;
    }

    TxRecord& add(std::string id, std::vector<InputRecord> ins, std::vector<OutputRecord> outs, std::optional<std::uint32_t> height = {})
    {
        TxRecord r;
        r.txid = std::move(id);
        r.block_height = height ? *height : next_height_;
        next_height_ = r.block_height + 1;
        r.block_time = 1'000'000'000 + static_cast<std::int64_t>(r.block_height) * 600;
        r.tx_index = index_++;
        r.vsize = 200;
        r.inputs = std::move(ins);
        r.outputs = std::move(outs);
        records.push_back(std::move(r));
        return records.back();
    }

    ChainView view() const { return build_view(records, activation); }

private:
    std::uint32_t next_height_ = 1;
    std::uint64_t index_ = 0;
};

inline TxPos pos(const ChainView& v, std::string_view id) { return *v.find_tx(id); }
inline AddressId addr(const ChainView& v, std::string_view name) { return *v.find_address(name); }

struct RandomChainOptions {
    std::size_t txs = 200;
    std::size_t addresses = 150;
    double coinjoin_rate = 0.02;
    double coinbase_rate = 0.1;
};

/// Random valid corpus: value-conserving spends of random unspent outputs to
/// addresses drawn from a fixed pool, with occasional CoinJoin-shaped
/// transactions. Script types, versions, sequences and locktimes vary.
inline std::vector<TxRecord> random_chain(std::mt19937_64& rng, const RandomChainOptions& o = {})
{
    std::vector<TxRecord> recs;
    struct Coin {
        std::string tx;
        std::uint32_t index;
        Satoshi value;
    };
    std::vector<Coin> utxo;
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto chance = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };
    auto address = [&] { return "a" + std::to_string(pick(o.addresses)); };
    auto type = [&] { return static_cast<ScriptType>(pick(5)); };
    std::uint32_t height = 1;
    for (std::size_t i = 0; i < o.txs; ++i) {
        TxRecord r;
        r.txid = "t" + std::to_string(i);
        if (chance(0.7)) ++height;
        r.block_height = height;
        r.block_time = 1'000'000'000 + height * 600;
        r.tx_index = i;
        r.version = chance(0.5) ? 2 : 1;
        r.locktime = chance(0.3) ? height : 0;
        r.segwit = chance(0.4);
        r.vsize = 100 + static_cast<std::uint32_t>(pick(400));
        const bool cj = utxo.size() >= 6 && chance(o.coinjoin_rate);
        if (utxo.size() < 3 || (!cj && chance(o.coinbase_rate))) {
            r.coinbase = true;
            const std::size_t n = 1 + pick(3);
            for (std::size_t k = 0; k < n; ++k) r.outputs.push_back({static_cast<Satoshi>(100000 + pick(10000000)), address(), type()});
        } else {
            const std::size_t n_in = cj ? 5 + pick(2) : 1 + pick(std::min<std::size_t>(3, utxo.size()));
            Satoshi total = 0;
            for (std::size_t k = 0; k < n_in && !utxo.empty(); ++k) {
                const auto j = pick(utxo.size());
                r.inputs.push_back({utxo[j].tx, utxo[j].index, chance(0.2) ? 1u : 0xFFFFFFFFu});
                total += utxo[j].value;
                utxo[j] = utxo.back();
                utxo.pop_back();
            }
            const Satoshi fee = std::min<Satoshi>(total, static_cast<Satoshi>(pick(2000)));
            Satoshi left = total - fee;
            if (cj) {
                const Satoshi unit = left / 8;
                for (int k = 0; k < 5; ++k) r.outputs.push_back({unit, address(), type()});
                left -= 5 * unit;
                r.outputs.push_back({left, address(), type()});
            } else {
                const std::size_t n_out = 1 + pick(3);
                for (std::size_t k = 0; k + 1 < n_out; ++k) {
                    const Satoshi v = left / 2 > 0 ? static_cast<Satoshi>(pick(static_cast<std::size_t>(left / 2) + 1)) : 0;
                    r.outputs.push_back({v, address(), type()});
                    left -= v;
                }
                r.outputs.push_back({left, address(), type()});
            }
        }
        for (std::uint32_t k = 0; k < r.outputs.size(); ++k) utxo.push_back({r.txid, k, r.outputs[k].value});
        recs.push_back(std::move(r));
    }
    return recs;
}

/// Connected components of the co-spend graph by repeated relaxation.
inline std::vector<std::uint32_t> brute_force_components(const ChainView& v, const CoinJoinRule& rule = {})
{
    std::vector<std::uint32_t> label(v.address_count());
    for (std::uint32_t a = 0; a < label.size(); ++a) label[a] = a;
    std::vector<std::vector<AddressId>> groups;
    for (const auto& tx : v.txs()) {
        if (tx.coinbase || is_coinjoin(tx, rule)) continue;
        std::vector<AddressId> g;
        for (const auto& in : tx.inputs) g.push_back(v.prevout(in).address);
        groups.push_back(std::move(g));
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& g : groups) {
            std::uint32_t m = label[g[0]];
            for (auto a : g) m = std::min(m, label[a]);
            for (auto a : g)
                if (label[a] != m) {
                    label[a] = m;
                    changed = true;
                }
        }
    }
    return label;
}

/// True when two labelings induce the same partition.
template <class A, class B>
bool same_partition(const A& x, const B& y)
{
    if (x.size() != y.size()) return false;
    std::unordered_map<std::uint64_t, std::uint64_t> fwd, back;
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto [f, fn] = fwd.emplace(x[i], y[i]);
        auto [b, bn] = back.emplace(y[i], x[i]);
        if (f->second != static_cast<std::uint64_t>(y[i]) || b->second != static_cast<std::uint64_t>(x[i])) return false;
    }
    return true;
}

/// True when every block of `fine` lies inside one block of `coarse`.
template <class A, class B>
bool refines(const A& fine, const B& coarse)
{
    std::unordered_map<std::uint64_t, std::uint64_t> to;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        auto [it, fresh] = to.emplace(fine[i], coarse[i]);
        if (it->second != static_cast<std::uint64_t>(coarse[i])) return false;
    }
    return true;
}

}  // namespace fixture
