#include "changetrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

namespace ct {

namespace {

constexpr std::string_view kKindNames[] = {"user", "exchange", "gambler", "merchant"};
constexpr std::uint32_t kNoSwitch = std::numeric_limits<std::uint32_t>::max();

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::string hex16(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xF];
    return s;
}

std::uint32_t input_vbytes(ScriptType t)
{
    switch (t) {
    case ScriptType::P2PKH: return 148;
    case ScriptType::P2SH: return 91;
    case ScriptType::P2WPKH: return 68;
    case ScriptType::P2WSH: return 104;
    case ScriptType::Multisig: return 297;
    default: return 150;
    }
}

std::uint32_t output_vbytes(ScriptType t)
{
    switch (t) {
    case ScriptType::P2PKH: return 34;
    case ScriptType::P2SH: return 32;
    case ScriptType::P2WPKH: return 31;
    case ScriptType::P2WSH: return 43;
    case ScriptType::Multisig: return 32;
    case ScriptType::OpReturn: return 40;
    default: return 34;
    }
}

bool nested_or_native_segwit(ScriptType t) { return permits_segwit(t) || t == ScriptType::P2SH; }

struct Utxo {
    std::uint32_t rec = 0;
    std::uint32_t out = 0;
    Satoshi value = 0;
    std::uint32_t addr = 0;
    ScriptType type = ScriptType::P2PKH;
    std::uint32_t height = 0;
    /// Nonzero for self-transfer outputs; the wallet spends a bundle together.
    std::uint32_t bundle = 0;
};

struct AddrInfo {
    std::string name;
    std::uint32_t entity = 0;
    ScriptType type = ScriptType::P2PKH;
};

struct EntityState {
    EntityProfile profile;
    std::vector<Utxo> utxos;
    std::vector<std::uint32_t> own_addresses;
    std::vector<std::uint32_t> receive_addresses;
    Satoshi balance = 0;
    std::uint32_t pending_height = 0;
    Satoshi pending_value = 0;
    std::uint32_t switch_height = kNoSwitch;
    std::uint32_t group = 0;
};

struct PlannedOutput {
    Satoshi value = 0;
    std::uint32_t addr = 0;
    bool change = false;
    std::optional<std::uint32_t> to_entity;  // payment recipient, if any
    bool opreturn = false;
    bool bundled = false;
};

class Generator {
public:
    Generator(const SynthConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed), rng_(splitmix64(seed)) {}

    SynthCorpus run();

private:
    // randomness helpers
    bool chance(double p) { return p > 0.0 && std::bernoulli_distribution(std::min(1.0, p))(rng_); }
    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_); }
    double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

    Fingerprint draw_fingerprint();
    ScriptType effective_type(ScriptType t, std::uint32_t h) const;
    std::uint32_t new_address(std::uint32_t entity, std::uint32_t h);
    std::uint32_t receive_address(std::uint32_t entity, std::uint32_t h);
    std::uint32_t change_address(std::uint32_t entity, std::uint32_t h);
    std::string next_txid() { return hex16(splitmix64(splitmix64(seed_ ^ 0x5A17C0DEull) + 0x9E3779B97F4A7C15ull * ++tx_counter_)); }

    Satoshi available(const EntityState& e, std::uint32_t h) const;
    bool spendable(const EntityState& e, const Utxo& u, std::uint32_t h) const;
    Satoshi fee_for(const Fingerprint& fp, std::uint32_t vsize) const;
    std::uint32_t vsize_of(const std::vector<Utxo>& ins, const std::vector<ScriptType>& outs, bool segwit) const;
    Satoshi draw_amount(const EntityState& e, Satoshi hi);
    std::optional<std::uint32_t> pick_recipient(std::uint32_t payer);
    std::optional<std::uint32_t> pick_of_kind(EntityKind k, std::uint32_t exclude);

    // Removes the selected coins from the entity and returns them.
    std::vector<Utxo> take(EntityState& e, std::vector<std::size_t> positions, std::uint32_t h);
    // Adds the bundle siblings of any selected coin.
    void complete_bundles(const EntityState& e, std::vector<std::size_t>& positions) const;
    // Minimal coin selection; positions into e.utxos.
    std::optional<std::vector<std::size_t>> select(EntityState& e, Satoshi target_wo_fee, const std::vector<ScriptType>& out_types,
                                                   std::uint32_t h);

    void emit(std::uint32_t h, std::uint32_t entity, std::vector<Utxo> ins, std::vector<PlannedOutput> outs, bool coinbase,
              bool change_label);
    void credit(std::uint32_t entity, const Utxo& u, std::uint32_t h);

    void fund_initial();
    void coinbase_reward(std::uint32_t h);
    void act(std::uint32_t entity, std::uint32_t h);
    void payment(std::uint32_t entity, std::uint32_t h);
    void sweep(std::uint32_t entity, std::uint32_t h);
    void self_transfer(std::uint32_t entity, std::uint32_t h);
    void opreturn_tx(std::uint32_t entity, std::uint32_t h);
    void coinjoin(std::uint32_t h);

    const SynthConfig& cfg_;
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    std::uint64_t tx_counter_ = 0;
    std::uint64_t addr_counter_ = 0;
    std::uint64_t next_tx_index_ = 0;
    std::vector<EntityState> entities_;
    std::vector<AddrInfo> addresses_;
    std::vector<TxRecord> records_;
    SimLabels labels_;
    std::vector<std::vector<std::uint32_t>> by_kind_;
};

Fingerprint Generator::draw_fingerprint()
{
    const auto& t = cfg_.traits;
    Fingerprint fp;
    fp.version = chance(t.version2) ? 2 : 1;
    fp.uses_segwit = chance(t.segwit);
    fp.sets_locktime = chance(t.locktime);
    fp.signals_rbf = chance(t.rbf);
    fp.fee_mode = chance(t.relative_fee) ? FeeMode::Relative : FeeMode::Absolute;
    static constexpr Satoshi kAbsFees[] = {1000, 2000, 2500, 5000, 10000, 20000, 50000};
    fp.fee_amount = fp.fee_mode == FeeMode::Absolute ? kAbsFees[uniform(0, std::size(kAbsFees) - 1)]
                                                      : static_cast<Satoshi>(uniform(1, 60));
    fp.sorts_bip69 = chance(t.bip69);
    fp.spends_unconfirmed = chance(t.zero_conf);
    std::discrete_distribution<int> types(t.address_type.begin(), t.address_type.end());
    static constexpr ScriptType kTypes[] = {ScriptType::P2PKH, ScriptType::P2SH, ScriptType::P2WPKH, ScriptType::P2WSH,
                                            ScriptType::Multisig};
    fp.address_type = kTypes[types(rng_)];
    if (permits_segwit(fp.address_type)) fp.uses_segwit = true;
    return fp;
}

ScriptType Generator::effective_type(ScriptType t, std::uint32_t h) const
{
    if (permits_segwit(t) && h < cfg_.activation.segwit) return ScriptType::P2PKH;
    return t;
}

std::uint32_t Generator::new_address(std::uint32_t entity, std::uint32_t h)
{
    const auto id = static_cast<std::uint32_t>(addresses_.size());
    const auto type = effective_type(entities_[entity].profile.fingerprint.address_type, h);
    addresses_.push_back({"a" + hex16(splitmix64(splitmix64(seed_ ^ 0xADD5EED5ull) + 0x9E3779B97F4A7C15ull * ++addr_counter_)), entity, type});
    entities_[entity].own_addresses.push_back(id);
    labels_.add_owner(addresses_.back().name, entity);
    return id;
}

std::uint32_t Generator::receive_address(std::uint32_t entity, std::uint32_t h)
{
    auto& e = entities_[entity];
    if (!e.receive_addresses.empty() && chance(e.profile.receive_reuse_rate))
        return e.receive_addresses[uniform(0, e.receive_addresses.size() - 1)];
    const auto a = new_address(entity, h);
    e.receive_addresses.push_back(a);
    return a;
}

std::uint32_t Generator::change_address(std::uint32_t entity, std::uint32_t h)
{
    auto& e = entities_[entity];
    if (!e.own_addresses.empty() && chance(e.profile.reuse_rate))
        return e.own_addresses[uniform(0, e.own_addresses.size() - 1)];
    return new_address(entity, h);
}

bool Generator::spendable(const EntityState& e, const Utxo& u, std::uint32_t h) const
{
    return u.height < h || e.profile.fingerprint.spends_unconfirmed;
}

Satoshi Generator::available(const EntityState& e, std::uint32_t h) const
{
    if (e.profile.fingerprint.spends_unconfirmed || e.pending_height != h) return e.balance;
    return e.balance - e.pending_value;
}

Satoshi Generator::fee_for(const Fingerprint& fp, std::uint32_t vsize) const
{
    return fp.fee_mode == FeeMode::Absolute ? fp.fee_amount : fp.fee_amount * static_cast<Satoshi>(vsize);
}

std::uint32_t Generator::vsize_of(const std::vector<Utxo>& ins, const std::vector<ScriptType>& outs, bool segwit) const
{
    std::uint32_t v = 10 + (segwit ? 1 : 0);
    for (const auto& u : ins) v += input_vbytes(u.type);
    for (auto t : outs) v += output_vbytes(t);
    return v;
}

Satoshi Generator::draw_amount(const EntityState& e, Satoshi hi)
{
    const double lo = std::max(static_cast<double>(cfg_.min_payment), cfg_.min_payment_fraction * static_cast<double>(hi));
    if (static_cast<double>(hi) <= lo) return 0;
    auto amount = static_cast<Satoshi>(std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(static_cast<double>(hi)))(rng_)));
    if (chance(e.profile.spend_round_prob)) {
        int max_n = std::min(7, static_cast<int>(std::floor(std::log10(static_cast<double>(amount)))));
        if (max_n >= 2) {
            const int n = static_cast<int>(uniform(2, static_cast<std::uint64_t>(max_n)));
            Satoshi p = 1;
            for (int i = 0; i < n; ++i) p *= 10;
            amount = amount / p * p;
        }
    }
    return amount;
}

std::optional<std::uint32_t> Generator::pick_of_kind(EntityKind k, std::uint32_t exclude)
{
    const auto& pool = by_kind_[static_cast<int>(k)];
    if (pool.empty() || (pool.size() == 1 && pool[0] == exclude)) return std::nullopt;
    while (true) {
        const auto c = pool[uniform(0, pool.size() - 1)];
        if (c != exclude) return c;
    }
}

std::optional<std::uint32_t> Generator::pick_recipient(std::uint32_t payer)
{
    using K = EntityKind;
    const auto kind = entities_[payer].profile.kind;
    K target = K::User;
    const double r = uniform01();
    switch (kind) {
    case K::User: target = r < 0.35 ? K::Merchant : r < 0.65 ? K::Exchange : r < 0.75 ? K::Gambler : K::User; break;
    case K::Exchange: target = r < 0.9 ? K::User : K::Exchange; break;
    case K::Gambler: target = r < 0.8 ? K::User : K::Exchange; break;
    case K::Merchant:
        target = r < cfg_.cashout_prob ? K::Exchange : (uniform01() < 0.5 ? K::User : K::Merchant);
        break;
    }
    if (auto c = pick_of_kind(target, payer)) return c;
    if (entities_.size() < 2) return std::nullopt;
    while (true) {
        const auto c = static_cast<std::uint32_t>(uniform(0, entities_.size() - 1));
        if (c != payer) return c;
    }
}

std::vector<Utxo> Generator::take(EntityState& e, std::vector<std::size_t> positions, std::uint32_t h)
{
    std::sort(positions.begin(), positions.end(), std::greater<>());
    std::vector<Utxo> out;
    for (auto p : positions) {
        out.push_back(e.utxos[p]);
        e.balance -= e.utxos[p].value;
        if (e.utxos[p].height == h && e.pending_height == h) e.pending_value -= e.utxos[p].value;
        e.utxos[p] = e.utxos.back();
        e.utxos.pop_back();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

void Generator::complete_bundles(const EntityState& e, std::vector<std::size_t>& positions) const
{
    const std::size_t n = positions.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto b = e.utxos[positions[k]].bundle;
        if (b == 0) continue;
        for (std::size_t j = 0; j < e.utxos.size(); ++j)
            if (e.utxos[j].bundle == b && std::find(positions.begin(), positions.end(), j) == positions.end()) positions.push_back(j);
    }
}

std::optional<std::vector<std::size_t>> Generator::select(EntityState& e, Satoshi target, const std::vector<ScriptType>& out_types,
                                                          std::uint32_t h)
{
    auto& u = e.utxos;
    const auto& fp = e.profile.fingerprint;
    auto fee_with = [&](const std::vector<std::size_t>& sel) {
        std::vector<Utxo> ins;
        for (auto i : sel) ins.push_back(u[i]);
        bool sw = fp.uses_segwit && h >= cfg_.activation.segwit &&
                  std::any_of(ins.begin(), ins.end(), [](const Utxo& x) { return nested_or_native_segwit(x.type); });
        return fee_for(fp, vsize_of(ins, out_types, sw));
    };

    // Partial Fisher-Yates: [0, k) chosen, [k, end) pool, [end, n) not spendable now.
    std::size_t k = 0, end = u.size();
    Satoshi sum = 0;
    std::vector<std::size_t> sel;
    while (true) {
        if (!sel.empty() && sum >= target + fee_with(sel)) break;
        if (k >= end) return std::nullopt;
        const auto j = uniform(k, end - 1);
        if (!spendable(e, u[j], h)) {
            std::swap(u[j], u[end - 1]);
            --end;
            continue;
        }
        std::swap(u[k], u[j]);
        sel.push_back(k);
        sum += u[k].value;
        ++k;
    }
    // Drop inputs that are not needed, smallest first, until every input is necessary.
    bool changed = true;
    while (changed && sel.size() > 1) {
        changed = false;
        std::sort(sel.begin(), sel.end(), [&](auto a, auto b) { return u[a].value < u[b].value || (u[a].value == u[b].value && a < b); });
        for (std::size_t i = 0; i < sel.size(); ++i) {
            auto rest = sel;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
            if (sum - u[sel[i]].value >= target + fee_with(rest)) {
                sum -= u[sel[i]].value;
                sel = std::move(rest);
                changed = true;
                break;
            }
        }
    }
    if (k < end && chance(cfg_.suboptimal_rate)) {
        for (std::size_t j = k; j < end; ++j) {
            if (spendable(e, u[j], h)) {
                sel.push_back(j);
                break;
            }
        }
    }
    complete_bundles(e, sel);
    return sel;
}

void Generator::credit(std::uint32_t entity, const Utxo& u, std::uint32_t h)
{
    auto& e = entities_[entity];
    e.utxos.push_back(u);
    e.balance += u.value;
    if (e.pending_height != h) {
        e.pending_height = h;
        e.pending_value = 0;
    }
    e.pending_value += u.value;
}

void Generator::emit(std::uint32_t h, std::uint32_t entity, std::vector<Utxo> ins, std::vector<PlannedOutput> outs, bool coinbase,
                     bool change_label)
{
    TxRecord rec;
    rec.txid = next_txid();
    rec.block_height = h;
    rec.block_time = cfg_.genesis_time + static_cast<std::int64_t>(h) * cfg_.block_interval;
    rec.tx_index = next_tx_index_++;
    rec.coinbase = coinbase;

    const auto& fp = entities_[entity].profile.fingerprint;
    std::uint32_t sequence = 0xFFFFFFFFu;
    if (!coinbase) {
        rec.version = (fp.version == 2 && h >= cfg_.activation.version2) ? 2 : 1;
        rec.locktime = fp.sets_locktime ? h : 0;
        if (fp.signals_rbf && h >= cfg_.activation.rbf) sequence = 0xFFFFFFFDu;
        else if (fp.sets_locktime) sequence = 0xFFFFFFFEu;
        rec.segwit = fp.uses_segwit && h >= cfg_.activation.segwit &&
                     std::any_of(ins.begin(), ins.end(), [](const Utxo& x) { return nested_or_native_segwit(x.type); });
    }

    std::vector<InputRecord> inputs;
    for (const auto& u : ins) inputs.push_back({records_[u.rec].txid, u.out, sequence});
    if (!coinbase && fp.sorts_bip69) {
        std::sort(inputs.begin(), inputs.end(),
                  [](const auto& a, const auto& b) { return std::tie(a.prev_tx, a.prev_index) < std::tie(b.prev_tx, b.prev_index); });
        std::sort(outs.begin(), outs.end(), [&](const auto& a, const auto& b) {
            return std::tie(a.value, addresses_[a.addr].name) < std::tie(b.value, addresses_[b.addr].name);
        });
    } else if (!coinbase) {
        std::shuffle(outs.begin(), outs.end(), rng_);
    }
    rec.inputs = std::move(inputs);

    std::vector<ScriptType> out_types;
    std::optional<std::uint32_t> change_index;
    const auto rec_pos = static_cast<std::uint32_t>(records_.size());
    for (std::uint32_t i = 0; i < outs.size(); ++i) {
        const auto& o = outs[i];
        if (o.opreturn) {
            rec.outputs.push_back({0, "", ScriptType::OpReturn});
            out_types.push_back(ScriptType::OpReturn);
            continue;
        }
        const auto& a = addresses_[o.addr];
        rec.outputs.push_back({o.value, a.name, a.type});
        out_types.push_back(a.type);
        if (o.change) change_index = i;
        if (o.to_entity) labels_.payments.push_back({rec.txid, i, entity, *o.to_entity, o.value});
    }
    rec.vsize = vsize_of(ins, out_types, rec.segwit);
    labels_.add_change(rec.txid, change_label ? change_index : std::nullopt);
    records_.push_back(rec);

    for (std::uint32_t i = 0; i < outs.size(); ++i) {
        const auto& o = outs[i];
        if (o.opreturn) continue;
        const auto& a = addresses_[o.addr];
        credit(a.entity, Utxo{rec_pos, i, o.value, o.addr, a.type, h, o.bundled ? rec_pos + 1 : 0}, h);
    }
}

void Generator::fund_initial()
{
    for (std::uint32_t id = 0; id < entities_.size(); ++id) {
        const auto& g = cfg_.groups[entities_[id].group];
        if (g.initial_funding <= 0) continue;
        const auto n = std::max<std::uint32_t>(1, g.funding_outputs);
        std::vector<double> w(n);
        for (auto& x : w) x = 0.5 + uniform01();
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        std::vector<PlannedOutput> outs;
        Satoshi left = g.initial_funding;
        for (std::uint32_t i = 0; i < n; ++i) {
            Satoshi v = i + 1 == n ? left : static_cast<Satoshi>(static_cast<double>(g.initial_funding) * w[i] / total);
            v = std::max<Satoshi>(v, 1);
            left -= v;
            outs.push_back({v, new_address(id, 0), false, std::nullopt, false});
        }
        emit(0, id, {}, std::move(outs), true, false);
    }
}

void Generator::coinbase_reward(std::uint32_t h)
{
    if (cfg_.block_reward <= 0 || entities_.empty()) return;
    const auto miner = static_cast<std::uint32_t>(uniform(0, entities_.size() - 1));
    std::vector<PlannedOutput> outs{{cfg_.block_reward + static_cast<Satoshi>(uniform(0, 99999)), new_address(miner, h), false, std::nullopt, false}};
    if (h >= cfg_.activation.segwit) outs.push_back({0, 0, false, std::nullopt, true});
    emit(h, miner, {}, std::move(outs), true, false);
}

void Generator::payment(std::uint32_t id, std::uint32_t h)
{
    auto& e = entities_[id];
    const Satoshi avail = available(e, h);
    std::vector<PlannedOutput> outs;
    Satoshi total = 0;
    std::vector<ScriptType> out_types;

    const bool batch = e.profile.kind == EntityKind::Exchange && chance(cfg_.batch_rate);
    const auto n_pay = batch ? static_cast<std::uint32_t>(uniform(cfg_.batch_min, std::max(cfg_.batch_min, cfg_.batch_max))) : 1u;
    const Satoshi cap = static_cast<Satoshi>(cfg_.max_payment_fraction * static_cast<double>(avail));
    for (std::uint32_t i = 0; i < n_pay; ++i) {
        auto to = batch ? pick_of_kind(EntityKind::User, id) : pick_recipient(id);
        if (!to) return;
        const Satoshi amount = draw_amount(e, (cap - total) / static_cast<Satoshi>(n_pay - i));
        if (amount < cfg_.min_payment) return;
        const auto addr = receive_address(*to, h);
        outs.push_back({amount, addr, false, *to, false});
        out_types.push_back(addresses_[addr].type);
        total += amount;
    }
    out_types.push_back(effective_type(e.profile.fingerprint.address_type, h));
    auto sel = select(e, total, out_types, h);
    if (!sel) return;
    auto ins = take(e, *sel, h);
    Satoshi in_sum = 0;
    for (const auto& u : ins) in_sum += u.value;
    const bool sw = e.profile.fingerprint.uses_segwit && h >= cfg_.activation.segwit &&
                    std::any_of(ins.begin(), ins.end(), [](const Utxo& x) { return nested_or_native_segwit(x.type); });
    const Satoshi fee = fee_for(e.profile.fingerprint, vsize_of(ins, out_types, sw));
    const Satoshi change = in_sum - total - fee;
    if (change >= cfg_.dust) outs.push_back({change, change_address(id, h), true, std::nullopt, false});
    emit(h, id, std::move(ins), std::move(outs), false, true);
}

void Generator::sweep(std::uint32_t id, std::uint32_t h)
{
    auto& e = entities_[id];
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < e.utxos.size() && pos.size() < cfg_.sweep_max_inputs; ++i)
        if (spendable(e, e.utxos[i], h)) pos.push_back(i);
    if (pos.size() < 2) return;
    complete_bundles(e, pos);
    auto ins = take(e, pos, h);
    Satoshi in_sum = 0;
    for (const auto& u : ins) in_sum += u.value;
    const auto type = effective_type(e.profile.fingerprint.address_type, h);
    const bool sw = e.profile.fingerprint.uses_segwit && h >= cfg_.activation.segwit &&
                    std::any_of(ins.begin(), ins.end(), [](const Utxo& x) { return nested_or_native_segwit(x.type); });
    const Satoshi fee = std::min(in_sum - 1, fee_for(e.profile.fingerprint, vsize_of(ins, {type}, sw)));
    emit(h, id, std::move(ins), {{in_sum - fee, new_address(id, h), false, std::nullopt, false}}, false, false);
}

void Generator::self_transfer(std::uint32_t id, std::uint32_t h)
{
    auto& e = entities_[id];
    const Satoshi amount = draw_amount(e, static_cast<Satoshi>(cfg_.max_payment_fraction * static_cast<double>(available(e, h))));
    if (amount < cfg_.min_payment) return;
    const auto type = effective_type(e.profile.fingerprint.address_type, h);
    std::vector<ScriptType> out_types{type, type};
    auto sel = select(e, amount, out_types, h);
    if (!sel) return;
    auto ins = take(e, *sel, h);
    Satoshi in_sum = 0;
    for (const auto& u : ins) in_sum += u.value;
    const bool sw = e.profile.fingerprint.uses_segwit && h >= cfg_.activation.segwit &&
                    std::any_of(ins.begin(), ins.end(), [](const Utxo& x) { return nested_or_native_segwit(x.type); });
    const Satoshi change = in_sum - amount - fee_for(e.profile.fingerprint, vsize_of(ins, out_types, sw));
    std::vector<PlannedOutput> outs{{amount, new_address(id, h), false, std::nullopt, false, true}};
    if (change >= cfg_.dust) outs.push_back({change, new_address(id, h), false, std::nullopt, false, true});
    emit(h, id, std::move(ins), std::move(outs), false, false);
}

void Generator::opreturn_tx(std::uint32_t id, std::uint32_t h)
{
    auto& e = entities_[id];
    const auto type = effective_type(e.profile.fingerprint.address_type, h);
    std::vector<ScriptType> out_types{type, ScriptType::OpReturn};
    auto sel = select(e, cfg_.dust, out_types, h);
    if (!sel) return;
    auto ins = take(e, *sel, h);
    Satoshi in_sum = 0;
    for (const auto& u : ins) in_sum += u.value;
    const bool sw = e.profile.fingerprint.uses_segwit && h >= cfg_.activation.segwit &&
                    std::any_of(ins.begin(), ins.end(), [](const Utxo& x) { return nested_or_native_segwit(x.type); });
    const Satoshi change = in_sum - fee_for(e.profile.fingerprint, vsize_of(ins, out_types, sw));
    emit(h, id, std::move(ins), {{change, change_address(id, h), true, std::nullopt, false}, {0, 0, false, std::nullopt, true}}, false,
         true);
}

void Generator::coinjoin(std::uint32_t h)
{
    static constexpr Satoshi kDenoms[] = {100000, 1000000, 5000000, 10000000};
    const Satoshi denom = kDenoms[uniform(0, std::size(kDenoms) - 1)];
    const Satoshi fee_share = 1500;
    const auto want = static_cast<std::uint32_t>(uniform(cfg_.coinjoin_min, std::max(cfg_.coinjoin_min, cfg_.coinjoin_max)));
    std::vector<std::uint32_t> order(entities_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<std::pair<std::uint32_t, std::size_t>> picks;
    for (auto id : order) {
        if (picks.size() == want) break;
        auto& e = entities_[id];
        for (std::size_t i = 0; i < e.utxos.size(); ++i) {
            if (e.utxos[i].height < h && e.utxos[i].bundle == 0 && e.utxos[i].value >= denom + fee_share + cfg_.dust) {
                picks.emplace_back(id, i);
                break;
            }
        }
    }
    if (picks.size() < cfg_.coinjoin_min || picks.size() < 5) return;
    std::vector<Utxo> ins;
    std::vector<PlannedOutput> outs;
    for (auto [id, pos] : picks) {
        auto u = take(entities_[id], {pos}, h).front();
        outs.push_back({denom, new_address(id, h), false, std::nullopt, false});
        const Satoshi change = u.value - denom - fee_share;
        if (change >= cfg_.dust) outs.push_back({change, new_address(id, h), false, std::nullopt, false});
        ins.push_back(u);
    }
    // CoinJoins carry a neutral fingerprint: version 1, no locktime, final sequences.
    TxRecord rec;
    rec.txid = next_txid();
    rec.block_height = h;
    rec.block_time = cfg_.genesis_time + static_cast<std::int64_t>(h) * cfg_.block_interval;
    rec.tx_index = next_tx_index_++;
    rec.version = 1;
    rec.segwit = std::any_of(ins.begin(), ins.end(), [](const Utxo& x) { return permits_segwit(x.type); });
    for (const auto& u : ins) rec.inputs.push_back({records_[u.rec].txid, u.out, 0xFFFFFFFFu});
    std::shuffle(outs.begin(), outs.end(), rng_);
    std::vector<ScriptType> types;
    for (const auto& o : outs) {
        rec.outputs.push_back({o.value, addresses_[o.addr].name, addresses_[o.addr].type});
        types.push_back(addresses_[o.addr].type);
    }
    rec.vsize = vsize_of(ins, types, rec.segwit);
    labels_.add_change(rec.txid, std::nullopt);
    const auto rec_pos = static_cast<std::uint32_t>(records_.size());
    records_.push_back(rec);
    for (std::uint32_t i = 0; i < outs.size(); ++i) {
        const auto& a = addresses_[outs[i].addr];
        credit(a.entity, Utxo{rec_pos, i, outs[i].value, outs[i].addr, a.type, h}, h);
    }
}

void Generator::act(std::uint32_t id, std::uint32_t h)
{
    auto& e = entities_[id];
    if (e.switch_height == h) e.profile.fingerprint = draw_fingerprint();
    const double r = uniform01();
    double acc = cfg_.sweep_rate;
    if (r < acc) return sweep(id, h);
    acc += cfg_.self_transfer_rate;
    if (r < acc) return self_transfer(id, h);
    acc += cfg_.opreturn_rate;
    if (r < acc) return opreturn_tx(id, h);
    payment(id, h);
}

SynthCorpus Generator::run()
{
    const auto& c = cfg_;
    std::size_t total = 0;
    for (const auto& g : c.groups) total += g.count;
    if (total == 0) throw Error("synthetic config lists no entities");
    if (c.days == 0 || c.blocks_per_day == 0) throw Error("simulated duration must be positive");
    bool any_activity = false;
    for (const auto& g : c.groups) {
        for (double p : {g.reuse_rate, g.receive_reuse_rate, g.spend_round_prob, g.tag_fraction})
            if (!(p >= 0.0 && p <= 1.0)) throw Error("entity group probability outside [0,1]");
        if (g.activity_rate < 0.0) throw Error("negative activity rate");
        if (g.count > 0 && g.activity_rate > 0.0) {
            any_activity = true;
            if (g.initial_funding <= 0 && c.block_reward <= 0)
                throw Error("infeasible config: " + std::string(to_string(g.kind)) + " entities have positive activity but no funding");
        }
    }
    if (any_activity && total < 2) throw Error("payments need at least two entities");
    for (double p : {c.suboptimal_rate, c.batch_rate, c.sweep_rate, c.self_transfer_rate, c.opreturn_rate, c.wallet_switch_rate, c.min_payment_fraction,
                     c.cashout_prob, c.traits.version2, c.traits.segwit, c.traits.locktime, c.traits.rbf, c.traits.relative_fee,
                     c.traits.bip69, c.traits.zero_conf})
        if (!(p >= 0.0 && p <= 1.0)) throw Error("config probability outside [0,1]");
    if (c.sweep_rate + c.self_transfer_rate + c.opreturn_rate > 1.0) throw Error("action rates sum above 1");

    by_kind_.assign(4, {});
    const std::uint32_t blocks = c.days * c.blocks_per_day;
    std::uint32_t id = 0;
    for (std::uint32_t gi = 0; gi < c.groups.size(); ++gi) {
        const auto& g = c.groups[gi];
        for (std::uint32_t i = 0; i < g.count; ++i, ++id) {
            EntityState s;
            s.group = gi;
            s.profile.entity_id = id;
            s.profile.kind = g.kind;
            const auto prefix = g.tag_category ? to_string(*g.tag_category) : to_string(g.kind);
            s.profile.label = std::string(prefix) + "_" + std::to_string(id);
            s.profile.tag_category = g.tag_category;
            s.profile.fingerprint = draw_fingerprint();
            s.profile.reuse_rate = g.reuse_rate;
            s.profile.receive_reuse_rate = g.receive_reuse_rate;
            s.profile.spend_round_prob = g.spend_round_prob;
            s.profile.activity_rate = g.activity_rate;
            if (chance(c.wallet_switch_rate)) s.switch_height = static_cast<std::uint32_t>(uniform(1, std::max<std::uint32_t>(1, blocks)));
            by_kind_[static_cast<int>(g.kind)].push_back(id);
            entities_.push_back(std::move(s));
        }
    }

    fund_initial();
    std::vector<std::uint32_t> order(entities_.size());
    std::iota(order.begin(), order.end(), 0u);
    const double cj_prob = c.coinjoin_per_day / static_cast<double>(c.blocks_per_day);
    for (std::uint32_t h = 1; h <= blocks; ++h) {
        coinbase_reward(h);
        std::shuffle(order.begin(), order.end(), rng_);
        for (auto eid : order) {
            const double rate = entities_[eid].profile.activity_rate / static_cast<double>(c.blocks_per_day);
            if (chance(rate)) act(eid, h);
        }
        if (chance(cj_prob)) coinjoin(h);
    }

    SynthCorpus out;
    out.header = CorpusHeader{1, c.activation};
    out.records = std::move(records_);
    for (auto& e : entities_) {
        if (e.profile.tag_category) {
            // Tag a sample of the entity's addresses; at least one.
            const double frac = c.groups[e.group].tag_fraction;
            bool any = false;
            for (std::size_t i = 0; i < e.own_addresses.size(); ++i) {
                if (chance(frac) || (!any && i + 1 == e.own_addresses.size())) {
                    out.tags.add(addresses_[e.own_addresses[i]].name, Tag{e.profile.label, *e.profile.tag_category});
                    any = true;
                }
            }
        }
        labels_.entities.push_back(e.profile);
    }
    out.labels = std::move(labels_);
    return out;
}

}  // namespace

std::string_view to_string(EntityKind k) { return kKindNames[static_cast<int>(k)]; }

EntityKind parse_entity_kind(std::string_view s)
{
    for (int i = 0; i < 4; ++i)
        if (kKindNames[i] == s) return static_cast<EntityKind>(i);
    throw Error("unknown entity kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Labels

void SimLabels::add_change(const std::string& txid, std::optional<std::uint32_t> index)
{
    change_.emplace_back(txid, index);
    change_by_txid_[txid] = index;
}

void SimLabels::add_owner(const std::string& address, std::uint32_t entity) { owner_[address] = entity; }

bool SimLabels::has_tx(std::string_view txid) const { return change_by_txid_.contains(std::string(txid)); }

std::optional<std::uint32_t> SimLabels::change_of(std::string_view txid) const
{
    auto it = change_by_txid_.find(std::string(txid));
    return it == change_by_txid_.end() ? std::nullopt : it->second;
}

std::optional<std::uint32_t> SimLabels::entity_of(std::string_view address) const
{
    auto it = owner_.find(std::string(address));
    if (it == owner_.end()) return std::nullopt;
    return it->second;
}

void write_labels(std::ostream& out, const SimLabels& labels)
{
    using ojson = nlohmann::ordered_json;
    for (const auto& e : labels.entities) {
        ojson j;
        j["record"] = "entity";
        j["entity_id"] = e.entity_id;
        j["kind"] = std::string(to_string(e.kind));
        j["label"] = e.label;
        j["category"] = e.tag_category ? ojson(std::string(to_string(*e.tag_category))) : ojson(nullptr);
        out << j.dump() << '\n';
    }
    for (const auto& [txid, idx] : labels.change()) {
        ojson j;
        j["record"] = "change";
        j["txid"] = txid;
        j["change_index"] = idx ? ojson(*idx) : ojson(nullptr);
        out << j.dump() << '\n';
    }
    std::vector<std::pair<std::string, std::uint32_t>> owners(labels.owners().begin(), labels.owners().end());
    std::sort(owners.begin(), owners.end());
    for (const auto& [addr, ent] : owners) {
        ojson j;
        j["record"] = "owner";
        j["address"] = addr;
        j["entity_id"] = ent;
        out << j.dump() << '\n';
    }
    for (const auto& p : labels.payments) {
        ojson j;
        j["record"] = "payment";
        j["txid"] = p.txid;
        j["output_index"] = p.output_index;
        j["from_entity"] = p.from_entity;
        j["to_entity"] = p.to_entity;
        j["value"] = p.value;
        out << j.dump() << '\n';
    }
}

SimLabels read_labels(std::istream& in)
{
    SimLabels l;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            const auto kind = j.at("record").get<std::string>();
            if (kind == "change") {
                const auto& ci = j.at("change_index");
                l.add_change(j.at("txid").get<std::string>(),
                             ci.is_null() ? std::nullopt : std::optional<std::uint32_t>(ci.get<std::uint32_t>()));
            } else if (kind == "owner") {
                l.add_owner(j.at("address").get<std::string>(), j.at("entity_id").get<std::uint32_t>());
            } else if (kind == "entity") {
                EntityProfile e;
                e.entity_id = j.at("entity_id").get<std::uint32_t>();
                e.kind = parse_entity_kind(j.at("kind").get<std::string>());
                e.label = j.at("label").get<std::string>();
                if (!j.at("category").is_null()) e.tag_category = parse_tag_category(j.at("category").get<std::string>());
                l.entities.push_back(std::move(e));
            } else if (kind == "payment") {
                l.payments.push_back({j.at("txid").get<std::string>(), j.at("output_index").get<std::uint32_t>(),
                                      j.at("from_entity").get<std::uint32_t>(), j.at("to_entity").get<std::uint32_t>(),
                                      j.at("value").get<Satoshi>()});
            } else {
                throw CorpusError(lineno, "unknown label record '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(lineno, std::string("malformed label record: ") + e.what());
        }
    }
    return l;
}

// ---------------------------------------------------------------------------
// Config

SynthConfig default_synth_config()
{
    SynthConfig c;
    c.days = 45;
    c.activation = Activation{1500, 800, 400};
    c.block_reward = 1250000000;
    c.min_payment_fraction = 0.01;
    EntityGroup users;
    users.kind = EntityKind::User;
    users.count = 440;
    users.activity_rate = 2.2;
    users.reuse_rate = 0.05;
    users.receive_reuse_rate = 0.1;
    users.spend_round_prob = 0.65;
    users.initial_funding = 2000000000;
    users.funding_outputs = 6;
    EntityGroup exchanges;
    exchanges.kind = EntityKind::Exchange;
    exchanges.count = 20;
    exchanges.activity_rate = 12.0;
    exchanges.reuse_rate = 0.1;
    exchanges.receive_reuse_rate = 0.3;
    exchanges.spend_round_prob = 0.4;
    exchanges.initial_funding = 50000000000;
    exchanges.funding_outputs = 20;
    exchanges.tag_category = TagCategory::Exchange;
    EntityGroup gamblers = exchanges;
    gamblers.kind = EntityKind::Gambler;
    gamblers.count = 10;
    gamblers.activity_rate = 8.0;
    gamblers.reuse_rate = 0.3;
    gamblers.spend_round_prob = 0.5;
    gamblers.initial_funding = 10000000000;
    gamblers.tag_category = TagCategory::Gambling;
    EntityGroup merchants = users;
    merchants.kind = EntityKind::Merchant;
    merchants.count = 20;
    merchants.activity_rate = 4.0;
    merchants.receive_reuse_rate = 0.2;
    merchants.initial_funding = 5000000000;
    EntityGroup darknet = merchants;
    darknet.count = 10;
    darknet.tag_category = TagCategory::Darknet;
    darknet.tag_fraction = 0.2;
    c.groups = {users, exchanges, gamblers, merchants, darknet};
    return c;
}

namespace {

nlohmann::ordered_json group_to_json(const EntityGroup& g)
{
    nlohmann::ordered_json j;
    j["kind"] = std::string(to_string(g.kind));
    j["count"] = g.count;
    j["activity_rate"] = g.activity_rate;
    j["reuse_rate"] = g.reuse_rate;
    j["receive_reuse_rate"] = g.receive_reuse_rate;
    j["spend_round_prob"] = g.spend_round_prob;
    j["initial_funding"] = g.initial_funding;
    j["funding_outputs"] = g.funding_outputs;
    j["tag_category"] = g.tag_category ? nlohmann::ordered_json(std::string(to_string(*g.tag_category))) : nlohmann::ordered_json(nullptr);
    j["tag_fraction"] = g.tag_fraction;
    return j;
}

}  // namespace

nlohmann::ordered_json synth_config_to_json(const SynthConfig& c)
{
    nlohmann::ordered_json j;
    j["days"] = c.days;
    j["blocks_per_day"] = c.blocks_per_day;
    j["genesis_time"] = c.genesis_time;
    j["block_interval"] = c.block_interval;
    j["activation"]["segwit"] = c.activation.segwit;
    j["activation"]["rbf"] = c.activation.rbf;
    j["activation"]["version2"] = c.activation.version2;
    j["block_reward"] = c.block_reward;
    j["min_payment"] = c.min_payment;
    j["dust"] = c.dust;
    j["max_payment_fraction"] = c.max_payment_fraction;
    j["min_payment_fraction"] = c.min_payment_fraction;
    j["suboptimal_rate"] = c.suboptimal_rate;
    j["batch_rate"] = c.batch_rate;
    j["batch_min"] = c.batch_min;
    j["batch_max"] = c.batch_max;
    j["sweep_rate"] = c.sweep_rate;
    j["sweep_max_inputs"] = c.sweep_max_inputs;
    j["self_transfer_rate"] = c.self_transfer_rate;
    j["opreturn_rate"] = c.opreturn_rate;
    j["coinjoin_per_day"] = c.coinjoin_per_day;
    j["coinjoin_min"] = c.coinjoin_min;
    j["coinjoin_max"] = c.coinjoin_max;
    j["wallet_switch_rate"] = c.wallet_switch_rate;
    j["cashout_prob"] = c.cashout_prob;
    auto& t = j["traits"];
    t["version2"] = c.traits.version2;
    t["segwit"] = c.traits.segwit;
    t["locktime"] = c.traits.locktime;
    t["rbf"] = c.traits.rbf;
    t["relative_fee"] = c.traits.relative_fee;
    t["bip69"] = c.traits.bip69;
    t["zero_conf"] = c.traits.zero_conf;
    t["address_type"] = c.traits.address_type;
    auto& groups = j["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : c.groups) groups.push_back(group_to_json(g));
    return j;
}

SynthConfig synth_config_from_json(const nlohmann::json& j)
{
    SynthConfig c;
    c.days = j.value("days", c.days);
    c.blocks_per_day = j.value("blocks_per_day", c.blocks_per_day);
    c.genesis_time = j.value("genesis_time", c.genesis_time);
    c.block_interval = j.value("block_interval", c.block_interval);
    if (j.contains("activation")) {
        const auto& a = j.at("activation");
        c.activation.segwit = a.value("segwit", 0u);
        c.activation.rbf = a.value("rbf", 0u);
        c.activation.version2 = a.value("version2", 0u);
    }
    c.block_reward = j.value("block_reward", c.block_reward);
    c.min_payment = j.value("min_payment", c.min_payment);
    c.dust = j.value("dust", c.dust);
    c.max_payment_fraction = j.value("max_payment_fraction", c.max_payment_fraction);
    c.min_payment_fraction = j.value("min_payment_fraction", c.min_payment_fraction);
    c.suboptimal_rate = j.value("suboptimal_rate", c.suboptimal_rate);
    c.batch_rate = j.value("batch_rate", c.batch_rate);
    c.batch_min = j.value("batch_min", c.batch_min);
    c.batch_max = j.value("batch_max", c.batch_max);
    c.sweep_rate = j.value("sweep_rate", c.sweep_rate);
    c.sweep_max_inputs = j.value("sweep_max_inputs", c.sweep_max_inputs);
    c.self_transfer_rate = j.value("self_transfer_rate", c.self_transfer_rate);
    c.opreturn_rate = j.value("opreturn_rate", c.opreturn_rate);
    c.coinjoin_per_day = j.value("coinjoin_per_day", c.coinjoin_per_day);
    c.coinjoin_min = j.value("coinjoin_min", c.coinjoin_min);
    c.coinjoin_max = j.value("coinjoin_max", c.coinjoin_max);
    c.wallet_switch_rate = j.value("wallet_switch_rate", c.wallet_switch_rate);
    c.cashout_prob = j.value("cashout_prob", c.cashout_prob);
    if (j.contains("traits")) {
        const auto& t = j.at("traits");
        c.traits.version2 = t.value("version2", c.traits.version2);
        c.traits.segwit = t.value("segwit", c.traits.segwit);
        c.traits.locktime = t.value("locktime", c.traits.locktime);
        c.traits.rbf = t.value("rbf", c.traits.rbf);
        c.traits.relative_fee = t.value("relative_fee", c.traits.relative_fee);
        c.traits.bip69 = t.value("bip69", c.traits.bip69);
        c.traits.zero_conf = t.value("zero_conf", c.traits.zero_conf);
        if (t.contains("address_type")) c.traits.address_type = t.at("address_type").get<std::array<double, 5>>();
    }
    for (const auto& gj : j.at("groups")) {
        EntityGroup g;
        g.kind = parse_entity_kind(gj.at("kind").get<std::string>());
        g.count = gj.at("count").get<std::uint32_t>();
        g.activity_rate = gj.value("activity_rate", g.activity_rate);
        g.reuse_rate = gj.value("reuse_rate", g.reuse_rate);
        g.receive_reuse_rate = gj.value("receive_reuse_rate", g.receive_reuse_rate);
        g.spend_round_prob = gj.value("spend_round_prob", g.spend_round_prob);
        g.initial_funding = gj.value("initial_funding", g.initial_funding);
        g.funding_outputs = gj.value("funding_outputs", g.funding_outputs);
        if (gj.contains("tag_category") && !gj.at("tag_category").is_null())
            g.tag_category = parse_tag_category(gj.at("tag_category").get<std::string>());
        g.tag_fraction = gj.value("tag_fraction", g.tag_fraction);
        c.groups.push_back(g);
    }
    return c;
}

SynthConfig load_synth_config(std::istream& in)
{
    try {
        return synth_config_from_json(nlohmann::json::parse(in, nullptr, true, true));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid synthetic config: ") + e.what());
    }
}

SynthCorpus generate(const SynthConfig& config, std::uint64_t seed) { return Generator(config, seed).run(); }

}  // namespace ct
