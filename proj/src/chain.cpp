#include "changetrace/chain.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

namespace ct {

namespace {

constexpr std::string_view kScriptNames[] = {"P2PKH", "P2SH", "P2WPKH", "P2WSH", "Multisig", "OpReturn", "Other"};
constexpr std::string_view kCategoryNames[] = {"exchange", "darknet", "gambling", "other"};

}  // namespace

std::string_view to_string(ScriptType t) { return kScriptNames[static_cast<int>(t)]; }

ScriptType parse_script_type(std::string_view s)
{
    for (int i = 0; i < kScriptTypeCount; ++i)
        if (kScriptNames[i] == s) return static_cast<ScriptType>(i);
    throw Error("unknown script type '" + std::string(s) + "'");
}

bool permits_segwit(ScriptType t) { return t == ScriptType::P2WPKH || t == ScriptType::P2WSH; }

std::string_view to_string(TagCategory c) { return kCategoryNames[static_cast<int>(c)]; }

TagCategory parse_tag_category(std::string_view s)
{
    for (int i = 0; i < 4; ++i)
        if (kCategoryNames[i] == s) return static_cast<TagCategory>(i);
    throw Error("unknown tag category '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// ChainView

std::optional<TxPos> ChainView::find_tx(std::string_view txid) const
{
    auto it = tx_ids_.find(std::string(txid));
    if (it == tx_ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<AddressId> ChainView::find_address(std::string_view name) const
{
    auto it = address_ids_.find(std::string(name));
    if (it == address_ids_.end()) return std::nullopt;
    return it->second;
}

bool ChainView::all_outputs_spent(TxPos p) const
{
    const auto n = txs_[p].outputs.size();
    for (std::size_t i = 0; i < n; ++i)
        if (spent_[spent_offset_[p] + i] == kUnspent) return false;
    return true;
}

std::uint32_t ChainView::activation_height(Feature f) const
{
    switch (f) {
    case Feature::SegWit: return activation_.segwit;
    case Feature::Rbf: return activation_.rbf;
    case Feature::Version2: return activation_.version2;
    case Feature::None: break;
    }
    return 0;
}

TxRecord ChainView::to_record(TxPos p) const
{
    const Transaction& t = txs_[p];
    TxRecord r;
    r.txid = t.txid;
    r.block_height = t.block_height;
    r.block_time = t.block_time;
    r.tx_index = t.tx_index;
    r.version = t.version;
    r.locktime = t.locktime;
    r.segwit = t.segwit;
    r.vsize = t.vsize;
    r.coinbase = t.coinbase;
    for (const auto& in : t.inputs)
        r.inputs.push_back({txs_[in.prev_tx].txid, in.prev_index, in.sequence});
    for (const auto& out : t.outputs)
        r.outputs.push_back({out.value, out.address == kNoAddress ? std::string() : address_names_[out.address], out.script_type});
    return r;
}

// ---------------------------------------------------------------------------
// ChainBuilder

ChainBuilder::ChainBuilder(Activation activation) { view_.activation_ = activation; }

AddressId ChainBuilder::intern(const std::string& name, TxPos p)
{
    auto [it, inserted] = view_.address_ids_.try_emplace(name, static_cast<AddressId>(view_.address_names_.size()));
    if (inserted) {
        view_.address_names_.push_back(name);
        view_.first_seen_.push_back(p);
    }
    return it->second;
}

void ChainBuilder::append(const TxRecord& rec, std::size_t line)
{
    if (rec.txid.empty()) throw CorpusError(line, "empty txid");
    if (rec.outputs.empty()) throw CorpusError(line, "transaction " + rec.txid + " has no outputs");
    if (rec.vsize == 0) throw CorpusError(line, "vsize must be positive");
    if (have_last_ && (rec.block_height < last_height_ ||
                       (rec.block_height == last_height_ && rec.tx_index <= last_index_)))
        throw CorpusError(line, "out-of-order record " + rec.txid);
    if (view_.tx_ids_.contains(rec.txid)) throw CorpusError(line, "duplicate txid " + rec.txid);
    if (rec.coinbase && !rec.inputs.empty()) throw CorpusError(line, "coinbase transaction with inputs");
    if (!rec.coinbase && rec.inputs.empty()) throw CorpusError(line, "non-coinbase transaction without inputs");

    const auto pos = static_cast<TxPos>(view_.txs_.size());
    Transaction t;
    t.txid = rec.txid;
    t.block_height = rec.block_height;
    t.block_time = rec.block_time;
    t.tx_index = rec.tx_index;
    t.version = rec.version;
    t.locktime = rec.locktime;
    t.segwit = rec.segwit;
    t.vsize = rec.vsize;
    t.coinbase = rec.coinbase;

    Satoshi in_sum = 0;
    t.inputs.reserve(rec.inputs.size());
    for (const auto& in : rec.inputs) {
        auto it = view_.tx_ids_.find(in.prev_tx);
        if (it == view_.tx_ids_.end() || in.prev_index >= view_.txs_[it->second].outputs.size())
            throw CorpusError(line, "unknown outpoint " + in.prev_tx + ":" + std::to_string(in.prev_index));
        auto& slot = view_.spent_[view_.spent_offset_[it->second] + in.prev_index];
        if (slot != kUnspent)
            throw CorpusError(line, "double spend of " + in.prev_tx + ":" + std::to_string(in.prev_index));
        const auto& prev = view_.txs_[it->second].outputs[in.prev_index];
        if (prev.script_type == ScriptType::OpReturn)
            throw CorpusError(line, "spend of unspendable output " + in.prev_tx + ":" + std::to_string(in.prev_index));
        slot = pos;
        in_sum += prev.value;
        t.inputs.push_back({it->second, in.prev_index, in.sequence});
    }

    Satoshi out_sum = 0;
    t.outputs.reserve(rec.outputs.size());
    for (const auto& out : rec.outputs) {
        if (out.value < 0) throw CorpusError(line, "negative output value");
        TxOutput o{out.value, kNoAddress, out.script_type};
        if (out.script_type != ScriptType::OpReturn) {
            if (out.address.empty()) throw CorpusError(line, "spendable output without address");
            o.address = intern(out.address, pos);
        }
        out_sum += out.value;
        t.outputs.push_back(o);
    }
    if (!rec.coinbase && out_sum > in_sum) throw CorpusError(line, "outputs exceed inputs in " + rec.txid);

    view_.spent_offset_.push_back(view_.spent_.size());
    view_.spent_.insert(view_.spent_.end(), t.outputs.size(), kUnspent);
    view_.tx_ids_.emplace(rec.txid, pos);
    view_.txs_.push_back(std::move(t));
    have_last_ = true;
    last_height_ = rec.block_height;
    last_index_ = rec.tx_index;
}

ChainView ChainBuilder::build() && { return std::move(view_); }

ChainView build_view(std::span<const TxRecord> records, Activation activation)
{
    ChainBuilder b(activation);
    std::size_t line = 0;
    for (const auto& r : records) b.append(r, ++line);
    return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Corpus I/O

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

TxRecord record_from_json(const json& j)
{
    TxRecord r;
    r.txid = j.at("txid").get<std::string>();
    r.block_height = j.at("block_height").get<std::uint32_t>();
    r.block_time = j.at("block_time").get<std::int64_t>();
    r.tx_index = j.at("tx_index").get<std::uint64_t>();
    r.version = j.at("version").get<std::int32_t>();
    r.locktime = j.at("locktime").get<std::uint32_t>();
    r.segwit = j.at("segwit").get<bool>();
    r.vsize = j.at("vsize").get<std::uint32_t>();
    r.coinbase = j.at("coinbase").get<bool>();
    for (const auto& in : j.at("inputs"))
        r.inputs.push_back({in.at("prev_tx").get<std::string>(), in.at("prev_index").get<std::uint32_t>(),
                            in.at("sequence").get<std::uint32_t>()});
    for (const auto& out : j.at("outputs"))
        r.outputs.push_back({out.at("value").get<Satoshi>(), out.at("address").get<std::string>(),
                             parse_script_type(out.at("script_type").get<std::string>())});
    return r;
}

}  // namespace

std::string record_to_json_line(const TxRecord& r)
{
    ojson j;
    j["txid"] = r.txid;
    j["block_height"] = r.block_height;
    j["block_time"] = r.block_time;
    j["tx_index"] = r.tx_index;
    j["version"] = r.version;
    j["locktime"] = r.locktime;
    j["segwit"] = r.segwit;
    j["vsize"] = r.vsize;
    j["coinbase"] = r.coinbase;
    auto& ins = j["inputs"] = ojson::array();
    for (const auto& in : r.inputs) {
        ojson e;
        e["prev_tx"] = in.prev_tx;
        e["prev_index"] = in.prev_index;
        e["sequence"] = in.sequence;
        ins.push_back(std::move(e));
    }
    auto& outs = j["outputs"] = ojson::array();
    for (const auto& out : r.outputs) {
        ojson e;
        e["value"] = out.value;
        e["address"] = out.address;
        e["script_type"] = std::string(to_string(out.script_type));
        outs.push_back(std::move(e));
    }
    return j.dump();
}

ChainView parse_corpus(std::istream& in)
{
    std::string line;
    std::size_t lineno = 0;
    std::optional<ChainBuilder> builder;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw CorpusError(lineno, std::string("malformed record: ") + e.what());
        }
        if (j.is_object() && j.contains("format_version")) {
            if (builder) throw CorpusError(lineno, "header must precede all records");
            if (j.at("format_version").get<int>() != 1) throw CorpusError(lineno, "unsupported format_version");
            Activation a;
            if (j.contains("activation")) {
                const auto& act = j.at("activation");
                a.segwit = act.value("segwit", 0u);
                a.rbf = act.value("rbf", 0u);
                a.version2 = act.value("version2", 0u);
            }
            builder.emplace(a);
            continue;
        }
        if (!builder) builder.emplace();
        TxRecord rec;
        try {
            rec = record_from_json(j);
        } catch (const json::exception& e) {
            throw CorpusError(lineno, std::string("malformed record: ") + e.what());
        } catch (const Error& e) {
            throw CorpusError(lineno, std::string("malformed record: ") + e.what());
        }
        builder->append(rec, lineno);
    }
    if (!builder) return ChainView{};
    return std::move(*builder).build();
}

void write_corpus(std::ostream& out, const CorpusHeader& header, std::span<const TxRecord> records)
{
    ojson h;
    h["format_version"] = header.format_version;
    h["activation"]["segwit"] = header.activation.segwit;
    h["activation"]["rbf"] = header.activation.rbf;
    h["activation"]["version2"] = header.activation.version2;
    out << h.dump() << '\n';
    for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

void write_corpus(std::ostream& out, const ChainView& view)
{
    std::vector<TxRecord> recs;
    recs.reserve(view.size());
    for (TxPos p = 0; p < view.size(); ++p) recs.push_back(view.to_record(p));
    write_corpus(out, CorpusHeader{1, view.activation()}, recs);
}

// ---------------------------------------------------------------------------
// Predicates

Satoshi input_value(const Transaction& tx, const ChainView& view)
{
    Satoshi s = 0;
    for (const auto& in : tx.inputs) s += view.prevout(in).value;
    return s;
}

Satoshi output_value(const Transaction& tx)
{
    Satoshi s = 0;
    for (const auto& o : tx.outputs) s += o.value;
    return s;
}

Satoshi fee(const Transaction& tx, const ChainView& view)
{
    if (tx.coinbase) throw Error("fee of coinbase transaction " + tx.txid);
    for (const auto& in : tx.inputs)
        if (in.prev_tx >= view.size() || in.prev_index >= view.tx(in.prev_tx).outputs.size())
            throw Error("unresolvable input in " + tx.txid);
    return input_value(tx, view) - output_value(tx);
}

bool is_coinjoin(const Transaction& tx, const CoinJoinRule& rule)
{
    if (tx.inputs.size() < rule.min_inputs || tx.outputs.size() < rule.min_outputs) return false;
    std::map<Satoshi, std::size_t> freq;
    std::size_t best = 0;
    for (const auto& o : tx.outputs) best = std::max(best, ++freq[o.value]);
    return best >= rule.min_equal_outputs;
}

bool is_standard(const Transaction& tx, const CoinJoinRule& rule)
{
    if (tx.coinbase || tx.outputs.size() != 2) return false;
    for (const auto& o : tx.outputs)
        if (o.script_type == ScriptType::OpReturn) return false;
    return !is_coinjoin(tx, rule);
}

bool is_rbf(const Transaction& tx)
{
    return std::any_of(tx.inputs.begin(), tx.inputs.end(), [](const TxInput& in) { return in.sequence < 0xFFFFFFFEu; });
}

// ---------------------------------------------------------------------------
// Tags

void TagSet::add(const std::string& address, Tag tag)
{
    auto [it, inserted] = tags_.try_emplace(address, tag);
    if (!inserted && !(it->second == tag))
        throw Error("address " + address + " carries conflicting tags '" + it->second.label + "' and '" + tag.label + "'");
}

const Tag* TagSet::find(std::string_view address) const
{
    auto it = tags_.find(std::string(address));
    return it == tags_.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::string, Tag>> TagSet::sorted() const
{
    std::vector<std::pair<std::string, Tag>> v(tags_.begin(), tags_.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return v;
}

TagSet parse_tags(std::istream& in)
{
    TagSet tags;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = json::parse(line);
            tags.add(j.at("address").get<std::string>(),
                     Tag{j.at("label").get<std::string>(), parse_tag_category(j.at("category").get<std::string>())});
        } catch (const json::exception& e) {
            throw CorpusError(lineno, std::string("malformed tag: ") + e.what());
        } catch (const Error& e) {
            throw CorpusError(lineno, e.what());
        }
    }
    return tags;
}

void write_tags(std::ostream& out, const TagSet& tags)
{
    for (const auto& [addr, tag] : tags.sorted()) {
        ojson j;
        j["address"] = addr;
        j["label"] = tag.label;
        j["category"] = std::string(to_string(tag.category));
        out << j.dump() << '\n';
    }
}

}  // namespace ct
