#pragma once

// Transaction corpus model: records, the indexed ChainView, tags, and the
// basic per-transaction predicates used throughout the pipeline.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ct {

using Satoshi = std::int64_t;
using TxPos = std::uint32_t;
using AddressId = std::uint32_t;

inline constexpr AddressId kNoAddress = std::numeric_limits<AddressId>::max();
inline constexpr TxPos kUnspent = std::numeric_limits<TxPos>::max();

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorpusError : Error {
    CorpusError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};

enum class ScriptType : std::uint8_t { P2PKH, P2SH, P2WPKH, P2WSH, Multisig, OpReturn, Other };
inline constexpr int kScriptTypeCount = 7;

std::string_view to_string(ScriptType t);
ScriptType parse_script_type(std::string_view s);
bool permits_segwit(ScriptType t);

// On-disk record: ids are strings, inputs reference outpoints by txid.
struct InputRecord {
    std::string prev_tx;
    std::uint32_t prev_index = 0;
    std::uint32_t sequence = 0xFFFFFFFFu;
    bool operator==(const InputRecord&) const = default;
};

struct OutputRecord {
    Satoshi value = 0;
    std::string address;
    ScriptType script_type = ScriptType::P2PKH;
    bool operator==(const OutputRecord&) const = default;
};

struct TxRecord {
    std::string txid;
    std::uint32_t block_height = 0;
    std::int64_t block_time = 0;
    std::uint64_t tx_index = 0;
    std::int32_t version = 1;
    std::uint32_t locktime = 0;
    bool segwit = false;
    std::uint32_t vsize = 1;
    bool coinbase = false;
    std::vector<InputRecord> inputs;
    std::vector<OutputRecord> outputs;
    bool operator==(const TxRecord&) const = default;
};

struct Activation {
    std::uint32_t segwit = 0;
    std::uint32_t rbf = 0;
    std::uint32_t version2 = 0;
    bool operator==(const Activation&) const = default;
};

enum class Feature { None, SegWit, Rbf, Version2 };

// In-memory, interned form.
struct TxOutput {
    Satoshi value = 0;
    AddressId address = kNoAddress;
    ScriptType script_type = ScriptType::P2PKH;
};

struct TxInput {
    TxPos prev_tx = 0;
    std::uint32_t prev_index = 0;
    std::uint32_t sequence = 0xFFFFFFFFu;
};

struct Transaction {
    std::string txid;
    std::uint32_t block_height = 0;
    std::int64_t block_time = 0;
    std::uint64_t tx_index = 0;
    std::int32_t version = 1;
    std::uint32_t locktime = 0;
    bool segwit = false;
    std::uint32_t vsize = 1;
    bool coinbase = false;
    std::vector<TxInput> inputs;
    std::vector<TxOutput> outputs;
};

class ChainBuilder;

/// Immutable, fully indexed corpus. Transactions are addressed by their
/// position in corpus order, addresses by dense ids assigned on first
/// appearance in an output.
class ChainView {
public:
    std::size_t size() const { return txs_.size(); }
    const Transaction& tx(TxPos p) const { return txs_[p]; }
    std::span<const Transaction> txs() const { return txs_; }
    std::optional<TxPos> find_tx(std::string_view txid) const;

    /// Spending transaction of an outpoint, or kUnspent.
    TxPos spent_by(TxPos p, std::uint32_t out) const { return spent_[spent_offset_[p] + out]; }
    bool all_outputs_spent(TxPos p) const;

    const TxOutput& prevout(const TxInput& in) const { return txs_[in.prev_tx].outputs[in.prev_index]; }

    std::size_t address_count() const { return address_names_.size(); }
    const std::string& address_name(AddressId a) const { return address_names_.at(a); }
    std::optional<AddressId> find_address(std::string_view name) const;
    /// Corpus position of the first transaction paying to the address.
    TxPos first_seen(AddressId a) const { return first_seen_.at(a); }

    const Activation& activation() const { return activation_; }
    std::uint32_t activation_height(Feature f) const;

    TxRecord to_record(TxPos p) const;

private:
    friend class ChainBuilder;
    std::vector<Transaction> txs_;
    std::unordered_map<std::string, TxPos> tx_ids_;
    std::vector<std::size_t> spent_offset_;
    std::vector<TxPos> spent_;
    std::vector<std::string> address_names_;
    std::unordered_map<std::string, AddressId> address_ids_;
    std::vector<TxPos> first_seen_;
    Activation activation_;
};

/// Streaming construction: records must arrive in corpus order.
class ChainBuilder {
public:
    explicit ChainBuilder(Activation activation = {});
    /// Validates and indexes one record. `line` is used for diagnostics.
    void append(const TxRecord& rec, std::size_t line = 0);
    ChainView build() &&;

private:
    AddressId intern(const std::string& name, TxPos p);
    ChainView view_;
    bool have_last_ = false;
    std::uint32_t last_height_ = 0;
    std::uint64_t last_index_ = 0;
};

ChainView build_view(std::span<const TxRecord> records, Activation activation = {});

// Corpus file: an optional header line followed by one JSON record per line.
struct CorpusHeader {
    int format_version = 1;
    Activation activation;
};

ChainView parse_corpus(std::istream& in);
void write_corpus(std::ostream& out, const CorpusHeader& header, std::span<const TxRecord> records);
void write_corpus(std::ostream& out, const ChainView& view);
std::string record_to_json_line(const TxRecord& rec);

// Predicates.
struct CoinJoinRule {
    std::size_t min_inputs = 5;
    std::size_t min_outputs = 5;
    std::size_t min_equal_outputs = 3;
};

/// Inputs minus outputs. Throws on coinbase transactions.
Satoshi fee(const Transaction& tx, const ChainView& view);
Satoshi input_value(const Transaction& tx, const ChainView& view);
Satoshi output_value(const Transaction& tx);
bool is_coinjoin(const Transaction& tx, const CoinJoinRule& rule = {});
bool is_standard(const Transaction& tx, const CoinJoinRule& rule = {});
/// Opt-in replace-by-fee signalling: some input sequence below 0xFFFFFFFE.
bool is_rbf(const Transaction& tx);

// Tags.
enum class TagCategory : std::uint8_t { Exchange, Darknet, Gambling, Other };
std::string_view to_string(TagCategory c);
TagCategory parse_tag_category(std::string_view s);

struct Tag {
    std::string label;
    TagCategory category = TagCategory::Other;
    bool operator==(const Tag&) const = default;
};

class TagSet {
public:
    /// Throws if the address already carries a different tag.
    void add(const std::string& address, Tag tag);
    const Tag* find(std::string_view address) const;
    std::size_t size() const { return tags_.size(); }
    bool empty() const { return tags_.empty(); }
    /// Sorted by address for stable iteration.
    std::vector<std::pair<std::string, Tag>> sorted() const;

private:
    std::unordered_map<std::string, Tag> tags_;
};

TagSet parse_tags(std::istream& in);
void write_tags(std::ostream& out, const TagSet& tags);

}  // namespace ct
