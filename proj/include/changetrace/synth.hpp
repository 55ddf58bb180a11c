#pragma once

// Labeled synthetic corpus generator. Entities carry persistent wallet
// fingerprints and spending habits; the generator records which output of
// every transaction is the change, who owns every address, and a ledger of
// inter-entity payments.

#include "changetrace/chain.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace ct {

enum class EntityKind : std::uint8_t { User, Exchange, Gambler, Merchant };
std::string_view to_string(EntityKind k);
EntityKind parse_entity_kind(std::string_view s);

enum class FeeMode : std::uint8_t { Absolute, Relative };

struct Fingerprint {
    std::int32_t version = 1;
    bool uses_segwit = false;
    bool sets_locktime = false;
    bool signals_rbf = false;
    FeeMode fee_mode = FeeMode::Absolute;
    /// Satoshi for absolute mode, sat/vB for relative mode.
    Satoshi fee_amount = 1000;
    bool sorts_bip69 = false;
    bool spends_unconfirmed = false;
    ScriptType address_type = ScriptType::P2PKH;
};

struct EntityProfile {
    std::uint32_t entity_id = 0;
    EntityKind kind = EntityKind::User;
    std::string label;
    std::optional<TagCategory> tag_category;
    Fingerprint fingerprint;
    double reuse_rate = 0.0;
    double receive_reuse_rate = 0.0;
    double spend_round_prob = 0.0;
    double activity_rate = 0.0;
};

/// Probabilities used when drawing each entity's fingerprint.
struct TraitMix {
    double version2 = 0.4;
    double segwit = 0.5;
    double locktime = 0.4;
    double rbf = 0.25;
    double relative_fee = 0.5;
    double bip69 = 0.3;
    double zero_conf = 0.15;
    /// Weights over P2PKH, P2SH, P2WPKH, P2WSH, Multisig.
    std::array<double, 5> address_type{0.35, 0.25, 0.25, 0.08, 0.07};
};

struct EntityGroup {
    EntityKind kind = EntityKind::User;
    std::uint32_t count = 0;
    double activity_rate = 1.0;  // transactions per simulated day
    double reuse_rate = 0.05;
    double receive_reuse_rate = 0.1;
    double spend_round_prob = 0.6;
    Satoshi initial_funding = 0;
    std::uint32_t funding_outputs = 4;
    std::optional<TagCategory> tag_category;
    double tag_fraction = 0.2;
};

struct SynthConfig {
    std::uint32_t days = 30;
    std::uint32_t blocks_per_day = 144;
    std::int64_t genesis_time = 1500000000;
    std::int64_t block_interval = 600;
    Activation activation{0, 0, 0};
    std::vector<EntityGroup> groups;
    TraitMix traits;
    Satoshi block_reward = 0;
    Satoshi min_payment = 10000;
    Satoshi dust = 546;
    double max_payment_fraction = 0.6;
    /// Lower end of the log-uniform payment range, relative to its upper end.
    double min_payment_fraction = 0.0;
    double suboptimal_rate = 0.05;
    double batch_rate = 0.3;
    std::uint32_t batch_min = 3;
    std::uint32_t batch_max = 6;
    double sweep_rate = 0.03;
    std::uint32_t sweep_max_inputs = 12;
    double self_transfer_rate = 0.01;
    double opreturn_rate = 0.005;
    double coinjoin_per_day = 2.0;
    std::uint32_t coinjoin_min = 5;
    std::uint32_t coinjoin_max = 8;
    double wallet_switch_rate = 0.0;
    double cashout_prob = 0.6;
};

SynthConfig default_synth_config();
SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json synth_config_to_json(const SynthConfig& c);
SynthConfig load_synth_config(std::istream& in);

struct Payment {
    std::string txid;
    std::uint32_t output_index = 0;
    std::uint32_t from_entity = 0;
    std::uint32_t to_entity = 0;
    Satoshi value = 0;
};

class SimLabels {
public:
    void add_change(const std::string& txid, std::optional<std::uint32_t> index);
    void add_owner(const std::string& address, std::uint32_t entity);

    /// Corpus order; nullopt for transactions without a change output.
    const std::vector<std::pair<std::string, std::optional<std::uint32_t>>>& change() const { return change_; }
    bool has_tx(std::string_view txid) const;
    std::optional<std::uint32_t> change_of(std::string_view txid) const;
    std::optional<std::uint32_t> entity_of(std::string_view address) const;
    const std::unordered_map<std::string, std::uint32_t>& owners() const { return owner_; }

    std::vector<EntityProfile> entities;
    std::vector<Payment> payments;

private:
    std::vector<std::pair<std::string, std::optional<std::uint32_t>>> change_;
    std::unordered_map<std::string, std::optional<std::uint32_t>> change_by_txid_;
    std::unordered_map<std::string, std::uint32_t> owner_;
};

struct SynthCorpus {
    CorpusHeader header;
    std::vector<TxRecord> records;
    SimLabels labels;
    TagSet tags;
};

/// Deterministic for a fixed (config, seed). Throws ct::Error on infeasible configs.
SynthCorpus generate(const SynthConfig& config, std::uint64_t seed);

void write_labels(std::ostream& out, const SimLabels& labels);
SimLabels read_labels(std::istream& in);

}  // namespace ct
