#pragma once

// Change heuristics over standard two-output transactions, the uniqueness
// rule, per-output vote tables and the TPR/FPR/coverage evaluation.

#include "changetrace/chain.hpp"
#include "changetrace/ground_truth.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ct {

enum class Heuristic : std::uint8_t {
    OptimalChange,
    OptimalChangeFee,
    AddressType,
    PowerOfTen2,
    PowerOfTen3,
    PowerOfTen4,
    PowerOfTen5,
    PowerOfTen6,
    PowerOfTen7,
    FpOutputCount,
    FpInOutCount,
    FpVersion,
    FpLocktime,
    FpRbf,
    FpSegWit,
    FpSegWitConform,
    FpBip69,
    FpZeroConf,
    FpAbsFee,
    FpRelFee,
    FpMultisig,
    FpP2PKH,
    FpP2SH,
    FpP2WPKH,
    FpP2WSH,
    FpAllAddressTypes,
};

inline constexpr std::size_t kHeuristicCount = 26;
inline constexpr std::size_t kUniversalCount = 9;
inline constexpr std::size_t kFingerprintCount = kHeuristicCount - kUniversalCount;

std::span<const Heuristic> all_heuristics();
inline std::size_t index_of(Heuristic h) { return static_cast<std::size_t>(h); }
inline bool is_fingerprint(Heuristic h) { return index_of(h) >= kUniversalCount; }
std::string_view to_string(Heuristic h);
Heuristic parse_heuristic(std::string_view s);
/// Protocol feature a fingerprint depends on, Feature::None if always available.
Feature required_feature(Heuristic h);
Heuristic power_of_ten(int n);

/// Subset of {0, 1}.
struct OutputSet {
    std::uint8_t bits = 0;

    bool contains(std::uint32_t i) const { return i < 8 && ((bits >> i) & 1u); }
    void insert(std::uint32_t i) { bits |= static_cast<std::uint8_t>(1u << i); }
    int size() const { return __builtin_popcount(bits); }
    bool empty() const { return bits == 0; }
    std::optional<std::uint32_t> single() const;
    bool operator==(const OutputSet&) const = default;
};

/// Wallet characteristics compared by fingerprint heuristics.
struct TxTraits {
    std::uint32_t input_count = 0;
    std::uint32_t output_count = 0;
    std::int32_t version = 1;
    bool locktime = false;
    bool rbf = false;
    bool segwit = false;
    bool segwit_conform = false;
    bool bip69 = false;
    bool zero_conf = false;
    bool multisig = false;
    Satoshi abs_fee = 0;
    std::int64_t rel_fee = 0;
    std::uint8_t input_types = 0;  // bit per ScriptType

    bool has_input_type(ScriptType t) const { return (input_types >> static_cast<int>(t)) & 1u; }
};

TxTraits tx_traits(const Transaction& tx, const ChainView& view);
/// Half-up integer sat/vB.
std::int64_t relative_fee(Satoshi fee, std::uint32_t vsize);
bool is_bip69_sorted(const Transaction& tx, const ChainView& view);

OutputSet candidates(Heuristic h, TxPos tx, const ChainView& view, const CoinJoinRule& rule = {});
std::optional<std::uint32_t> unique_candidate(Heuristic h, TxPos tx, const ChainView& view, const CoinJoinRule& rule = {});
/// Every heuristic at once, sharing trait computation.
std::array<OutputSet, kHeuristicCount> all_candidates(TxPos tx, const ChainView& view, const CoinJoinRule& rule = {});

using VoteRow = std::array<std::int8_t, kHeuristicCount>;

/// Two rows per transaction, output 0 first.
struct VoteTable {
    std::vector<TxPos> txs;
    std::vector<VoteRow> rows;

    std::size_t tx_count() const { return txs.size(); }
    const VoteRow& row(std::size_t i, std::uint32_t out) const { return rows[2 * i + out]; }
    bool no_votes(std::size_t i) const;
};

/// Heuristics not listed in `kinds` keep zero votes.
VoteTable build_vote_table(std::span<const TxPos> txs, const ChainView& view, std::span<const Heuristic> kinds = all_heuristics(),
                           const CoinJoinRule& rule = {});

void write_vote_table(std::ostream& out, const VoteTable& t, const ChainView& view);
VoteTable read_vote_table(std::istream& in, const ChainView& view);

struct HeuristicScore {
    std::string name;
    double tpr = 0;
    double fpr = 0;
    double coverage = 0;
};

using ChangePredictor = std::function<std::optional<std::uint32_t>(TxPos)>;

/// TPR/FPR over the ground truth, coverage as firing rate over `remaining`.
HeuristicScore score_predictor(std::string name, const GroundTruthSet& gt, std::span<const TxPos> remaining,
                               const ChangePredictor& predict);
std::vector<HeuristicScore> evaluate_heuristics(const GroundTruthSet& gt, const ChainView& view, std::span<const TxPos> remaining,
                                                std::span<const Heuristic> kinds = all_heuristics(), const CoinJoinRule& rule = {});
void write_scores_csv(std::ostream& out, std::span<const HeuristicScore> scores);

}  // namespace ct
