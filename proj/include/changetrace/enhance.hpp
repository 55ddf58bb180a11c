#pragma once

// Applies change predictions to a base clustering: naive merging, the
// constrained union-find that refuses merges contradicted by confident
// spend predictions, and collapse diagnostics.

#include "changetrace/cluster.hpp"
#include "changetrace/forest.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

namespace ct {

struct Thresholds {
    double p_change = 0.99;
    double p_spend = 0.01;

    void validate() const;
};

struct Prediction {
    TxPos tx = 0;
    std::array<double, 2> probability{};  // per output, of being change
    ModelVariant variant = ModelVariant::Full;
};

struct PredictionSet {
    std::vector<Prediction> items;  // corpus order
    Thresholds thresholds;
};

/// Scores unknown-change standard transactions with at least one vote. Fully
/// spent ones go to the full model, the rest to the reduced model.
PredictionSet predict_all(const ChainView& view, const ClusterAssignment& base, const ForestModel& full, const ForestModel& reduced,
                          const Thresholds& thresholds = {}, const CoinJoinRule& rule = {});
PredictionSet predict_txs(std::span<const TxPos> txs, const ChainView& view, const ClusterAssignment& base, const ForestModel& full,
                          const ForestModel& reduced, const Thresholds& thresholds = {}, const CoinJoinRule& rule = {});

/// JSONL {txid, output_index, probability, model}, two lines per transaction.
void write_predictions(std::ostream& out, const PredictionSet& p, const ChainView& view);
PredictionSet read_predictions(std::istream& in, const ChainView& view, const Thresholds& thresholds = {});

struct EnhanceStats {
    std::size_t change_edges = 0;  // transactions with exactly one output above p_change
    std::size_t merges = 0;
    std::size_t redundant = 0;  // endpoints already shared a root
    std::size_t both_above = 0;
    std::size_t constraints = 0;
    std::size_t skipped_conflict = 0;
};

struct EnhanceResult {
    ClusterAssignment clusters;
    EnhanceStats stats;
};

/// (input root, output address) for every output at or below p_spend, base-root ids.
std::vector<std::pair<AddressId, AddressId>> spend_constraints(const PredictionSet& p, const ChainView& view,
                                                               const ClusterAssignment& base);

EnhanceResult naive_enhance(const ChainView& view, const ClusterAssignment& base, const PredictionSet& p);
EnhanceResult constrained_enhance(const ChainView& view, const ClusterAssignment& base, const PredictionSet& p);

/// Merges (inputs, chosen output) for deterministic change calls, in the given order.
ClusterAssignment merge_change_calls(const ChainView& view, const ClusterAssignment& base,
                                     std::span<const std::pair<TxPos, std::uint32_t>> calls);

struct AffectedCluster {
    AddressId root = 0;
    std::uint32_t constituents = 0;
    std::uint32_t address_increase = 0;
    std::int64_t tx_increase = 0;
    bool has_time_gap = false;
    std::int64_t time_gap_change = 0;
};

struct CollapseReport {
    std::vector<AffectedCluster> clusters;  // by root
    /// Nearest-rank percentiles of the tx counts of every non-largest constituent.
    std::vector<std::pair<double, std::uint32_t>> smaller_tx_percentiles;
    EnhanceStats stats;
};

inline constexpr double kCollapsePercentiles[] = {90.0, 99.0, 99.9, 99.99, 99.999};

CollapseReport collapse_report(const ClusterAssignment& before, const ClusterAssignment& after, const ChainView& view,
                               const EnhanceStats& stats = {});
/// Nearest-rank percentile of an ascending-sorted list.
std::uint32_t nearest_rank(std::span<const std::uint32_t> sorted, double q);

void write_collapse_report(std::ostream& out, const CollapseReport& r, const ChainView& view);
void write_collapse_csv(std::ostream& out, const CollapseReport& r, const ChainView& view);

}  // namespace ct
