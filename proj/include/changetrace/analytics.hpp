#pragma once

// Downstream analyses over a clustering: tagged flows, velocity, the
// Meiklejohn change rule, pair co-clustering probability and comparison of
// two clusterings.

#include "changetrace/cluster.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ct {

struct FlowRow {
    std::string source;  // tag label of the sending cluster
    Satoshi before = 0;
    Satoshi after = 0;
    /// Percent change from before to after; nullopt when before is zero.
    std::optional<double> percent_change() const;
};

/// Per source label: value sent from clusters tagged `src` to other clusters
/// tagged `dst`. A cluster with several `src` labels is attributed to the
/// lexicographically smallest. CoinJoins are skipped.
std::map<std::string, Satoshi> flows(const ChainView& view, const ClusterAssignment& clustering, const TagSet& tags, TagCategory src,
                                     TagCategory dst, const CoinJoinRule& rule = {});
std::vector<FlowRow> flow_table(const ChainView& view, const ClusterAssignment& before, const ClusterAssignment& after,
                                const TagSet& tags, TagCategory src, TagCategory dst, const CoinJoinRule& rule = {});
void write_flow_csv(std::ostream& out, std::span<const FlowRow> rows);

struct VelocityBucket {
    std::int64_t start = 0;
    Satoshi moved = 0;
    Satoshi total = 0;
};

/// Output value leaving the sending cluster, bucketed by block time. Buckets
/// are contiguous from the first to the last non-coinbase transaction.
std::vector<VelocityBucket> velocity(const ChainView& view, const ClusterAssignment& clustering, std::int64_t bucket_seconds = 86400);
void write_velocity_csv(std::ostream& out, std::span<const VelocityBucket> series);

enum class MeiklejohnVariant { Local, Global };

/// One entry per input transaction.
std::vector<std::optional<std::uint32_t>> meiklejohn_predict(const ChainView& view, std::span<const TxPos> txs, MeiklejohnVariant v);

/// Co-clustered address pairs and all address pairs.
struct PairCounts {
    std::uint64_t same = 0;
    std::uint64_t total = 0;
};
PairCounts pair_counts(std::span<const std::size_t> cluster_sizes);
double pair_probability(std::span<const std::size_t> cluster_sizes);
double pair_probability(const ClusterAssignment& c);

struct ChangeCall {
    TxPos tx = 0;
    std::uint32_t output = 0;
};

struct CompareOptions {
    std::uint64_t sample_size = 1000000;
    std::uint64_t seed = 1;
    bool force_sampling = false;
    /// Optional day (unix seconds / 86400) to USD-per-BTC price.
    std::map<std::int64_t, double> usd_per_btc;
};

struct Quadrants {
    double neither = 0, ours_only = 0, theirs_only = 0, both = 0;  // shares in [0,1]
    bool sampled = false;
    std::uint64_t pairs = 0;
};

struct ComparisonTable {
    double ours_coverage = 0;
    double theirs_coverage = 0;
    std::uint32_t ours_largest = 0;
    std::uint32_t theirs_largest = 0;
    Quadrants quadrants;
    std::size_t overlapping = 0;
    Satoshi overlapping_value = 0;
    std::size_t conflicting = 0;
    /// Sum over conflicts of |value(ours) - value(theirs)|.
    Satoshi conflicting_value = 0;
    std::optional<double> conflicting_usd;
    std::uint64_t seed = 0;
};

Quadrants pair_quadrants(const ClusterAssignment& ours, const ClusterAssignment& theirs, const CompareOptions& opt = {});
/// `universe` is the transaction set coverage is measured over.
ComparisonTable compare_clusterings(const ClusterAssignment& ours, const ClusterAssignment& theirs, std::span<const ChangeCall> ours_calls,
                                    std::span<const ChangeCall> theirs_calls, std::span<const TxPos> universe, const ChainView& view,
                                    const CompareOptions& opt = {});
void write_comparison_csv(std::ostream& out, const ComparisonTable& t);

std::map<std::int64_t, double> read_price_csv(std::istream& in);

void write_change_calls(std::ostream& out, std::span<const ChangeCall> calls, const ChainView& view);
std::vector<ChangeCall> read_change_calls(std::istream& in, const ChainView& view);

}  // namespace ct
