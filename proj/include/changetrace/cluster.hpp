#pragma once

#include "changetrace/chain.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace ct {

/// Union-find over dense ids: union by size, path compression.
class DisjointSet {
public:
    DisjointSet() = default;
    explicit DisjointSet(std::size_t n);

    std::size_t size() const { return parent_.size(); }
    /// Registers a new singleton and returns its id.
    std::uint32_t add();

    std::uint32_t find(std::uint32_t a);
    /// Read-only lookup without compression.
    std::uint32_t find(std::uint32_t a) const;
    /// Larger set's root survives; on equal sizes the smaller id does.
    std::uint32_t unite(std::uint32_t a, std::uint32_t b);
    std::uint32_t set_size(std::uint32_t a) { return size_[find(a)]; }

private:
    void check(std::uint32_t a) const;
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
};

struct ClusterStats {
    std::uint32_t address_count = 0;
    /// Transactions spending from the cluster.
    std::uint32_t tx_count = 0;
    std::int64_t first_time = 0;
    std::int64_t last_time = 0;
};

/// Frozen clustering over a ChainView's address ids. Roots are canonical
/// representatives; stats are defined at roots only.
class ClusterAssignment {
public:
    ClusterAssignment() = default;
    ClusterAssignment(DisjointSet ds, const ChainView& view);

    std::size_t address_count() const { return root_.size(); }
    AddressId root(AddressId a) const { return root_[a]; }
    const std::vector<AddressId>& roots() const { return root_; }
    const ClusterStats& stats(AddressId root) const { return stats_[root]; }
    std::vector<AddressId> cluster_roots() const;
    std::size_t cluster_count() const;
    /// The disjoint set the assignment was frozen from (for enhancement).
    const DisjointSet& disjoint_set() const { return ds_; }
    /// Root of the transaction's inputs (first input), or kNoAddress for coinbase.
    AddressId input_root(const Transaction& tx, const ChainView& view) const;

private:
    DisjointSet ds_;
    std::vector<AddressId> root_;
    std::vector<ClusterStats> stats_;
};

/// Transactions excluded from input merging.
bool skip_multi_input(const Transaction& tx, const CoinJoinRule& rule);

/// Unions the input addresses of every non-coinbase, non-CoinJoin
/// transaction, in corpus order.
ClusterAssignment multi_input_clustering(const ChainView& view, const CoinJoinRule& rule = {});
DisjointSet multi_input_disjoint_set(const ChainView& view, const CoinJoinRule& rule = {});

/// Cluster file: one {"address", "root"} object per line, address-id order.
void write_clusters(std::ostream& out, const ClusterAssignment& c, const ChainView& view);
ClusterAssignment read_clusters(std::istream& in, const ChainView& view);
/// CSV: root,address_count,tx_count,first_time,last_time
void write_cluster_summary(std::ostream& out, const ClusterAssignment& c, const ChainView& view);

}  // namespace ct
