#pragma once

// Ground-truth extraction: standard transactions whose change output is
// revealed because the change address later lands in the inputs' base
// cluster, followed by the audit filters.

#include "changetrace/chain.hpp"
#include "changetrace/cluster.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ct {

struct Candidate {
    TxPos tx = 0;
    /// Bit i set when output i shares the inputs' base-cluster root.
    std::uint8_t in_cluster = 0;
    AddressId root = kNoAddress;

    bool two_sided() const { return in_cluster == 0b11; }
    /// Only meaningful when exactly one bit is set.
    std::uint32_t change_index() const { return in_cluster == 0b10 ? 1u : 0u; }
};

struct CandidateSet {
    std::vector<Candidate> txs;
    std::size_t standard = 0;
    std::size_t address_reuse = 0;
};

struct FilterReport {
    std::size_t standard = 0;
    std::size_t address_reuse = 0;
    std::size_t candidates = 0;
    std::size_t unspent_removed = 0;
    std::size_t two_candidate_removed = 0;
    std::size_t high_self_rate_removed = 0;
    std::size_t high_self_rate_clusters = 0;
    std::size_t tag_conflict_removed = 0;
    std::size_t tag_conflict_clusters = 0;
    std::size_t blocklist_removed = 0;
    std::size_t reused_change_removed = 0;
    std::size_t final = 0;
    /// [change reused/fresh][spend reused/fresh] over the final set.
    std::size_t freshness[2][2] = {{0, 0}, {0, 0}};
    double two_candidate_threshold = 0.10;

    std::size_t removed() const
    {
        return unspent_removed + two_candidate_removed + high_self_rate_removed + tag_conflict_removed + blocklist_removed +
               reused_change_removed;
    }
    bool conserved() const { return candidates - removed() == final && candidates >= removed(); }
};

struct GroundTruthEntry {
    TxPos tx = 0;
    std::uint32_t change_index = 0;
};

struct GroundTruthSet {
    std::vector<GroundTruthEntry> entries;  // corpus order
    FilterReport report;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
    std::optional<std::uint32_t> change_of(TxPos tx) const;
};

struct GroundTruthOptions {
    double two_candidate_threshold = 0.10;
    /// Base clusters containing any of these addresses are dropped.
    std::vector<std::string> blocklist;
    CoinJoinRule coinjoin;
};

/// Standard transactions with no input address reused in an output and at
/// least one output in the inputs' base cluster.
CandidateSet extract_candidates(const ChainView& view, const ClusterAssignment& base, const CoinJoinRule& rule = {});

std::vector<Candidate> filter_unspent(std::vector<Candidate> c, const ChainView& view, FilterReport& report);
std::vector<Candidate> filter_two_candidates(std::vector<Candidate> c, const ClusterAssignment& base, double threshold,
                                             FilterReport& report);
std::vector<Candidate> filter_tag_conflicts(std::vector<Candidate> c, const ChainView& view, const ClusterAssignment& base,
                                            const TagSet& tags, const std::vector<std::string>& blocklist, FilterReport& report);
/// Drops candidates whose reused change address was already linked to the
/// inputs by input merging over the strict corpus prefix. Also drops any
/// candidate with an unspent output.
GroundTruthSet filter_known_change(std::vector<Candidate> c, const ChainView& view, FilterReport report,
                                   const CoinJoinRule& rule = {});

/// Full pipeline in fixed order: unspent, two-candidate, tags/blocklist, reuse.
GroundTruthSet extract_ground_truth(const ChainView& view, const ClusterAssignment& base, const TagSet& tags,
                                    const GroundTruthOptions& options = {});

/// Standard transactions whose change is not revealed by cluster membership
/// and that do not reuse an input address.
std::vector<TxPos> unknown_change_txs(const ChainView& view, const ClusterAssignment& base, const CoinJoinRule& rule = {});

void write_ground_truth(std::ostream& out, const GroundTruthSet& gt, const ChainView& view);
GroundTruthSet read_ground_truth(std::istream& in, const ChainView& view);
void write_filter_report(std::ostream& out, const FilterReport& r);

}  // namespace ct
