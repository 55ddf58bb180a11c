#pragma once

// Model training over a ground-truth set: grouped train/test split, optional
// hyperparameter search, the full and no-fingerprint forests, and a held-out
// comparison against the threshold-vote classifier.

#include "changetrace/forest.hpp"

#include <optional>

namespace ct {

struct TrainOptions {
    ForestParams full{.max_features = 5, .min_samples_split = 50};
    ForestParams reduced{.max_features = 5, .min_samples_split = 100};
    double test_fraction = 0.2;
    std::uint64_t split_seed = 1;
    bool search = false;
    SearchGrid grid;
    SearchOptions search_options;
    CoinJoinRule rule;
};

struct TrainReport {
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t reduced_train_rows = 0;
    /// Test rows of transactions with at least one vote.
    std::size_t scored_test_rows = 0;
    RocCurve forest_roc;
    RocCurve vote_roc;
    /// Vote operating point at FPR <= 0.1% and the forest's best point at or below its FPR.
    RocPoint vote_low_fpr;
    RocPoint forest_low_fpr;
    bool groups_disjoint = true;
    ForestParams full_params;
    ForestParams reduced_params;
    std::optional<SearchResult> full_search;
    std::optional<SearchResult> reduced_search;
};

struct TrainedModels {
    ForestModel full;
    ForestModel reduced;
    TrainReport report;
};

inline constexpr double kLowFpr = 0.001;

/// True when no group has rows on both sides of the split.
bool split_is_grouped(std::span<const std::uint32_t> groups, const std::vector<bool>& test);

TrainedModels train_models(const ChainView& view, const ClusterAssignment& base, const GroundTruthSet& gt,
                           const TrainOptions& opt = {});

void write_train_report(std::ostream& out, const TrainReport& r);

}  // namespace ct
