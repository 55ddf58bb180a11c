#pragma once

// Random-forest change classifier: per-output feature rows, grouped
// splitting, Gini trees with bagging, and successive-halving search.

#include "changetrace/cluster.hpp"
#include "changetrace/ground_truth.hpp"
#include "changetrace/heuristics.hpp"
#include "changetrace/roc.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ct {

enum class ModelVariant : std::uint8_t { Full, NoFingerprint };
std::string_view to_string(ModelVariant v);

inline constexpr std::size_t kTxFeatureCount = 9;
inline constexpr std::uint32_t kBlocksPerEpoch = 1008;

struct FeatureRow {
    TxPos tx = 0;
    std::uint32_t output_index = 0;
    int label = -1;  // 1 change, 0 spend, -1 unknown
    AddressId group = kNoAddress;
    VoteRow votes{};
    double value_ratio = 0;
    std::uint32_t out_index = 0;
    Satoshi total_value = 0;
    double fee_per_byte = 0;
    std::int32_t version = 1;
    bool segwit = false;
    bool locktime_nonzero = false;
    std::uint32_t input_count = 0;
    std::uint32_t epoch = 0;
};

std::size_t feature_count(ModelVariant v);
std::vector<std::string> feature_names(ModelVariant v);
void encode_features(const FeatureRow& row, ModelVariant v, std::span<double> out);

/// Two rows per vote-table transaction; labels from `gt` when it lists the tx.
std::vector<FeatureRow> build_feature_rows(const VoteTable& votes, const ChainView& view, const ClusterAssignment& base,
                                           const GroundTruthSet* gt = nullptr);

/// Dense row-major matrix with binary labels and a group per row.
struct Dataset {
    std::size_t cols = 0;
    std::vector<double> x;
    std::vector<std::uint8_t> y;
    std::vector<std::uint32_t> group;

    std::size_t rows() const { return y.size(); }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }
    void add(std::span<const double> features, int label, std::uint32_t grp);
    Dataset subset(std::span<const std::size_t> idx) const;
};

/// Rows with label >= 0 only.
Dataset make_dataset(std::span<const FeatureRow> rows, ModelVariant v);

/// Test membership per row. Whole groups move together.
std::vector<bool> grouped_split(std::span<const std::uint32_t> groups, double test_fraction, std::uint64_t seed);
/// Fold index per row; groups never straddle folds.
std::vector<std::uint32_t> group_folds(std::span<const std::uint32_t> groups, std::uint32_t k, std::uint64_t seed);

struct ForestParams {
    std::uint32_t n_trees = 100;
    std::uint32_t max_features = 5;
    std::uint32_t min_samples_split = 50;
    std::uint64_t seed = 1;
    bool bootstrap = true;
    std::uint32_t max_thresholds = 64;
    bool operator==(const ForestParams&) const = default;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 for leaves
    double threshold = 0;       // x <= threshold goes left
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint64_t positives = 0;
    std::uint64_t total = 0;

    bool leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // root first
    double predict(std::span<const double> x) const;
};

struct ForestModel {
    ForestParams params;
    ModelVariant variant = ModelVariant::Full;
    std::uint32_t features = 0;
    std::vector<DecisionTree> trees;

    /// Mean of leaf positive fractions. Throws if x has the wrong width.
    double predict_proba(std::span<const double> x) const;
};

/// Observes each node during fitting: weighted rows reaching it, the sampled
/// features, and the chosen split (feature -1 when the node became a leaf).
struct NodeTrace {
    std::vector<std::uint32_t> rows;
    std::vector<std::uint32_t> weights;
    std::vector<std::uint32_t> features;
    std::int32_t chosen_feature = -1;
    double chosen_threshold = 0;
};
using TraceHook = std::function<void(std::size_t tree, const NodeTrace&)>;

/// Candidate thresholds for a feature given its values at a node.
std::vector<double> candidate_thresholds(std::vector<double> values, std::uint32_t max_thresholds);

ForestModel fit(const Dataset& data, const ForestParams& params, ModelVariant variant = ModelVariant::Full,
                const TraceHook& trace = nullptr);
std::vector<double> predict_dataset(const ForestModel& model, const Dataset& data);

void write_model(std::ostream& out, const ForestModel& m);
ForestModel read_model(std::istream& in);

struct SearchGrid {
    std::vector<std::uint32_t> max_features{3, 5, 7};
    std::vector<std::uint32_t> min_samples_split{50, 100, 200};
};

struct SearchOptions {
    std::uint32_t folds = 4;
    std::uint32_t search_trees = 30;
    std::uint64_t seed = 1;
};

struct SearchResult {
    ForestParams best;
    /// (params, mean CV AUC, round) for every evaluation, in order.
    struct Entry {
        ForestParams params;
        double cv_auc = 0;
        std::uint32_t round = 0;
    };
    std::vector<Entry> log;
};

SearchResult halving_search(const Dataset& train, const SearchGrid& grid, const ForestParams& base, const SearchOptions& opt,
                            ModelVariant variant = ModelVariant::Full);
/// Mean AUC over group folds; folds lacking a class are skipped.
double cross_val_auc(const Dataset& data, std::span<const std::uint32_t> folds, std::uint32_t k, const ForestParams& params,
                     ModelVariant variant);

}  // namespace ct
