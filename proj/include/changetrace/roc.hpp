#pragma once

// ROC curves over scored outputs and the threshold-vote classifier.

#include "changetrace/ground_truth.hpp"
#include "changetrace/heuristics.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace ct {

struct RocPoint {
    double fpr = 0;
    double tpr = 0;
    /// Rows scoring at least this value are predicted positive.
    double threshold = 0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) to (1,1)
    double auc = 0;

    /// Highest TPR among points with fpr <= max_fpr; the point itself.
    RocPoint best_at_fpr(double max_fpr) const;
};

/// Equal scores form a single step. Throws unless both classes occur.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);
double trapezoid_auc(std::span<const RocPoint> points);

int positive_votes(const VoteRow& row);
/// Output with at least t more positive votes than the other, if any.
std::optional<std::uint32_t> threshold_vote(const VoteRow& out0, const VoteRow& out1, int t);

struct ScoredOutputs {
    std::vector<double> scores;
    std::vector<int> labels;
};

/// Per-output margins s_i - s_other for vote-table transactions that are in
/// the ground truth and have at least one vote.
ScoredOutputs vote_margins(const GroundTruthSet& gt, const VoteTable& votes);
RocCurve roc_threshold_vote(const GroundTruthSet& gt, const VoteTable& votes);

void write_roc_csv(std::ostream& out, const RocCurve& curve);

}  // namespace ct
