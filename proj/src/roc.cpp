#include "changetrace/roc.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

namespace ct {

RocPoint RocCurve::best_at_fpr(double max_fpr) const
{
    RocPoint best;
    for (const auto& p : points)
        if (p.fpr <= max_fpr && p.tpr >= best.tpr) best = p;
    return best;
}

double trapezoid_auc(std::span<const RocPoint> points)
{
    double area = 0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
    return area;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels)
{
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    std::size_t pos = 0;
    for (int l : labels) pos += l != 0;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw Error("ROC needs at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    RocCurve c;
    c.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? tp : fp)++;
        c.points.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), s});
    }
    c.auc = trapezoid_auc(c.points);
    return c;
}

int positive_votes(const VoteRow& row)
{
    int s = 0;
    for (auto v : row) s += v > 0;
    return s;
}

std::optional<std::uint32_t> threshold_vote(const VoteRow& out0, const VoteRow& out1, int t)
{
    if (t < 1) throw Error("vote threshold must be at least 1");
    const int a = positive_votes(out0), b = positive_votes(out1);
    if (a - b >= t) return 0;
    if (b - a >= t) return 1;
    return std::nullopt;
}

ScoredOutputs vote_margins(const GroundTruthSet& gt, const VoteTable& votes)
{
    ScoredOutputs s;
    for (std::size_t i = 0; i < votes.tx_count(); ++i) {
        const auto change = gt.change_of(votes.txs[i]);
        if (!change || votes.no_votes(i)) continue;
        const int a = positive_votes(votes.row(i, 0)), b = positive_votes(votes.row(i, 1));
        s.scores.push_back(a - b);
        s.labels.push_back(*change == 0);
        s.scores.push_back(b - a);
        s.labels.push_back(*change == 1);
    }
    return s;
}

RocCurve roc_threshold_vote(const GroundTruthSet& gt, const VoteTable& votes)
{
    if (gt.empty()) throw Error("ground truth is empty");
    const auto s = vote_margins(gt, votes);
    return roc_auc(s.scores, s.labels);
}

void write_roc_csv(std::ostream& out, const RocCurve& curve)
{
    out << "threshold,fpr,tpr\n";
    char buf[160];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof buf, "%.10g,%.8f,%.8f", p.threshold, p.fpr, p.tpr);
        out << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "auc,%.8f", curve.auc);
    out << buf << '\n';
}

}  // namespace ct
