#include "changetrace/pipeline.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

namespace ct {

namespace {

bool has_vote(const VoteRow& r)
{
    return std::any_of(r.begin(), r.end(), [](std::int8_t v) { return v != 0; });
}

bool has_universal_vote(const VoteRow& r)
{
    for (std::size_t k = 0; k < kUniversalCount; ++k)
        if (r[k] != 0) return true;
    return false;
}

nlohmann::ordered_json params_json(const ForestParams& p)
{
    return {{"n_trees", p.n_trees},
            {"max_features", p.max_features},
            {"min_samples_split", p.min_samples_split},
            {"seed", p.seed},
            {"bootstrap", p.bootstrap},
            {"max_thresholds", p.max_thresholds}};
}

nlohmann::ordered_json point_json(const RocPoint& p)
{
    return {{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", p.threshold}};
}

nlohmann::ordered_json search_json(const SearchResult& s)
{
    auto log = nlohmann::ordered_json::array();
    for (const auto& e : s.log)
        log.push_back({{"round", e.round},
                       {"max_features", e.params.max_features},
                       {"min_samples_split", e.params.min_samples_split},
                       {"cv_auc", e.cv_auc}});
    return {{"best", params_json(s.best)}, {"log", log}};
}

}  // namespace

bool split_is_grouped(std::span<const std::uint32_t> groups, const std::vector<bool>& test)
{
    std::unordered_map<std::uint32_t, bool> side;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto [it, fresh] = side.emplace(groups[i], test[i]);
        if (!fresh && it->second != test[i]) return false;
    }
    return true;
}

TrainedModels train_models(const ChainView& view, const ClusterAssignment& base, const GroundTruthSet& gt, const TrainOptions& opt)
{
    if (gt.empty()) throw Error("cannot train on an empty ground truth");
    std::vector<TxPos> txs;
    txs.reserve(gt.size());
    for (const auto& e : gt.entries) txs.push_back(e.tx);
    const auto votes = build_vote_table(txs, view, all_heuristics(), opt.rule);
    const auto rows = build_feature_rows(votes, view, base, &gt);

    std::vector<std::uint32_t> groups;
    groups.reserve(rows.size());
    for (const auto& r : rows) groups.push_back(r.group);
    const auto test = grouped_split(groups, opt.test_fraction, opt.split_seed);

    TrainedModels out;
    auto& rep = out.report;
    rep.groups_disjoint = split_is_grouped(groups, test);
    if (!rep.groups_disjoint) throw Error("grouped split placed one base cluster on both sides");

    // Rows come in (output 0, output 1) pairs per transaction.
    std::vector<FeatureRow> train, train_reduced, held_out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (test[i]) {
            held_out.push_back(rows[i]);
            continue;
        }
        train.push_back(rows[i]);
        const auto& pair_row = rows[i ^ 1];
        if (has_universal_vote(rows[i].votes) || has_universal_vote(pair_row.votes)) train_reduced.push_back(rows[i]);
    }
    rep.train_rows = train.size();
    rep.test_rows = held_out.size();
    rep.reduced_train_rows = train_reduced.size();

    const auto full_data = make_dataset(train, ModelVariant::Full);
    const auto reduced_data = make_dataset(train_reduced, ModelVariant::NoFingerprint);

    rep.full_params = opt.full;
    rep.reduced_params = opt.reduced;
    if (opt.search) {
        rep.full_search = halving_search(full_data, opt.grid, opt.full, opt.search_options, ModelVariant::Full);
        rep.reduced_search = halving_search(reduced_data, opt.grid, opt.reduced, opt.search_options, ModelVariant::NoFingerprint);
        rep.full_params = rep.full_search->best;
        rep.reduced_params = rep.reduced_search->best;
    }
    out.full = fit(full_data, rep.full_params, ModelVariant::Full);
    out.reduced = fit(reduced_data, rep.reduced_params, ModelVariant::NoFingerprint);

    // Held-out comparison on transactions the vote classifier can score.
    std::vector<double> forest_scores, vote_scores;
    std::vector<int> labels;
    std::vector<double> x(feature_count(ModelVariant::Full));
    for (std::size_t i = 0; i + 1 < held_out.size(); i += 2) {
        const auto& a = held_out[i];
        const auto& b = held_out[i + 1];
        if (!has_vote(a.votes) && !has_vote(b.votes)) continue;
        const int sa = positive_votes(a.votes), sb = positive_votes(b.votes);
        for (const auto* r : {&a, &b}) {
            encode_features(*r, ModelVariant::Full, x);
            forest_scores.push_back(out.full.predict_proba(x));
            labels.push_back(r->label);
        }
        vote_scores.push_back(sa - sb);
        vote_scores.push_back(sb - sa);
    }
    rep.scored_test_rows = labels.size();
    rep.forest_roc = roc_auc(forest_scores, labels);
    rep.vote_roc = roc_auc(vote_scores, labels);
    rep.vote_low_fpr = rep.vote_roc.best_at_fpr(kLowFpr);
    rep.forest_low_fpr = rep.forest_roc.best_at_fpr(rep.vote_low_fpr.fpr);
    return out;
}

void write_train_report(std::ostream& out, const TrainReport& r)
{
    nlohmann::ordered_json j;
    j["train_rows"] = r.train_rows;
    j["test_rows"] = r.test_rows;
    j["reduced_train_rows"] = r.reduced_train_rows;
    j["scored_test_rows"] = r.scored_test_rows;
    j["groups_disjoint"] = r.groups_disjoint;
    j["forest_auc"] = r.forest_roc.auc;
    j["vote_auc"] = r.vote_roc.auc;
    j["vote_low_fpr"] = point_json(r.vote_low_fpr);
    j["forest_low_fpr"] = point_json(r.forest_low_fpr);
    j["full_params"] = params_json(r.full_params);
    j["reduced_params"] = params_json(r.reduced_params);
    if (r.full_search) j["full_search"] = search_json(*r.full_search);
    if (r.reduced_search) j["reduced_search"] = search_json(*r.reduced_search);
    out << j.dump(2) << '\n';
}

}  // namespace ct
