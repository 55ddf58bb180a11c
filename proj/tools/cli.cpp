#include "cli.hpp"

#include "manifest.hpp"

#include "changetrace/analytics.hpp"
#include "changetrace/enhance.hpp"
#include "changetrace/parallel.hpp"
#include "changetrace/pipeline.hpp"
#include "changetrace/synth.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace ct::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// File helpers

std::ifstream open_in(const fs::path& p, std::ios::openmode mode = std::ios::in)
{
    std::ifstream in(p, mode);
    if (!in) throw Error("cannot open " + p.string());
    return in;
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, mode | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

void close_checked(std::ofstream& out, const fs::path& p)
{
    out.close();
    if (!out) throw Error("failed writing " + p.string());
}

template <class Writer>
void write_file(RunManifest& m, const fs::path& p, Writer&& w, std::ios::openmode mode = std::ios::out)
{
    auto out = open_out(p, mode);
    w(out);
    close_checked(out, p);
    m.output(p);
}

fs::path manifest_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

ChainView load_view(RunManifest& m, const fs::path& p)
{
    m.input(p);
    return m.timed("load_corpus", [&] {
        auto in = open_in(p);
        return parse_corpus(in);
    });
}

ClusterAssignment load_clusters(RunManifest& m, const fs::path& p, const ChainView& view)
{
    m.input(p);
    auto in = open_in(p);
    return read_clusters(in, view);
}

GroundTruthSet load_ground_truth(RunManifest& m, const fs::path& p, const ChainView& view)
{
    m.input(p);
    auto in = open_in(p);
    return read_ground_truth(in, view);
}

TagSet load_tags(RunManifest& m, const std::string& p)
{
    if (p.empty()) return {};
    m.input(p);
    auto in = open_in(p);
    return parse_tags(in);
}

ForestModel load_model(RunManifest& m, const fs::path& p)
{
    m.input(p);
    auto in = open_in(p, std::ios::binary);
    return read_model(in);
}

/// Every long option of a subcommand with its effective value, defaults included.
ojson options_json(const CLI::App* app)
{
    ojson j = ojson::object();
    for (const CLI::Option* opt : app->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const auto& name = opt->get_lnames().front();
        if (name == "help") continue;
        if (opt->get_expected_min() == 0) {
            j[name] = opt->count() > 0;
            continue;
        }
        if (opt->count() > 0) {
            const auto res = opt->reduced_results();
            j[name] = res.size() == 1 ? ojson(res.front()) : ojson(res);
        } else {
            const auto& d = opt->get_default_str();
            j[name] = d.empty() ? ojson(nullptr) : ojson(d);
        }
    }
    return j;
}

void add_coinjoin_options(CLI::App* sub, CoinJoinRule& rule)
{
    sub->add_option("--coinjoin-min-inputs", rule.min_inputs, "CoinJoin rule: minimum input count");
    sub->add_option("--coinjoin-min-outputs", rule.min_outputs, "CoinJoin rule: minimum output count");
    sub->add_option("--coinjoin-min-equal", rule.min_equal_outputs, "CoinJoin rule: minimum equal-value outputs");
}

void add_threshold_options(CLI::App* sub, Thresholds& t)
{
    sub->add_option("--p-change", t.p_change, "Probability above which an output is treated as change");
    sub->add_option("--p-spend", t.p_spend, "Probability at or below which an output is treated as a spend");
}

TagCategory category_arg(const std::string& s)
{
    try {
        return parse_tag_category(s);
    } catch (const Error&) {
        throw CLI::ValidationError("category", "unknown tag category " + s);
    }
}

/// Change calls from either a calls file or a prediction file (probability present).
std::vector<ChangeCall> load_calls(RunManifest& m, const fs::path& p, const ChainView& view, const Thresholds& t)
{
    m.input(p);
    bool has_probability = false;
    {
        auto in = open_in(p);
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            has_probability = line.find("\"probability\"") != std::string::npos;
            break;
        }
    }
    auto in = open_in(p);
    if (!has_probability) return read_change_calls(in, view);
    const auto preds = read_predictions(in, view, t);
    std::vector<ChangeCall> calls;
    for (const auto& it : preds.items) {
        const bool a = it.probability[0] > t.p_change, b = it.probability[1] > t.p_change;
        if (a != b) calls.push_back({it.tx, a ? 0u : 1u});
    }
    return calls;
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenerateArgs {
    std::string config;
    std::uint64_t seed = 42;
    std::string out_dir;
    std::uint32_t days = 0;
};

void cmd_generate(const GenerateArgs& a, RunManifest& m)
{
    SynthConfig cfg = default_synth_config();
    if (!a.config.empty()) {
        m.input(a.config);
        auto in = open_in(a.config);
        cfg = load_synth_config(in);
    }
    if (a.days > 0) cfg.days = a.days;
    m.set_seed(a.seed);
    const auto corpus = m.timed("generate", [&] { return generate(cfg, a.seed); });
    const fs::path dir = a.out_dir;
    write_file(m, dir / "corpus.jsonl", [&](std::ostream& o) { write_corpus(o, corpus.header, corpus.records); });
    write_file(m, dir / "labels.jsonl", [&](std::ostream& o) { write_labels(o, corpus.labels); });
    write_file(m, dir / "tags.jsonl", [&](std::ostream& o) { write_tags(o, corpus.tags); });
    write_file(m, dir / "config.json", [&](std::ostream& o) { o << synth_config_to_json(cfg).dump(2) << '\n'; });
}

struct ClusterArgs {
    std::string corpus, out, summary;
    CoinJoinRule rule;
};

void cmd_cluster_base(const ClusterArgs& a, RunManifest& m)
{
    const auto view = load_view(m, a.corpus);
    const auto c = m.timed("cluster", [&] { return multi_input_clustering(view, a.rule); });
    write_file(m, a.out, [&](std::ostream& o) { write_clusters(o, c, view); });
    if (!a.summary.empty()) write_file(m, a.summary, [&](std::ostream& o) { write_cluster_summary(o, c, view); });
}

struct ExtractArgs {
    std::string corpus, clusters, tags, blocklist, out, report;
    GroundTruthOptions opt;
};

void cmd_extract_gt(ExtractArgs a, RunManifest& m)
{
    const auto view = load_view(m, a.corpus);
    const auto base = load_clusters(m, a.clusters, view);
    const auto tags = load_tags(m, a.tags);
    if (!a.blocklist.empty()) {
        m.input(a.blocklist);
        auto in = open_in(a.blocklist);
        std::string line;
        while (std::getline(in, line)) {
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == '#') continue;
            const auto e = line.find_last_not_of(" \t\r");
            a.opt.blocklist.push_back(line.substr(b, e - b + 1));
        }
    }
    const auto gt = m.timed("extract", [&] { return extract_ground_truth(view, base, tags, a.opt); });
    write_file(m, a.out, [&](std::ostream& o) { write_ground_truth(o, gt, view); });
    const fs::path report = a.report.empty() ? fs::path(a.out + ".report.json") : fs::path(a.report);
    write_file(m, report, [&](std::ostream& o) { write_filter_report(o, gt.report); });
}

struct EvalArgs {
    std::string corpus, clusters, ground_truth, out, votes;
    CoinJoinRule rule;
};

void cmd_eval_heuristics(const EvalArgs& a, RunManifest& m)
{
    const auto view = load_view(m, a.corpus);
    const auto base = load_clusters(m, a.clusters, view);
    const auto gt = load_ground_truth(m, a.ground_truth, view);
    const auto remaining = unknown_change_txs(view, base, a.rule);
    const auto scores = m.timed("evaluate", [&] { return evaluate_heuristics(gt, view, remaining, all_heuristics(), a.rule); });
    write_file(m, a.out, [&](std::ostream& o) { write_scores_csv(o, scores); });
    if (!a.votes.empty()) {
        std::vector<TxPos> txs;
        for (const auto& e : gt.entries) txs.push_back(e.tx);
        const auto table = m.timed("votes", [&] { return build_vote_table(txs, view, all_heuristics(), a.rule); });
        write_file(m, a.votes, [&](std::ostream& o) { write_vote_table(o, table, view); }, std::ios::binary);
    }
}

struct RocArgs {
    std::string corpus, ground_truth, votes, out;
    CoinJoinRule rule;
};

void cmd_vote_roc(const RocArgs& a, RunManifest& m)
{
    const auto view = load_view(m, a.corpus);
    const auto gt = load_ground_truth(m, a.ground_truth, view);
    VoteTable table;
    if (!a.votes.empty()) {
        m.input(a.votes);
        auto in = open_in(a.votes, std::ios::binary);
        table = read_vote_table(in, view);
    } else {
        std::vector<TxPos> txs;
        for (const auto& e : gt.entries) txs.push_back(e.tx);
        table = m.timed("votes", [&] { return build_vote_table(txs, view, all_heuristics(), a.rule); });
    }
    const auto curve = m.timed("roc", [&] { return roc_threshold_vote(gt, table); });
    write_file(m, a.out, [&](std::ostream& o) { write_roc_csv(o, curve); });
}

struct TrainArgs {
    std::string corpus, clusters, ground_truth, out_dir;
    TrainOptions opt;
    std::uint64_t seed = 1;
    std::uint32_t trees = 100;
};

void cmd_train(TrainArgs a, RunManifest& m)
{
    const auto view = load_view(m, a.corpus);
    const auto base = load_clusters(m, a.clusters, view);
    const auto gt = load_ground_truth(m, a.ground_truth, view);
    m.set_seed(a.seed);
    a.opt.full.seed = a.opt.reduced.seed = a.seed;
    a.opt.full.n_trees = a.opt.reduced.n_trees = a.trees;
    a.opt.reduced.max_thresholds = a.opt.full.max_thresholds;
    a.opt.search_options.seed = a.seed;
    const auto models = m.timed("train", [&] { return train_models(view, base, gt, a.opt); });
    const fs::path dir = a.out_dir;
    write_file(m, dir / "full.model", [&](std::ostream& o) { write_model(o, models.full); }, std::ios::binary);
    write_file(m, dir / "reduced.model", [&](std::ostream& o) { write_model(o, models.reduced); }, std::ios::binary);
    write_file(m, dir / "train_report.json", [&](std::ostream& o) { write_train_report(o, models.report); });
    write_file(m, dir / "roc_forest.csv", [&](std::ostream& o) { write_roc_csv(o, models.report.forest_roc); });
    write_file(m, dir / "roc_vote.csv", [&](std::ostream& o) { write_roc_csv(o, models.report.vote_roc); });
}

struct PredictArgs {
    std::string corpus, clusters, full_model, reduced_model, out;
    Thresholds thresholds;
    CoinJoinRule rule;
};

void cmd_predict(const PredictArgs& a, RunManifest& m)
{
    a.thresholds.validate();
    const auto view = load_view(m, a.corpus);
    const auto base = load_clusters(m, a.clusters, view);
    const auto full = load_model(m, a.full_model);
    const auto reduced = load_model(m, a.reduced_model);
    const auto preds = m.timed("predict", [&] { return predict_all(view, base, full, reduced, a.thresholds, a.rule); });
    write_file(m, a.out, [&](std::ostream& o) { write_predictions(o, preds, view); });
}

struct EnhanceArgs {
    std::string corpus, clusters, predictions, out, report, collapse_csv;
    bool naive = false, constrained = false;
    Thresholds thresholds;
};

void cmd_enhance(const EnhanceArgs& a, RunManifest& m)
{
    a.thresholds.validate();
    const auto view = load_view(m, a.corpus);
    const auto base = load_clusters(m, a.clusters, view);
    m.input(a.predictions);
    auto in = open_in(a.predictions);
    const auto preds = read_predictions(in, view, a.thresholds);
    const auto result = m.timed("enhance", [&] { return a.naive ? naive_enhance(view, base, preds) : constrained_enhance(view, base, preds); });
    write_file(m, a.out, [&](std::ostream& o) { write_clusters(o, result.clusters, view); });
    const auto report = m.timed("report", [&] { return collapse_report(base, result.clusters, view, result.stats); });
    const fs::path rp = a.report.empty() ? fs::path(a.out + ".report.json") : fs::path(a.report);
    write_file(m, rp, [&](std::ostream& o) { write_collapse_report(o, report, view); });
    if (!a.collapse_csv.empty()) write_file(m, a.collapse_csv, [&](std::ostream& o) { write_collapse_csv(o, report, view); });
}

struct FlowArgs {
    std::string corpus, tags, before, after, source = "darknet", dest = "exchange", out;
    CoinJoinRule rule;
};

void cmd_flows(const FlowArgs& a, RunManifest& m)
{
    const auto src = category_arg(a.source), dst = category_arg(a.dest);
    const auto view = load_view(m, a.corpus);
    const auto tags = load_tags(m, a.tags);
    const auto before = load_clusters(m, a.before, view);
    const auto after = a.after.empty() ? before : load_clusters(m, a.after, view);
    const auto rows = m.timed("flows", [&] { return flow_table(view, before, after, tags, src, dst, a.rule); });
    write_file(m, a.out, [&](std::ostream& o) { write_flow_csv(o, rows); });
}

struct VelocityArgs {
    std::string corpus, clusters, out;
    std::int64_t bucket = 86400;
};

void cmd_velocity(const VelocityArgs& a, RunManifest& m)
{
    if (a.bucket <= 0) throw CLI::ValidationError("--bucket-seconds", "must be positive");
    const auto view = load_view(m, a.corpus);
    const auto c = load_clusters(m, a.clusters, view);
    const auto series = m.timed("velocity", [&] { return velocity(view, c, a.bucket); });
    write_file(m, a.out, [&](std::ostream& o) { write_velocity_csv(o, series); });
}

struct MeiklejohnArgs {
    std::string corpus, clusters, variant = "local", out, clusters_out;
    CoinJoinRule rule;
};

void cmd_meiklejohn(const MeiklejohnArgs& a, RunManifest& m)
{
    const auto v = a.variant == "global" ? MeiklejohnVariant::Global : MeiklejohnVariant::Local;
    const auto view = load_view(m, a.corpus);
    const auto base = load_clusters(m, a.clusters, view);
    const auto txs = unknown_change_txs(view, base, a.rule);
    const auto picks = m.timed("predict", [&] { return meiklejohn_predict(view, txs, v); });
    std::vector<ChangeCall> calls;
    std::vector<std::pair<TxPos, std::uint32_t>> edges;
    for (std::size_t i = 0; i < txs.size(); ++i)
        if (picks[i]) {
            calls.push_back({txs[i], *picks[i]});
            edges.emplace_back(txs[i], *picks[i]);
        }
    write_file(m, a.out, [&](std::ostream& o) { write_change_calls(o, calls, view); });
    if (!a.clusters_out.empty()) {
        const auto merged = m.timed("merge", [&] { return merge_change_calls(view, base, edges); });
        write_file(m, a.clusters_out, [&](std::ostream& o) { write_clusters(o, merged, view); });
    }
}

struct CompareArgs {
    std::string corpus, base, ours, theirs, ours_calls, theirs_calls, prices, out;
    CompareOptions opt;
    Thresholds thresholds;
    CoinJoinRule rule;
};

void cmd_compare(const CompareArgs& a, RunManifest& m)
{
    const auto view = load_view(m, a.corpus);
    const auto base = load_clusters(m, a.base, view);
    const auto ours = load_clusters(m, a.ours, view);
    const auto theirs = load_clusters(m, a.theirs, view);
    const auto oc = load_calls(m, a.ours_calls, view, a.thresholds);
    const auto tc = load_calls(m, a.theirs_calls, view, a.thresholds);
    auto opt = a.opt;
    if (!a.prices.empty()) {
        m.input(a.prices);
        auto in = open_in(a.prices);
        opt.usd_per_btc = read_price_csv(in);
    }
    m.set_seed(opt.seed);
    const auto universe = unknown_change_txs(view, base, a.rule);
    const auto table = m.timed("compare", [&] { return compare_clusterings(ours, theirs, oc, tc, universe, view, opt); });
    write_file(m, a.out, [&](std::ostream& o) { write_comparison_csv(o, table); });
}

struct ValidateArgs {
    std::string corpus, predictions, labels, ground_truth, out;
    Thresholds thresholds;
};

void cmd_validate(const ValidateArgs& a, RunManifest& m)
{
    if (a.labels.empty() == a.ground_truth.empty()) throw CLI::ValidationError("validate", "give exactly one of --labels or --ground-truth");
    a.thresholds.validate();
    const auto view = load_view(m, a.corpus);

    // Label lookup: nullopt = unlabeled, optional<nullopt> = labeled without change.
    std::function<std::optional<std::optional<std::uint32_t>>(TxPos)> label_of;
    SimLabels labels;
    GroundTruthSet gt;
    if (!a.labels.empty()) {
        m.input(a.labels);
        auto in = open_in(a.labels);
        labels = read_labels(in);
        label_of = [&](TxPos p) -> std::optional<std::optional<std::uint32_t>> {
            const auto& id = view.tx(p).txid;
            if (!labels.has_tx(id)) return std::nullopt;
            return labels.change_of(id);
        };
    } else {
        gt = load_ground_truth(m, a.ground_truth, view);
        label_of = [&](TxPos p) -> std::optional<std::optional<std::uint32_t>> {
            if (auto c = gt.change_of(p)) return std::optional<std::uint32_t>(*c);
            return std::nullopt;
        };
    }

    m.input(a.predictions);
    auto in = open_in(a.predictions);
    struct Row {
        std::uint32_t output;
        std::optional<double> probability;
    };
    std::map<TxPos, std::vector<Row>> by_tx;
    std::size_t records = 0, unresolved = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++records;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            const auto txid = j.at("txid").get<std::string>();
            const auto out = j.at("output_index").get<std::uint32_t>();
            std::optional<double> prob;
            if (j.contains("probability")) prob = j.at("probability").get<double>();
            const auto p = view.find_tx(txid);
            if (!p || out >= view.tx(*p).outputs.size()) {
                ++unresolved;
                continue;
            }
            by_tx[*p].push_back({out, prob});
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(lineno, std::string("malformed prediction record: ") + e.what());
        }
    }

    std::size_t labeled = 0, called = 0, correct = 0, incorrect = 0;
    std::vector<double> scores;
    std::vector<int> truth;
    for (const auto& [p, rows] : by_tx) {
        const auto lab = label_of(p);
        std::optional<std::uint32_t> call;
        int above = 0;
        for (const auto& r : rows) {
            const bool hit = r.probability ? *r.probability > a.thresholds.p_change : true;
            if (hit) {
                ++above;
                call = r.output;
            }
        }
        if (above != 1) call.reset();
        if (!lab) continue;
        ++labeled;
        for (const auto& r : rows)
            if (r.probability) {
                scores.push_back(*r.probability);
                truth.push_back(*lab && **lab == r.output);
            }
        if (!call) continue;
        ++called;
        (*lab && **lab == *call) ? ++correct : ++incorrect;
    }
    bool both = false;
    for (std::size_t i = 1; i < truth.size() && !both; ++i) both = truth[i] != truth[0];

    write_file(m, a.out, [&](std::ostream& o) {
        char buf[64];
        o << "metric,value\n";
        o << "records," << records << '\n';
        o << "unresolved_records," << unresolved << '\n';
        o << "transactions," << by_tx.size() << '\n';
        o << "labeled_transactions," << labeled << '\n';
        o << "change_calls," << called << '\n';
        o << "correct," << correct << '\n';
        o << "incorrect," << incorrect << '\n';
        std::snprintf(buf, sizeof buf, "%.6f", called ? static_cast<double>(correct) / static_cast<double>(called) : 0.0);
        o << "precision," << buf << '\n';
        if (both) {
            std::snprintf(buf, sizeof buf, "%.6f", roc_auc(scores, truth).auc);
            o << "auc," << buf << '\n';
        }
    });
}

}  // namespace

int run(int argc, const char* const* argv)
{
    CLI::App app{"Change-output detection and address clustering toolkit", "changetrace"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads; 0 uses all cores");

    auto existing = CLI::ExistingFile;

    GenerateArgs gen;
    auto* s_gen = app.add_subcommand("generate", "Generate a labeled synthetic corpus");
    s_gen->add_option("--config", gen.config, "Generator config (JSON); built-in defaults otherwise")->check(existing);
    s_gen->add_option("--seed", gen.seed, "Generator seed");
    s_gen->add_option("--days", gen.days, "Override the simulated duration in days (0 keeps the config value)");
    s_gen->add_option("--out-dir", gen.out_dir, "Output directory")->required();

    ClusterArgs clu;
    auto* s_clu = app.add_subcommand("cluster-base", "Multi-input base clustering");
    s_clu->add_option("--corpus", clu.corpus)->required()->check(existing);
    s_clu->add_option("--out", clu.out, "Cluster file (JSONL)")->required();
    s_clu->add_option("--summary", clu.summary, "Per-cluster summary CSV");
    add_coinjoin_options(s_clu, clu.rule);

    ExtractArgs ext;
    auto* s_ext = app.add_subcommand("extract-gt", "Extract the ground-truth change set");
    s_ext->add_option("--corpus", ext.corpus)->required()->check(existing);
    s_ext->add_option("--clusters", ext.clusters, "Base cluster file")->required()->check(existing);
    s_ext->add_option("--tags", ext.tags, "Tag file")->check(existing);
    s_ext->add_option("--blocklist", ext.blocklist, "Addresses whose base clusters are dropped, one per line")->check(existing);
    s_ext->add_option("--two-candidate-threshold", ext.opt.two_candidate_threshold, "Per-cluster two-candidate rate limit")
        ->check(CLI::Range(0.0, 1.0));
    s_ext->add_option("--out", ext.out, "Ground-truth file (JSONL)")->required();
    s_ext->add_option("--report", ext.report, "Filter report (JSON); defaults to <out>.report.json");
    add_coinjoin_options(s_ext, ext.opt.coinjoin);

    EvalArgs ev;
    auto* s_ev = app.add_subcommand("eval-heuristics", "TPR, FPR and coverage of every heuristic");
    s_ev->add_option("--corpus", ev.corpus)->required()->check(existing);
    s_ev->add_option("--clusters", ev.clusters)->required()->check(existing);
    s_ev->add_option("--ground-truth", ev.ground_truth)->required()->check(existing);
    s_ev->add_option("--out", ev.out, "Scores CSV")->required();
    s_ev->add_option("--votes", ev.votes, "Also write the ground-truth vote table (binary)");
    add_coinjoin_options(s_ev, ev.rule);

    RocArgs roc;
    auto* s_roc = app.add_subcommand("vote-roc", "ROC of the threshold-vote classifier");
    s_roc->add_option("--corpus", roc.corpus)->required()->check(existing);
    s_roc->add_option("--ground-truth", roc.ground_truth)->required()->check(existing);
    s_roc->add_option("--votes", roc.votes, "Precomputed vote table")->check(existing);
    s_roc->add_option("--out", roc.out, "ROC CSV")->required();
    add_coinjoin_options(s_roc, roc.rule);

    TrainArgs tr;
    auto* s_tr = app.add_subcommand("train", "Train the full and no-fingerprint forests");
    s_tr->add_option("--corpus", tr.corpus)->required()->check(existing);
    s_tr->add_option("--clusters", tr.clusters)->required()->check(existing);
    s_tr->add_option("--ground-truth", tr.ground_truth)->required()->check(existing);
    s_tr->add_option("--out-dir", tr.out_dir)->required();
    s_tr->add_option("--seed", tr.seed, "Forest and search seed");
    s_tr->add_option("--split-seed", tr.opt.split_seed, "Train/test split seed");
    s_tr->add_option("--test-fraction", tr.opt.test_fraction)->check(CLI::Range(0.01, 0.99));
    s_tr->add_option("--trees", tr.trees, "Trees per forest")->check(CLI::PositiveNumber);
    s_tr->add_option("--full-max-features", tr.opt.full.max_features)->check(CLI::PositiveNumber);
    s_tr->add_option("--full-min-samples-split", tr.opt.full.min_samples_split)->check(CLI::PositiveNumber);
    s_tr->add_option("--reduced-max-features", tr.opt.reduced.max_features)->check(CLI::PositiveNumber);
    s_tr->add_option("--reduced-min-samples-split", tr.opt.reduced.min_samples_split)->check(CLI::PositiveNumber);
    s_tr->add_option("--max-thresholds", tr.opt.full.max_thresholds, "Candidate thresholds per feature")->check(CLI::PositiveNumber);
    s_tr->add_flag("--search", tr.opt.search, "Successive-halving search over the grid");
    s_tr->add_option("--grid-max-features", tr.opt.grid.max_features)->delimiter(',');
    s_tr->add_option("--grid-min-samples-split", tr.opt.grid.min_samples_split)->delimiter(',');
    s_tr->add_option("--folds", tr.opt.search_options.folds)->check(CLI::Range(2u, 20u));
    s_tr->add_option("--search-trees", tr.opt.search_options.search_trees)->check(CLI::PositiveNumber);
    add_coinjoin_options(s_tr, tr.opt.rule);

    PredictArgs pr;
    auto* s_pr = app.add_subcommand("predict", "Score unknown-change transactions");
    s_pr->add_option("--corpus", pr.corpus)->required()->check(existing);
    s_pr->add_option("--clusters", pr.clusters)->required()->check(existing);
    s_pr->add_option("--full-model", pr.full_model)->required()->check(existing);
    s_pr->add_option("--reduced-model", pr.reduced_model)->required()->check(existing);
    s_pr->add_option("--out", pr.out, "Prediction file (JSONL)")->required();
    add_threshold_options(s_pr, pr.thresholds);
    add_coinjoin_options(s_pr, pr.rule);

    EnhanceArgs en;
    auto* s_en = app.add_subcommand("enhance", "Merge predicted change into the base clustering");
    auto* mode = s_en->add_option_group("mode", "Merge strategy");
    mode->add_flag("--naive", en.naive, "Merge every confident change edge");
    mode->add_flag("--constrained", en.constrained, "Refuse merges contradicted by confident spends");
    mode->require_option(1);
    s_en->add_option("--corpus", en.corpus)->required()->check(existing);
    s_en->add_option("--clusters", en.clusters, "Base cluster file")->required()->check(existing);
    s_en->add_option("--predictions", en.predictions)->required()->check(existing);
    s_en->add_option("--out", en.out, "Enhanced cluster file")->required();
    s_en->add_option("--report", en.report, "Collapse report (JSON); defaults to <out>.report.json");
    s_en->add_option("--collapse-csv", en.collapse_csv, "Per-cluster collapse CSV");
    add_threshold_options(s_en, en.thresholds);

    auto* s_an = app.add_subcommand("analyze", "Downstream analyses");
    s_an->require_subcommand(1);

    FlowArgs fl;
    auto* s_fl = s_an->add_subcommand("flows", "Tagged flows before and after enhancement");
    s_fl->add_option("--corpus", fl.corpus)->required()->check(existing);
    s_fl->add_option("--tags", fl.tags)->required()->check(existing);
    s_fl->add_option("--before", fl.before, "Cluster file before")->required()->check(existing);
    s_fl->add_option("--after", fl.after, "Cluster file after (defaults to --before)")->check(existing);
    s_fl->add_option("--source", fl.source, "Sending category");
    s_fl->add_option("--dest", fl.dest, "Receiving category");
    s_fl->add_option("--out", fl.out)->required();
    add_coinjoin_options(s_fl, fl.rule);

    VelocityArgs ve;
    auto* s_ve = s_an->add_subcommand("velocity", "Value moved per time bucket");
    s_ve->add_option("--corpus", ve.corpus)->required()->check(existing);
    s_ve->add_option("--clusters", ve.clusters)->required()->check(existing);
    s_ve->add_option("--bucket-seconds", ve.bucket);
    s_ve->add_option("--out", ve.out)->required();

    MeiklejohnArgs mk;
    auto* s_mk = s_an->add_subcommand("meiklejohn", "Fresh-address change rule");
    s_mk->add_option("--corpus", mk.corpus)->required()->check(existing);
    s_mk->add_option("--clusters", mk.clusters, "Base cluster file")->required()->check(existing);
    s_mk->add_option("--variant", mk.variant)->check(CLI::IsMember({"local", "global"}));
    s_mk->add_option("--out", mk.out, "Change calls (JSONL)")->required();
    s_mk->add_option("--clusters-out", mk.clusters_out, "Clustering with the calls merged");
    add_coinjoin_options(s_mk, mk.rule);

    CompareArgs cm;
    auto* s_cm = s_an->add_subcommand("compare", "Compare two clusterings and their change calls");
    s_cm->add_option("--corpus", cm.corpus)->required()->check(existing);
    s_cm->add_option("--base", cm.base, "Base cluster file (defines the coverage universe)")->required()->check(existing);
    s_cm->add_option("--ours", cm.ours)->required()->check(existing);
    s_cm->add_option("--theirs", cm.theirs)->required()->check(existing);
    s_cm->add_option("--ours-calls", cm.ours_calls, "Change calls or predictions")->required()->check(existing);
    s_cm->add_option("--theirs-calls", cm.theirs_calls, "Change calls or predictions")->required()->check(existing);
    s_cm->add_option("--prices", cm.prices, "date,usd_per_btc CSV")->check(existing);
    s_cm->add_option("--sample-size", cm.opt.sample_size, "Address pairs sampled for large clusterings");
    s_cm->add_option("--seed", cm.opt.seed, "Pair sampling seed");
    s_cm->add_flag("--force-sampling", cm.opt.force_sampling, "Sample pairs even when exact counting is possible");
    s_cm->add_option("--out", cm.out)->required();
    add_threshold_options(s_cm, cm.thresholds);
    add_coinjoin_options(s_cm, cm.rule);

    ValidateArgs va;
    auto* s_va = app.add_subcommand("validate", "Score an external change-prediction file against labels");
    s_va->add_option("--corpus", va.corpus)->required()->check(existing);
    s_va->add_option("--predictions", va.predictions, "JSONL {txid, output_index[, probability]}")->required()->check(existing);
    s_va->add_option("--labels", va.labels, "Generator labels")->check(existing);
    s_va->add_option("--ground-truth", va.ground_truth)->check(existing);
    s_va->add_option("--out", va.out, "Metrics CSV")->required();
    add_threshold_options(s_va, va.thresholds);

    if (argc <= 1) {
        std::cerr << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    set_thread_count(threads);
    CLI::App* sub = app.get_subcommands().front();
    std::string name = sub->get_name();
    if (sub == s_an) {
        sub = s_an->get_subcommands().front();
        name += " " + sub->get_name();
    }
    RunManifest m(name);
    ojson opts = options_json(sub);
    opts["threads"] = threads;
    m.set_options(opts);

    try {
        fs::path manifest;
        if (sub == s_gen) {
            cmd_generate(gen, m);
            manifest = fs::path(gen.out_dir) / "manifest.json";
        } else if (sub == s_clu) {
            cmd_cluster_base(clu, m);
            manifest = manifest_for(clu.out);
        } else if (sub == s_ext) {
            cmd_extract_gt(ext, m);
            manifest = manifest_for(ext.out);
        } else if (sub == s_ev) {
            cmd_eval_heuristics(ev, m);
            manifest = manifest_for(ev.out);
        } else if (sub == s_roc) {
            cmd_vote_roc(roc, m);
            manifest = manifest_for(roc.out);
        } else if (sub == s_tr) {
            cmd_train(tr, m);
            manifest = fs::path(tr.out_dir) / "manifest.json";
        } else if (sub == s_pr) {
            cmd_predict(pr, m);
            manifest = manifest_for(pr.out);
        } else if (sub == s_en) {
            cmd_enhance(en, m);
            manifest = manifest_for(en.out);
        } else if (sub == s_fl) {
            cmd_flows(fl, m);
            manifest = manifest_for(fl.out);
        } else if (sub == s_ve) {
            cmd_velocity(ve, m);
            manifest = manifest_for(ve.out);
        } else if (sub == s_mk) {
            cmd_meiklejohn(mk, m);
            manifest = manifest_for(mk.out);
        } else if (sub == s_cm) {
            cmd_compare(cm, m);
            manifest = manifest_for(cm.out);
        } else if (sub == s_va) {
            cmd_validate(va, m);
            manifest = manifest_for(va.out);
        }
        m.write(manifest);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "changetrace: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "changetrace " << name << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace ct::cli
