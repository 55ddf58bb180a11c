#include "changetrace/forest.hpp"

#include "changetrace/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

namespace ct {

namespace {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::string_view kTxFeatureNames[kTxFeatureCount] = {"value_ratio", "out_index", "total_value",
                                                               "fee_per_byte", "version",   "segwit",
                                                               "locktime_nonzero", "input_count", "epoch"};

}  // namespace

std::string_view to_string(ModelVariant v) { return v == ModelVariant::Full ? "full" : "no_fingerprint"; }

std::size_t feature_count(ModelVariant v)
{
    return (v == ModelVariant::Full ? kHeuristicCount : kUniversalCount) + kTxFeatureCount;
}

std::vector<std::string> feature_names(ModelVariant v)
{
    std::vector<std::string> names;
    const std::size_t votes = v == ModelVariant::Full ? kHeuristicCount : kUniversalCount;
    for (std::size_t k = 0; k < votes; ++k) names.push_back("vote_" + std::string(to_string(static_cast<Heuristic>(k))));
    for (auto n : kTxFeatureNames) names.emplace_back(n);
    return names;
}

void encode_features(const FeatureRow& r, ModelVariant v, std::span<double> out)
{
    if (out.size() != feature_count(v)) throw Error("feature buffer has wrong width");
    const std::size_t votes = v == ModelVariant::Full ? kHeuristicCount : kUniversalCount;
    std::size_t i = 0;
    for (std::size_t k = 0; k < votes; ++k) out[i++] = r.votes[k];
    out[i++] = r.value_ratio;
    out[i++] = r.out_index;
    out[i++] = static_cast<double>(r.total_value);
    out[i++] = r.fee_per_byte;
    out[i++] = r.version;
    out[i++] = r.segwit;
    out[i++] = r.locktime_nonzero;
    out[i++] = r.input_count;
    out[i++] = r.epoch;
}

std::vector<FeatureRow> build_feature_rows(const VoteTable& votes, const ChainView& view, const ClusterAssignment& base,
                                           const GroundTruthSet* gt)
{
    std::vector<FeatureRow> rows;
    rows.reserve(2 * votes.tx_count());
    for (std::size_t i = 0; i < votes.tx_count(); ++i) {
        const auto p = votes.txs[i];
        const auto& tx = view.tx(p);
        const Satoshi total = output_value(tx);
        const auto change = gt ? gt->change_of(p) : std::nullopt;
        for (std::uint32_t o = 0; o < 2; ++o) {
            FeatureRow r;
            r.tx = p;
            r.output_index = o;
            r.label = change ? static_cast<int>(*change == o) : -1;
            r.group = base.input_root(tx, view);
            r.votes = votes.row(i, o);
            r.value_ratio = total > 0 ? static_cast<double>(tx.outputs[o].value) / static_cast<double>(total) : 0.0;
            r.out_index = o;
            r.total_value = total;
            r.fee_per_byte = static_cast<double>(fee(tx, view)) / static_cast<double>(tx.vsize);
            r.version = tx.version;
            r.segwit = tx.segwit;
            r.locktime_nonzero = tx.locktime > 0;
            r.input_count = static_cast<std::uint32_t>(tx.inputs.size());
            r.epoch = tx.block_height / kBlocksPerEpoch;
            rows.push_back(r);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------

void Dataset::add(std::span<const double> features, int label, std::uint32_t grp)
{
    if (cols == 0 && y.empty()) cols = features.size();
    if (features.size() != cols) throw Error("dataset row has wrong width");
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(static_cast<std::uint8_t>(label != 0));
    group.push_back(grp);
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const
{
    Dataset d;
    d.cols = cols;
    d.x.reserve(idx.size() * cols);
    for (auto i : idx) {
        auto r = row(i);
        d.x.insert(d.x.end(), r.begin(), r.end());
        d.y.push_back(y[i]);
        d.group.push_back(group[i]);
    }
    return d;
}

Dataset make_dataset(std::span<const FeatureRow> rows, ModelVariant v)
{
    Dataset d;
    d.cols = feature_count(v);
    std::vector<double> buf(d.cols);
    for (const auto& r : rows) {
        if (r.label < 0) continue;
        encode_features(r, v, buf);
        d.add(buf, r.label, r.group);
    }
    return d;
}

// ---------------------------------------------------------------------------

namespace {

/// Distinct groups with row counts, in a seeded random order.
std::vector<std::pair<std::uint32_t, std::size_t>> shuffled_groups(std::span<const std::uint32_t> groups, std::uint64_t seed)
{
    std::map<std::uint32_t, std::size_t> counts;
    for (auto g : groups) ++counts[g];
    std::vector<std::pair<std::uint32_t, std::size_t>> v(counts.begin(), counts.end());
    std::mt19937_64 rng(mix64(seed));
    std::shuffle(v.begin(), v.end(), rng);
    return v;
}

}  // namespace

std::vector<bool> grouped_split(std::span<const std::uint32_t> groups, double test_fraction, std::uint64_t seed)
{
    if (groups.empty()) throw Error("cannot split an empty row set");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("test fraction must lie in (0,1)");
    auto order = shuffled_groups(groups, seed);
    if (order.size() < 2) throw Error("cannot split a single group");

    const double n = static_cast<double>(groups.size());
    const double target = test_fraction * n;
    const double slack = 0.05 * n;
    std::size_t test_rows = 0;
    std::vector<std::uint32_t> test_groups;
    for (const auto& [g, c] : order) {
        if (static_cast<double>(test_rows) >= target) break;
        if (static_cast<double>(test_rows + c) <= target + slack) {
            test_groups.push_back(g);
            test_rows += c;
        }
    }
    if (test_groups.empty()) {
        auto smallest = std::min_element(order.begin(), order.end(), [](auto& a, auto& b) { return a.second < b.second; });
        test_groups.push_back(smallest->first);
    }
    std::sort(test_groups.begin(), test_groups.end());
    std::vector<bool> test(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) test[i] = std::binary_search(test_groups.begin(), test_groups.end(), groups[i]);
    return test;
}

std::vector<std::uint32_t> group_folds(std::span<const std::uint32_t> groups, std::uint32_t k, std::uint64_t seed)
{
    if (k < 2) throw Error("need at least two folds");
    auto order = shuffled_groups(groups, seed);
    std::stable_sort(order.begin(), order.end(), [](auto& a, auto& b) { return a.second > b.second; });
    std::vector<std::size_t> load(k, 0);
    std::map<std::uint32_t, std::uint32_t> fold_of;
    for (const auto& [g, c] : order) {
        const auto f = static_cast<std::uint32_t>(std::min_element(load.begin(), load.end()) - load.begin());
        fold_of[g] = f;
        load[f] += c;
    }
    std::vector<std::uint32_t> out(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) out[i] = fold_of[groups[i]];
    return out;
}

// ---------------------------------------------------------------------------

std::vector<double> candidate_thresholds(std::vector<double> values, std::uint32_t max_thresholds)
{
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const std::size_t m = values.size();
    std::vector<double> out;
    if (m < 2) return out;
    auto midpoint = [&](std::size_t k) {
        const double a = values[k - 1], b = values[k];
        const double mid = a + (b - a) / 2.0;
        return mid < b ? mid : a;
    };
    if (m - 1 <= max_thresholds) {
        for (std::size_t k = 1; k < m; ++k) out.push_back(midpoint(k));
    } else {
        for (std::uint32_t j = 0; j < max_thresholds; ++j) {
            std::size_t k = (static_cast<std::size_t>(j) + 1) * m / (static_cast<std::size_t>(max_thresholds) + 1);
            k = std::clamp<std::size_t>(k, 1, m - 1);
            const double t = midpoint(k);
            if (out.empty() || out.back() != t) out.push_back(t);
        }
    }
    return out;
}

namespace {

/// Weighted Gini impurity sum as an exact fraction num/den.
struct Impurity {
    __int128 num = 0;
    __int128 den = 1;

    static Impurity node(std::uint64_t p, std::uint64_t n)
    {
        return {static_cast<__int128>(p) * static_cast<__int128>(n - p), static_cast<__int128>(n)};
    }
    static Impurity split(std::uint64_t pl, std::uint64_t nl, std::uint64_t pr, std::uint64_t nr)
    {
        const __int128 a = static_cast<__int128>(pl) * static_cast<__int128>(nl - pl);
        const __int128 b = static_cast<__int128>(pr) * static_cast<__int128>(nr - pr);
        return {a * nr + b * nl, static_cast<__int128>(nl) * nr};
    }
    bool operator<(const Impurity& o) const { return num * o.den < o.num * den; }
    bool operator==(const Impurity& o) const { return num * o.den == o.num * den; }
};

class TreeBuilder {
public:
    TreeBuilder(const Dataset& d, const ForestParams& p, std::mt19937_64& rng, const TraceHook& trace, std::size_t tree_id)
        : d_(d), p_(p), rng_(rng), trace_(trace), tree_id_(tree_id)
    {
    }

    DecisionTree build(std::vector<std::uint32_t> rows, std::vector<std::uint32_t> weights)
    {
        DecisionTree t;
        grow(t, std::move(rows), std::move(weights));
        return t;
    }

private:
    std::uint32_t grow(DecisionTree& t, std::vector<std::uint32_t> rows, std::vector<std::uint32_t> weights)
    {
        const auto id = static_cast<std::uint32_t>(t.nodes.size());
        t.nodes.emplace_back();
        std::uint64_t n = 0, pos = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            n += weights[i];
            pos += weights[i] * d_.y[rows[i]];
        }
        t.nodes[id].positives = pos;
        t.nodes[id].total = n;

        NodeTrace tr;
        if (trace_) {
            tr.rows = rows;
            tr.weights = weights;
        }
        const bool stop = pos == 0 || pos == n || n < p_.min_samples_split;
        std::int32_t best_f = -1;
        double best_t = 0;
        if (!stop) {
            auto features = sample_features();
            if (trace_) tr.features = features;
            Impurity best = Impurity::node(pos, n);
            for (auto f : features) evaluate_feature(f, rows, weights, n, pos, best, best_f, best_t);
        }
        if (trace_) {
            tr.chosen_feature = best_f;
            tr.chosen_threshold = best_t;
            trace_(tree_id_, tr);
        }
        if (best_f < 0) return id;

        std::vector<std::uint32_t> lr, lw, rr, rw;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (d_.x[rows[i] * d_.cols + static_cast<std::size_t>(best_f)] <= best_t) {
                lr.push_back(rows[i]);
                lw.push_back(weights[i]);
            } else {
                rr.push_back(rows[i]);
                rw.push_back(weights[i]);
            }
        }
        rows.clear();
        rows.shrink_to_fit();
        weights.clear();
        weights.shrink_to_fit();
        const auto l = grow(t, std::move(lr), std::move(lw));
        const auto r = grow(t, std::move(rr), std::move(rw));
        auto& node = t.nodes[id];
        node.feature = best_f;
        node.threshold = best_t;
        node.left = l;
        node.right = r;
        return id;
    }

    std::vector<std::uint32_t> sample_features()
    {
        std::vector<std::uint32_t> all(d_.cols);
        std::iota(all.begin(), all.end(), 0u);
        const std::size_t k = std::min<std::size_t>(std::max<std::uint32_t>(1, p_.max_features), d_.cols);
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = std::uniform_int_distribution<std::size_t>(i, all.size() - 1)(rng_);
            std::swap(all[i], all[j]);
        }
        all.resize(k);
        return all;
    }

    void evaluate_feature(std::uint32_t f, const std::vector<std::uint32_t>& rows, const std::vector<std::uint32_t>& weights,
                          std::uint64_t n, std::uint64_t pos, Impurity& best, std::int32_t& best_f, double& best_t)
    {
        order_.resize(rows.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        auto value = [&](std::size_t i) { return d_.x[rows[i] * d_.cols + f]; };
        std::sort(order_.begin(), order_.end(), [&](auto a, auto b) { return value(a) < value(b); });
        values_.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) values_[i] = value(i);
        const auto thresholds = candidate_thresholds(values_, p_.max_thresholds);

        std::uint64_t nl = 0, pl = 0;
        std::size_t k = 0;
        for (double t : thresholds) {
            while (k < order_.size() && value(order_[k]) <= t) {
                nl += weights[order_[k]];
                pl += weights[order_[k]] * d_.y[rows[order_[k]]];
                ++k;
            }
            if (nl == 0 || nl == n) continue;
            const auto imp = Impurity::split(pl, nl, pos - pl, n - nl);
            const bool better = imp < best || (imp == best && best_f >= 0 &&
                                                (static_cast<std::int32_t>(f) < best_f ||
                                                 (static_cast<std::int32_t>(f) == best_f && t < best_t)));
            if (better) {
                best = imp;
                best_f = static_cast<std::int32_t>(f);
                best_t = t;
            }
        }
    }

    const Dataset& d_;
    const ForestParams& p_;
    std::mt19937_64& rng_;
    const TraceHook& trace_;
    std::size_t tree_id_;
    std::vector<std::size_t> order_;
    std::vector<double> values_;
};

}  // namespace

double DecisionTree::predict(std::span<const double> x) const
{
    std::uint32_t i = 0;
    while (!nodes[i].leaf()) i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    const auto& leaf = nodes[i];
    return leaf.total ? static_cast<double>(leaf.positives) / static_cast<double>(leaf.total) : 0.0;
}

double ForestModel::predict_proba(std::span<const double> x) const
{
    if (x.size() != features) throw Error("row has " + std::to_string(x.size()) + " features, model expects " + std::to_string(features));
    if (trees.empty()) throw Error("model has no trees");
    double s = 0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
}

ForestModel fit(const Dataset& data, const ForestParams& params, ModelVariant variant, const TraceHook& trace)
{
    const std::size_t n = data.rows();
    if (params.n_trees == 0) throw Error("forest needs at least one tree");
    if (n == 0 || n < params.min_samples_split) throw Error("too few training rows for min_samples_split");
    const auto positives = std::count(data.y.begin(), data.y.end(), 1);
    if (positives == 0 || static_cast<std::size_t>(positives) == n) throw Error("training data contains a single class");

    ForestModel m;
    m.params = params;
    m.variant = variant;
    m.features = static_cast<std::uint32_t>(data.cols);
    m.trees.resize(params.n_trees);
    auto train_tree = [&](std::size_t t) {
        std::mt19937_64 rng(mix64(params.seed ^ mix64(t + 1)));
        std::vector<std::uint32_t> rows, weights;
        if (params.bootstrap) {
            std::vector<std::uint32_t> counts(n, 0);
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (std::size_t i = 0; i < n; ++i) ++counts[pick(rng)];
            for (std::size_t i = 0; i < n; ++i)
                if (counts[i]) {
                    rows.push_back(static_cast<std::uint32_t>(i));
                    weights.push_back(counts[i]);
                }
        } else {
            rows.resize(n);
            std::iota(rows.begin(), rows.end(), 0u);
            weights.assign(n, 1);
        }
        TreeBuilder b(data, params, rng, trace, t);
        m.trees[t] = b.build(std::move(rows), std::move(weights));
    };
    if (trace) {
        for (std::size_t t = 0; t < params.n_trees; ++t) train_tree(t);
    } else {
        parallel_for(params.n_trees, train_tree, 1);
    }
    return m;
}

std::vector<double> predict_dataset(const ForestModel& model, const Dataset& data)
{
    std::vector<double> out(data.rows());
    parallel_for(data.rows(), [&](std::size_t i) { out[i] = model.predict_proba(data.row(i)); });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kModelMagic[4] = {'C', 'T', 'R', 'F'};
constexpr std::uint32_t kModelVersion = 1;

template <class T>
void put(std::ostream& out, T v)
{
    std::uint64_t u;
    if constexpr (std::is_same_v<T, double>) u = std::bit_cast<std::uint64_t>(v);
    else u = static_cast<std::uint64_t>(v);
    constexpr std::size_t size = std::is_same_v<T, double> ? 8 : sizeof(T);
    unsigned char buf[size];
    for (std::size_t i = 0; i < size; ++i) buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), size);
}

template <class T>
T get(std::istream& in)
{
    constexpr std::size_t size = std::is_same_v<T, double> ? 8 : sizeof(T);
    unsigned char buf[size];
    if (!in.read(reinterpret_cast<char*>(buf), size)) throw Error("truncated model file");
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < size; ++i) u |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if constexpr (std::is_same_v<T, double>) return std::bit_cast<double>(u);
    else return static_cast<T>(u);
}

}  // namespace

void write_model(std::ostream& out, const ForestModel& m)
{
    out.write(kModelMagic, sizeof kModelMagic);
    put<std::uint32_t>(out, kModelVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(m.variant));
    put<std::uint32_t>(out, m.params.n_trees);
    put<std::uint32_t>(out, m.params.max_features);
    put<std::uint32_t>(out, m.params.min_samples_split);
    put<std::uint64_t>(out, m.params.seed);
    put<std::uint8_t>(out, m.params.bootstrap);
    put<std::uint32_t>(out, m.params.max_thresholds);
    put<std::uint32_t>(out, m.features);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.trees.size()));
    for (const auto& t : m.trees) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.nodes.size()));
        for (const auto& nd : t.nodes) {
            put<std::int32_t>(out, nd.feature);
            put<double>(out, nd.threshold);
            put<std::uint32_t>(out, nd.left);
            put<std::uint32_t>(out, nd.right);
            put<std::uint64_t>(out, nd.positives);
            put<std::uint64_t>(out, nd.total);
        }
    }
}

ForestModel read_model(std::istream& in)
{
    char magic[4];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0) throw Error("not a forest model file");
    if (get<std::uint32_t>(in) != kModelVersion) throw Error("unsupported model file version");
    ForestModel m;
    const auto variant = get<std::uint8_t>(in);
    if (variant > 1) throw Error("unknown model variant");
    m.variant = static_cast<ModelVariant>(variant);
    m.params.n_trees = get<std::uint32_t>(in);
    m.params.max_features = get<std::uint32_t>(in);
    m.params.min_samples_split = get<std::uint32_t>(in);
    m.params.seed = get<std::uint64_t>(in);
    m.params.bootstrap = get<std::uint8_t>(in) != 0;
    m.params.max_thresholds = get<std::uint32_t>(in);
    m.features = get<std::uint32_t>(in);
    if (m.features != feature_count(m.variant)) throw Error("model feature count does not match its variant");
    m.trees.resize(get<std::uint32_t>(in));
    for (auto& t : m.trees) {
        t.nodes.resize(get<std::uint32_t>(in));
        if (t.nodes.empty()) throw Error("model contains an empty tree");
        for (auto& nd : t.nodes) {
            nd.feature = get<std::int32_t>(in);
            nd.threshold = get<double>(in);
            nd.left = get<std::uint32_t>(in);
            nd.right = get<std::uint32_t>(in);
            nd.positives = get<std::uint64_t>(in);
            nd.total = get<std::uint64_t>(in);
        }
        for (const auto& nd : t.nodes) {
            if (nd.leaf()) continue;
            if (static_cast<std::uint32_t>(nd.feature) >= m.features || nd.left >= t.nodes.size() || nd.right >= t.nodes.size() ||
                !std::isfinite(nd.threshold))
                throw Error("model contains a malformed node");
        }
    }
    return m;
}

// ---------------------------------------------------------------------------

double cross_val_auc(const Dataset& data, std::span<const std::uint32_t> folds, std::uint32_t k, const ForestParams& params,
                     ModelVariant variant)
{
    double sum = 0;
    std::uint32_t used = 0;
    for (std::uint32_t f = 0; f < k; ++f) {
        std::vector<std::size_t> tr, te;
        for (std::size_t i = 0; i < data.rows(); ++i) (folds[i] == f ? te : tr).push_back(i);
        const auto train = data.subset(tr);
        const auto test = data.subset(te);
        auto has_both = [](const Dataset& d) {
            const auto p = std::count(d.y.begin(), d.y.end(), 1);
            return p > 0 && static_cast<std::size_t>(p) < d.rows();
        };
        if (!has_both(train) || !has_both(test) || train.rows() < params.min_samples_split) continue;
        const auto model = fit(train, params, variant);
        const auto scores = predict_dataset(model, test);
        std::vector<int> labels(test.y.begin(), test.y.end());
        sum += roc_auc(scores, labels).auc;
        ++used;
    }
    return used ? sum / used : 0.0;
}

SearchResult halving_search(const Dataset& train, const SearchGrid& grid, const ForestParams& base, const SearchOptions& opt,
                            ModelVariant variant)
{
    std::vector<ForestParams> configs;
    for (auto mf : grid.max_features)
        for (auto ms : grid.min_samples_split) {
            auto p = base;
            p.max_features = mf;
            p.min_samples_split = ms;
            configs.push_back(p);
        }
    if (configs.empty()) throw Error("parameter grid is empty");
    SearchResult result;
    if (configs.size() == 1) {
        result.best = configs.front();
        return result;
    }

    std::uint32_t rounds = 0;
    while ((std::size_t{1} << rounds) < configs.size()) ++rounds;
    const auto groups = shuffled_groups(train.group, opt.seed);

    std::vector<std::size_t> alive(configs.size());
    std::iota(alive.begin(), alive.end(), std::size_t{0});
    for (std::uint32_t round = 0; alive.size() > 1; ++round) {
        // Data budget doubles each round and reaches the full set in the last one.
        const double fraction = std::ldexp(1.0, static_cast<int>(round) - static_cast<int>(rounds - 1));
        const auto budget = static_cast<std::size_t>(std::ceil(std::min(1.0, fraction) * static_cast<double>(train.rows())));
        std::vector<std::uint32_t> chosen;
        std::size_t rows = 0;
        for (const auto& [g, c] : groups) {
            if (rows >= budget) break;
            chosen.push_back(g);
            rows += c;
        }
        std::sort(chosen.begin(), chosen.end());
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < train.rows(); ++i)
            if (std::binary_search(chosen.begin(), chosen.end(), train.group[i])) idx.push_back(i);
        const auto subset = train.subset(idx);
        const auto folds = group_folds(subset.group, opt.folds, opt.seed + round);

        std::vector<std::pair<double, std::size_t>> scored;
        for (auto c : alive) {
            auto p = configs[c];
            p.n_trees = std::min(p.n_trees, opt.search_trees);
            const double auc = cross_val_auc(subset, folds, opt.folds, p, variant);
            result.log.push_back({configs[c], auc, round});
            scored.emplace_back(auc, c);
        }
        std::stable_sort(scored.begin(), scored.end(), [](auto& a, auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        scored.resize((scored.size() + 1) / 2);
        alive.clear();
        for (auto& s : scored) alive.push_back(s.second);
    }
    result.best = configs[alive.front()];
    return result;
}

}  // namespace ct
