#include "scarcegrad/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "scarcegrad/errors.hpp"
#include "scarcegrad/neumann.hpp"
#include "scarcegrad/rng.hpp"

namespace scarcegrad {

namespace {

std::vector<int> iota_vec(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

// equal halves of a shuffled remainder; the first half takes any odd extra
void split_val_test(std::vector<int> remaining, Rng& rng, NodeSplit& split) {
    rng.shuffle(remaining);
    const std::size_t half = (remaining.size() + 1) / 2;
    split.val.assign(remaining.begin(), remaining.begin() + static_cast<long>(half));
    split.test.assign(remaining.begin() + static_cast<long>(half), remaining.end());
}

Tensor one_hot(const std::vector<int>& class_of, int c) {
    Tensor y(static_cast<Index>(class_of.size()), c);
    for (std::size_t i = 0; i < class_of.size(); ++i)
        y(static_cast<Index>(i), class_of[i]) = 1.0;
    return y;
}

std::vector<std::uint8_t> labelled_mask(int n, const NodeSplit& split) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
    for (int v : split.train) mask[static_cast<std::size_t>(v)] = 1;
    for (int v : split.outer) mask[static_cast<std::size_t>(v)] = 1;
    return mask;
}

// targets carry values only on labelled rows
Tensor masked_targets(const Tensor& labels_full, const std::vector<std::uint8_t>& mask) {
    Tensor y(labels_full.rows(), labels_full.cols());
    for (Index i = 0; i < labels_full.rows(); ++i)
        if (mask[static_cast<std::size_t>(i)])
            for (Index j = 0; j < labels_full.cols(); ++j) y(i, j) = labels_full(i, j);
    return y;
}

}  // namespace

Dataset gen_synthetic1(std::uint64_t seed, const Synthetic1Options& opts) {
    const int n = opts.n;
    constexpr int kMaxAttempts = 20;

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(attempt)));
        Tensor x = Tensor::random_uniform(n, 2, rng);

        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double dx = x(i, 0) - x(j, 0);
                const double dy = x(i, 1) - x(j, 1);
                if (std::sqrt(dx * dx + dy * dy) < opts.sigma) pairs.emplace_back(i, j);
            }
        }
        SupportPattern support = SupportPattern::from_pairs(n, std::move(pairs));
        if (connected_components(support).second != 1) continue;

        NodeSplit split;
        std::vector<int> order = iota_vec(n);
        if (opts.concentrated_vtr) {
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double da = std::hypot(x(a, 0) - 0.5, x(a, 1) - 0.5);
                const double db = std::hypot(x(b, 0) - 0.5, x(b, 1) - 0.5);
                return da != db ? da < db : a < b;
            });
        } else {
            rng.shuffle(order);
        }
        split.train.assign(order.begin(), order.begin() + opts.n_train);
        std::vector<int> rest(order.begin() + opts.n_train, order.end());
        rng.shuffle(rest);
        split.outer.assign(rest.begin(), rest.begin() + opts.n_outer);
        split_val_test({rest.begin() + opts.n_outer, rest.end()}, rng, split);
        split.validate(n);

        // Gaussian mixture labels on V_tr, scaled into [0, 1]
        DatasetMeta meta;
        for (auto& center : meta.centers) center = {rng.uniform(), rng.uniform()};
        auto mixture = [&](int i) {
            double g = 0.0;
            for (const auto& a : meta.centers) {
                const double d2 = (x(i, 0) - a[0]) * (x(i, 0) - a[0]) +
                                  (x(i, 1) - a[1]) * (x(i, 1) - a[1]);
                g += std::exp(-d2 / (2.0 * 0.2 * 0.2));
            }
            return g;
        };
        double g_max = 0.0;
        for (int v : split.train) g_max = std::max(g_max, mixture(v));
        const double zeta = 1.0 / g_max;

        Tensor y_seed(n, 1);
        for (int v : split.train) y_seed(v, 0) = zeta * mixture(v);

        // the true graph propagates the V_tr labels to every other node
        WeightedGraph a_star = WeightedGraph::unit(support);
        Tensor solved = closed_form_solve(a_star, y_seed, split.train, opts.lambda);
        Tensor labels_full = solved;
        for (int v : split.train) labels_full(v, 0) = y_seed(v, 0);

        // observed weights attenuate the true edges at random
        std::vector<double> xi(support.edge_count());
        for (double& w : xi) w = rng.uniform();
        WeightedGraph a_obs = WeightedGraph::with_weights(support, std::move(xi));

        Dataset ds;
        ds.x = std::move(x);
        ds.a_obs = std::move(a_obs);
        ds.a_star = std::move(a_star);
        ds.split = std::move(split);
        ds.task = TaskKind::regression;
        ds.n = n;
        ds.p = 2;
        ds.c = 1;
        ds.targets.mask = labelled_mask(n, ds.split);
        ds.targets.y_obs = masked_targets(labels_full, ds.targets.mask);
        ds.labels_full = std::move(labels_full);
        meta.name = "synthetic1";
        meta.seed = seed;
        meta.sigma = opts.sigma;
        meta.zeta = zeta;
        meta.attempts = attempt + 1;
        ds.meta = meta;
        return ds;
    }
    throw ContractError("gen_synthetic1: no connected graph after 20 attempts");
}

Dataset gen_cheaters(std::uint64_t seed) {
    const int n = 256;
    const int p = 10;
    const double sigma = 0.027;
    const double tau = 60.0;

    Rng rng(seed);
    Tensor x_raw = Tensor::random_uniform(n, p, rng);
    // order students by seating position (column 0)
    std::vector<int> order = iota_vec(n);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return x_raw(a, 0) < x_raw(b, 0); });
    Tensor x(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) x(i, j) = x_raw(order[static_cast<std::size_t>(i)], j);

    // dense ground-truth affinity; diagonal contributes the student's own work.
    // The sigma^2 bandwidth (rather than 2 sigma^2) is what actually delivers
    // the two published statistics at sigma = 0.027: an edge count near
    // n log n and a roughly balanced pass rate at the grade threshold.
    Matrix a_star_dense(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = x(i, 0) - x(j, 0);
            a_star_dense(i, j) = std::exp(-d * d / (sigma * sigma));
        }

    // observed edges: symmetric Bernoulli draws on the upper triangle
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < a_star_dense(i, j)) pairs.emplace_back(i, j);
    WeightedGraph a_obs = WeightedGraph::unit(SupportPattern::from_pairs(n, std::move(pairs)));

    // grades: capabilities of everyone you can copy from, weighted by affinity
    Eigen::VectorXd capability = x.mat().block(0, 1, n, 9).rowwise().sum();
    Eigen::VectorXd grades = a_star_dense * capability;

    std::vector<int> class_of(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) class_of[static_cast<std::size_t>(i)] = grades(i) > tau ? 1 : 0;

    NodeSplit split;
    for (int i = 0; i <= n / 8; ++i) split.train.push_back(i);
    for (int i = 7 * n / 8; i < n; ++i) split.train.push_back(i);
    for (int i = 3 * n / 8; i <= 5 * n / 8; ++i) split.outer.push_back(i);
    std::vector<int> remaining;
    {
        std::vector<char> used(static_cast<std::size_t>(n), 0);
        for (int v : split.train) used[static_cast<std::size_t>(v)] = 1;
        for (int v : split.outer) used[static_cast<std::size_t>(v)] = 1;
        for (int i = 0; i < n; ++i)
            if (!used[static_cast<std::size_t>(i)]) remaining.push_back(i);
    }
    split_val_test(std::move(remaining), rng, split);
    split.validate(n);

    // store the ground truth as a loop-free weighted graph
    std::vector<std::pair<int, int>> all_pairs;
    std::vector<double> all_weights;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            all_pairs.emplace_back(i, j);
            all_weights.push_back(a_star_dense(i, j));
        }

    Dataset ds;
    ds.x = std::move(x);
    ds.a_obs = std::move(a_obs);
    ds.a_star = WeightedGraph::with_weights(SupportPattern::from_pairs(n, std::move(all_pairs)),
                                            std::move(all_weights));
    ds.class_of = class_of;
    ds.labels_full = one_hot(class_of, 2);
    ds.split = std::move(split);
    ds.task = TaskKind::classification;
    ds.n = n;
    ds.p = p;
    ds.c = 2;
    ds.targets.mask = labelled_mask(n, ds.split);
    ds.targets.y_obs = masked_targets(ds.labels_full, ds.targets.mask);
    ds.meta.name = "cheaters";
    ds.meta.seed = seed;
    ds.meta.sigma = sigma;
    ds.meta.tau_grade = tau;
    return ds;
}

Dataset load_cora(const std::filesystem::path& content_path,
                  const std::filesystem::path& cites_path, std::uint64_t seed,
                  const CoraSplitSizes& sizes) {
    std::ifstream content(content_path);
    if (!content) throw ParseError("load_cora: cannot open " + content_path.string());

    std::vector<std::vector<double>> features;
    std::vector<std::string> labels;
    std::map<std::string, int> node_index;
    std::string line;
    long line_no = 0;
    while (std::getline(content, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<std::string> fields;
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        if (fields.size() < 3)
            throw ParseError("load_cora: expected id, features and label", line_no);
        const std::string& id = fields.front();
        if (node_index.count(id))
            throw ParseError("load_cora: duplicate node id " + id, line_no);
        std::vector<double> row;
        row.reserve(fields.size() - 2);
        for (std::size_t k = 1; k + 1 < fields.size(); ++k) {
            if (fields[k] != "0" && fields[k] != "1")
                throw ParseError("load_cora: feature flags must be 0 or 1", line_no);
            row.push_back(fields[k] == "1" ? 1.0 : 0.0);
        }
        if (!features.empty() && row.size() != features.front().size())
            throw ParseError("load_cora: inconsistent feature count", line_no);
        node_index.emplace(id, static_cast<int>(features.size()));
        features.push_back(std::move(row));
        labels.push_back(fields.back());
    }
    if (features.empty()) throw ParseError("load_cora: empty content file");

    const int n = static_cast<int>(features.size());
    const int p = static_cast<int>(features.front().size());

    // class names sorted for a deterministic index assignment
    std::map<std::string, int> class_index;
    for (const auto& l : labels) class_index.emplace(l, 0);
    int next_class = 0;
    for (auto& [name, idx] : class_index) idx = next_class++;

    std::ifstream cites(cites_path);
    if (!cites) throw ParseError("load_cora: cannot open " + cites_path.string());
    std::vector<std::pair<int, int>> pairs;
    long warnings = 0;
    line_no = 0;
    while (std::getline(cites, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cited, citing;
        if (!(ss >> cited >> citing))
            throw ParseError("load_cora: malformed citation pair", line_no);
        auto a = node_index.find(cited);
        auto b = node_index.find(citing);
        if (a == node_index.end() || b == node_index.end()) {
            ++warnings;  // citation to a paper outside the content file
            continue;
        }
        if (a->second == b->second) continue;  // drop self-citations
        pairs.emplace_back(a->second, b->second);
    }

    Dataset ds;
    ds.n = n;
    ds.p = p;
    ds.c = static_cast<int>(class_index.size());
    Tensor x(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j)
            x(i, j) = features[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    ds.x = std::move(x);
    ds.a_obs = WeightedGraph::unit(SupportPattern::from_pairs(n, std::move(pairs)));
    ds.class_of.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        ds.class_of[static_cast<std::size_t>(i)] = class_index.at(labels[static_cast<std::size_t>(i)]);
    ds.labels_full = one_hot(ds.class_of, ds.c);
    ds.task = TaskKind::classification;

    if (sizes.n_train + sizes.n_outer > n)
        throw ContractError("load_cora: split sizes exceed node count");
    Rng rng(seed);
    std::vector<int> order = iota_vec(n);
    rng.shuffle(order);
    ds.split.train.assign(order.begin(), order.begin() + sizes.n_train);
    ds.split.outer.assign(order.begin() + sizes.n_train,
                          order.begin() + sizes.n_train + sizes.n_outer);
    split_val_test({order.begin() + sizes.n_train + sizes.n_outer, order.end()}, rng, ds.split);
    ds.split.validate(n);

    ds.targets.mask = labelled_mask(n, ds.split);
    ds.targets.y_obs = masked_targets(ds.labels_full, ds.targets.mask);
    ds.meta.name = "cora";
    ds.meta.seed = seed;
    ds.meta.warnings = warnings;
    return ds;
}

void export_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "X.csv");
        out.precision(17);
        for (Index i = 0; i < ds.x.rows(); ++i) {
            for (Index j = 0; j < ds.x.cols(); ++j) {
                if (j) out << ',';
                out << ds.x(i, j);
            }
            out << '\n';
        }
    }
    write_edge_list(dir / "edges.txt", ds.a_obs);
    {
        std::ofstream out(dir / "labels.csv");
        out.precision(17);
        out << "node,label,mask\n";
        for (int i = 0; i < ds.n; ++i) {
            out << i << ',';
            if (ds.task == TaskKind::classification)
                out << ds.class_of[static_cast<std::size_t>(i)];
            else
                out << ds.labels_full(i, 0);
            out << ',' << (ds.targets.mask[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
        }
    }
    {
        nlohmann::json j;
        j["train"] = ds.split.train;
        j["outer"] = ds.split.outer;
        j["val"] = ds.split.val;
        j["test"] = ds.split.test;
        std::ofstream out(dir / "splits.json");
        out << j.dump(2) << '\n';
    }
}

double evaluate_subset(const Tensor& pred, const Dataset& ds, std::span<const int> subset) {
    if (subset.empty()) throw ContractError("evaluate: empty subset");
    if (pred.rows() != ds.n) throw DimensionError("evaluate: predictions for all nodes required");
    if (ds.task == TaskKind::classification) {
        long hits = 0;
        for (int v : subset) {
            Index best = 0;
            for (Index j = 1; j < pred.cols(); ++j)
                if (pred(v, j) > pred(v, best)) best = j;
            if (static_cast<int>(best) == ds.class_of[static_cast<std::size_t>(v)]) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(subset.size());
    }
    double sum = 0.0;
    for (int v : subset) {
        for (Index j = 0; j < pred.cols(); ++j) {
            const double d = pred(v, j) - ds.labels_full(v, j);
            sum += d * d;
        }
    }
    return sum / static_cast<double>(subset.size());
}

}  // namespace scarcegrad
