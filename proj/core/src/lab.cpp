#include "scarcegrad/lab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scarcegrad/errors.hpp"
#include "scarcegrad/grad_check.hpp"
#include "scarcegrad/svg.hpp"

namespace scarcegrad {

namespace {

std::vector<int> to_int_vec(const std::vector<std::int64_t>& v) {
    std::vector<int> out;
    out.reserve(v.size());
    for (std::int64_t x : v) out.push_back(static_cast<int>(x));
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_toml(const TomlDocument& doc) {
    ExperimentConfig cfg;
    if (doc.has_table("dataset")) {
        const TomlTable& t = doc.table("dataset");
        if (auto v = t.get("name")) cfg.dataset = v->as_string();
        if (auto v = t.get("seed")) cfg.dataset_seed = static_cast<std::uint64_t>(v->as_int());
        if (auto v = t.get("n")) cfg.synthetic_n = static_cast<int>(v->as_int());
        if (auto v = t.get("sigma")) cfg.synthetic_sigma = v->as_float();
        if (auto v = t.get("concentrated")) cfg.synthetic_concentrated = v->as_bool();
        if (auto v = t.get("content_path")) cfg.cora_content = v->as_string();
        if (auto v = t.get("cites_path")) cfg.cora_cites = v->as_string();
        if (auto v = t.get("train_size")) cfg.cora_train = static_cast<int>(v->as_int());
        if (auto v = t.get("outer_size")) cfg.cora_outer = static_cast<int>(v->as_int());
    }
    if (doc.has_table("inner")) {
        const TomlTable& t = doc.table("inner");
        if (auto v = t.get("model")) cfg.inner_model = v->as_string();
        if (auto v = t.get("hidden")) cfg.gcn_hidden = to_int_vec(v->as_int_array());
        if (auto v = t.get("lambda")) cfg.lambda = v->as_float();
        if (auto v = t.get("tau_in")) cfg.tau_in = static_cast<int>(v->as_int());
        if (auto v = t.get("eta_in")) cfg.eta_in = v->as_float();
        if (auto v = t.get("optimizer")) cfg.inner_optimizer = v->as_string();
    }
    if (doc.has_table("outer")) {
        const TomlTable& t = doc.table("outer");
        if (auto v = t.get("parameterization")) cfg.parameterization = v->as_string();
        if (auto v = t.get("power")) cfg.power = static_cast<int>(v->as_int());
        if (auto v = t.get("gamma")) cfg.gamma = v->as_float();
        if (auto v = t.get("tau_out")) cfg.tau_out = static_cast<int>(v->as_int());
        if (auto v = t.get("eta_out")) cfg.eta_out = v->as_float();
        if (auto v = t.get("optimizer")) cfg.outer_optimizer = v->as_string();
        if (auto v = t.get("seed")) cfg.outer_seed = static_cast<std::uint64_t>(v->as_int());
        if (auto v = t.get("init_scale")) cfg.init_scale = v->as_float();
        if (auto v = t.get("g2g_hidden")) cfg.g2g_hidden = to_int_vec(v->as_int_array());
        if (auto v = t.get("g2g_final_scale")) cfg.g2g_final_scale = v->as_float();
    }
    if (doc.has_table("run")) {
        const TomlTable& t = doc.table("run");
        if (auto v = t.get("snapshots")) cfg.snapshot_iterations = to_int_vec(v->as_int_array());
        if (auto v = t.get("out_dir")) cfg.out_dir = v->as_string();
    }
    return cfg;
}

void ExperimentConfig::resolve_defaults() {
    const bool g2g = parameterization == "g2g";
    if (dataset == "cheaters") {
        if (gcn_hidden.empty()) gcn_hidden = {8};
        if (tau_in < 0) tau_in = 200;
        if (eta_in < 0) eta_in = 1e-2;
        if (tau_out < 0) tau_out = 150;
        if (eta_out < 0) eta_out = g2g ? 1e-3 : 1e-2;
        if (init_scale < 0) init_scale = 1e-5;
        if (g2g_hidden.empty()) g2g_hidden = {16, 16};
        if (g2g_final_scale < 0) g2g_final_scale = 1e-5;
    } else if (dataset == "synthetic1") {
        if (inner_model.empty()) inner_model = "laplacian";
        if (tau_in < 0) tau_in = 500;
        if (eta_in < 0) eta_in = 10.0;
        if (tau_out < 0) tau_out = 150;
        if (eta_out < 0) eta_out = 1e-1;
        if (init_scale < 0) init_scale = 1.0;
        if (g2g_hidden.empty()) g2g_hidden = {16, 16};
        if (g2g_final_scale < 0) g2g_final_scale = 1.0;
    } else if (dataset == "cora") {
        const bool laplacian = inner_model == "laplacian";
        if (gcn_hidden.empty()) gcn_hidden = {128};
        if (tau_in < 0) tau_in = laplacian ? 500 : 100;
        if (eta_in < 0) eta_in = laplacian ? 1e-1 : 1e-2;
        if (tau_out < 0) tau_out = 150;
        if (eta_out < 0) {
            if (g2g)
                eta_out = laplacian ? 1e-3 : 1e-4;
            else
                eta_out = 1e-2;
        }
        if (init_scale < 0) init_scale = 1.0;
        if (g2g_hidden.empty()) g2g_hidden = {32, 32};
        if (g2g_final_scale < 0) g2g_final_scale = 1.0;
    }
    if (inner_model.empty() && dataset != "synthetic1") inner_model = "gcn";
    if (parameterization.empty()) parameterization = "direct";
    if (snapshot_iterations.empty()) snapshot_iterations = {9};
}

std::vector<std::string> ExperimentConfig::validate() const {
    std::vector<std::string> bad;
    if (dataset != "synthetic1" && dataset != "cheaters" && dataset != "cora")
        bad.push_back("dataset.name must be synthetic1, cheaters or cora");
    if (inner_model != "gcn" && inner_model != "laplacian")
        bad.push_back("inner.model must be gcn or laplacian");
    if (parameterization != "direct" && parameterization != "g2g")
        bad.push_back("outer.parameterization must be direct or g2g");
    if (dataset == "cora" && (cora_content.empty() || cora_cites.empty()))
        bad.push_back("dataset.content_path and dataset.cites_path are required for cora");
    if (dataset == "cora" && (cora_train < 1 || cora_outer < 1))
        bad.push_back("dataset.train_size and dataset.outer_size must be >= 1");
    if (dataset == "synthetic1" && synthetic_n < 140)
        bad.push_back("dataset.n must be >= 140 to fit the node splits");
    if (dataset == "synthetic1" && !(synthetic_sigma > 0))
        bad.push_back("dataset.sigma must be > 0");
    if (inner_model == "laplacian" && !(lambda > 0)) bad.push_back("inner.lambda must be > 0");
    if (inner_model == "gcn")
        for (int h : gcn_hidden)
            if (h < 1) bad.push_back("inner.hidden entries must be >= 1");
    if (tau_in < 1) bad.push_back("inner.tau_in must be >= 1");
    if (!(eta_in > 0)) bad.push_back("inner.eta_in must be > 0");
    if (inner_optimizer != "adam" && inner_optimizer != "gd")
        bad.push_back("inner.optimizer must be adam or gd");
    if (power < 1) bad.push_back("outer.power must be >= 1");
    if (gamma < 0) bad.push_back("outer.gamma must be >= 0");
    if (tau_out < 1) bad.push_back("outer.tau_out must be >= 1");
    if (!(eta_out > 0)) bad.push_back("outer.eta_out must be > 0");
    if (outer_optimizer != "adam" && outer_optimizer != "gd")
        bad.push_back("outer.optimizer must be adam or gd");
    if (parameterization == "g2g")
        for (int h : g2g_hidden)
            if (h < 1) bad.push_back("outer.g2g_hidden entries must be >= 1");
    for (int s : snapshot_iterations)
        if (s < 0 || s >= tau_out)
            bad.push_back("run.snapshots entries must lie in [0, tau_out)");
    if (out_dir.empty()) bad.push_back("run.out_dir is required");
    return bad;
}

namespace {

Dataset build_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset == "synthetic1") {
        Synthetic1Options opts;
        opts.n = cfg.synthetic_n;
        opts.sigma = cfg.synthetic_sigma;
        opts.concentrated_vtr = cfg.synthetic_concentrated;
        return gen_synthetic1(cfg.dataset_seed, opts);
    }
    if (cfg.dataset == "cheaters") return gen_cheaters(cfg.dataset_seed);
    CoraSplitSizes sizes;
    sizes.n_train = cfg.cora_train;
    sizes.n_outer = cfg.cora_outer;
    return load_cora(cfg.cora_content, cfg.cora_cites, cfg.dataset_seed, sizes);
}

OuterConfig to_outer_config(const ExperimentConfig& cfg, const Dataset& ds) {
    OuterConfig ocfg;
    ocfg.model.kind = cfg.inner_model == "gcn" ? InnerModelSpec::Kind::gcn
                                               : InnerModelSpec::Kind::laplacian;
    if (ocfg.model.kind == InnerModelSpec::Kind::gcn) {
        ocfg.model.gcn.input_dim = ds.p;
        ocfg.model.gcn.hidden = cfg.gcn_hidden;
        ocfg.model.gcn.output_dim = ds.c;
    }
    ocfg.model.lambda = cfg.lambda;
    ocfg.model.loss = ds.task == TaskKind::classification ? LossKind::cce : LossKind::mse;
    ocfg.outer_loss = ocfg.model.loss;
    ocfg.tau_in = cfg.tau_in;
    ocfg.tau_out = cfg.tau_out;
    ocfg.eta_in = cfg.eta_in;
    ocfg.eta_out = cfg.eta_out;
    ocfg.gamma = cfg.gamma;
    ocfg.seed = cfg.outer_seed;
    ocfg.inner_opt = cfg.inner_optimizer == "gd" ? OptimizerKind::gd : OptimizerKind::adam;
    ocfg.outer_opt = cfg.outer_optimizer == "gd" ? OptimizerKind::gd : OptimizerKind::adam;
    return ocfg;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

nlohmann::json config_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["dataset"] = {{"name", cfg.dataset},
                    {"seed", cfg.dataset_seed},
                    {"n", cfg.synthetic_n},
                    {"sigma", cfg.synthetic_sigma},
                    {"concentrated", cfg.synthetic_concentrated},
                    {"content_path", cfg.cora_content},
                    {"cites_path", cfg.cora_cites},
                    {"train_size", cfg.cora_train},
                    {"outer_size", cfg.cora_outer}};
    j["inner"] = {{"model", cfg.inner_model},
                  {"hidden", cfg.gcn_hidden},
                  {"lambda", cfg.lambda},
                  {"tau_in", cfg.tau_in},
                  {"eta_in", cfg.eta_in},
                  {"optimizer", cfg.inner_optimizer}};
    j["outer"] = {{"parameterization", cfg.parameterization},
                  {"power", cfg.power},
                  {"gamma", cfg.gamma},
                  {"tau_out", cfg.tau_out},
                  {"eta_out", cfg.eta_out},
                  {"optimizer", cfg.outer_optimizer},
                  {"seed", cfg.outer_seed},
                  {"init_scale", cfg.init_scale},
                  {"g2g_hidden", cfg.g2g_hidden},
                  {"g2g_final_scale", cfg.g2g_final_scale}};
    j["run"] = {{"snapshots", cfg.snapshot_iterations}, {"out_dir", cfg.out_dir}};
    return j;
}

std::string distance_cell(int d) { return d == kUnreachable ? "inf" : std::to_string(d); }

void write_profile_csv(const std::filesystem::path& dir, const HypergradProfile& profile) {
    CsvTable t;
    t.header = {"i", "j", "distance", "abs_hypergradient", "iteration"};
    for (std::size_t e = 0; e < profile.edges.size(); ++e)
        t.rows.push_back({std::to_string(profile.edges[e].first),
                          std::to_string(profile.edges[e].second),
                          distance_cell(profile.distances[e]),
                          format_double(profile.abs_grad[e]),
                          std::to_string(profile.iteration)});
    write_csv(dir / ("profile_iter" + std::to_string(profile.iteration) + ".csv"), t);
}

}  // namespace

RunArtifacts run(const ExperimentConfig& raw) {
    ExperimentConfig cfg = raw;
    cfg.resolve_defaults();
    const auto violations = cfg.validate();
    if (!violations.empty()) throw ConfigError(violations);

    Dataset ds = build_dataset(cfg);

    SupportPattern support =
        cfg.power == 1 ? ds.a_obs.support : power_support(ds.a_obs.support, cfg.power);

    Rng init_rng(Rng::derive(cfg.outer_seed, 0xA11CEull));
    OuterParameterization init;
    if (cfg.parameterization == "direct") {
        init = DirectEdges::random_init(support, init_rng, cfg.init_scale);
    } else {
        G2gShape shape;
        shape.input_dim = ds.p;
        shape.hidden = cfg.g2g_hidden;
        init = LatentG2g::init(support, shape, init_rng, cfg.g2g_final_scale);
    }

    OuterConfig ocfg = to_outer_config(cfg, ds);
    OuterLoopOptions opts;
    opts.snapshot_iterations = cfg.snapshot_iterations;
    OuterLoopResult result = outer_loop(ocfg, ds, std::move(init), opts);

    // distances are measured on the observed graph so that runs over expanded
    // supports stay comparable to the baseline
    const EdgeDistanceMode mode = cfg.inner_model == "gcn" ? EdgeDistanceMode::gcn
                                                           : EdgeDistanceMode::laplacian;
    const std::vector<int> dist = edge_distances(ds.a_obs.support, support.edges,
                                                 ds.split.train, ds.split.outer, mode);

    RunArtifacts artifacts;
    artifacts.dir = cfg.out_dir;
    std::filesystem::create_directories(artifacts.dir);

    for (const Snapshot& snap : result.snapshots) {
        HypergradProfile profile;
        profile.iteration = snap.iteration;
        profile.edges = support.edges;
        profile.distances = dist;
        profile.abs_grad = snap.abs_edge_grad;
        write_profile_csv(artifacts.dir, profile);
        artifacts.profiles.push_back(std::move(profile));
    }

    {
        CsvTable t;
        t.header = {"iteration", "f_out", "out_metric", "val_metric", "test_metric",
                    "attempts", "eta_in"};
        for (const HistoryRow& row : result.history)
            t.rows.push_back({std::to_string(row.iteration), format_double(row.f_out),
                              format_double(row.out_metric), format_double(row.val_metric),
                              format_double(row.test_metric), std::to_string(row.attempts),
                              format_double(row.eta_in_used)});
        write_csv(artifacts.dir / "history.csv", t);
    }
    {
        const std::vector<long> counts = count_refined(result.weight_history);
        CsvTable t;
        t.header = {"iteration", "refined_edges"};
        for (std::size_t i = 0; i < counts.size(); ++i)
            t.rows.push_back({std::to_string(i), std::to_string(counts[i])});
        write_csv(artifacts.dir / "refined_counts.csv", t);
    }
    {
        std::vector<double> final_weights;
        if (const auto* direct = std::get_if<DirectEdges>(&result.best_param))
            final_weights = direct->weights;
        else
            final_weights = g2g_edge_values(std::get<LatentG2g>(result.best_param), ds.x);
        write_edge_list(artifacts.dir / "graph_final.txt",
                        WeightedGraph::with_weights(support, std::move(final_weights)));
    }
    {
        nlohmann::json manifest;
        manifest["config"] = config_json(cfg);
        manifest["config_hash"] = fnv1a(config_json(cfg).dump());
        manifest["dataset"] = {{"name", ds.meta.name},
                               {"seed", ds.meta.seed},
                               {"n", ds.n},
                               {"p", ds.p},
                               {"classes", ds.c},
                               {"edges", ds.a_obs.edge_count()},
                               {"support_edges", support.edge_count()},
                               {"generation_attempts", ds.meta.attempts}};
        manifest["result"] = {{"best_iteration", result.best_iteration},
                              {"best_val_metric", result.best_val_metric}};
        std::ofstream out(artifacts.dir / "manifest.json");
        out << manifest.dump(2) << '\n';
    }

    artifacts.dataset = std::move(ds);
    artifacts.result = std::move(result);
    return artifacts;
}

long count_refined_at(const std::vector<double>& weights) {
    double max_w = 0.0;
    for (double w : weights) max_w = std::max(max_w, w);
    const double threshold = 0.01 * max_w;
    long count = 0;
    for (double w : weights)
        if (w > threshold) ++count;
    // all-zero weights: strict inequality against 0 keeps the count at zero
    if (max_w == 0.0) return 0;
    return count;
}

std::vector<long> count_refined(const std::vector<std::vector<double>>& weight_history) {
    std::vector<long> counts;
    counts.reserve(weight_history.size());
    for (const auto& weights : weight_history) counts.push_back(count_refined_at(weights));
    return counts;
}

double evaluate(const Tensor& pred, const Dataset& ds, SubsetKind subset) {
    const std::vector<int>* nodes = nullptr;
    switch (subset) {
        case SubsetKind::tr: nodes = &ds.split.train; break;
        case SubsetKind::out: nodes = &ds.split.outer; break;
        case SubsetKind::val: nodes = &ds.split.val; break;
        case SubsetKind::test: nodes = &ds.split.test; break;
    }
    return evaluate_subset(pred, ds, *nodes);
}

HypergradProfile read_profile(const std::filesystem::path& artifact_dir, int iteration) {
    const auto path = artifact_dir / ("profile_iter" + std::to_string(iteration) + ".csv");
    if (!std::filesystem::exists(path))
        throw ParseError("read_profile: missing artifact " + path.string());
    const CsvTable t = read_csv(path);
    HypergradProfile profile;
    profile.iteration = iteration;
    for (const auto& row : t.rows) {
        profile.edges.emplace_back(std::stoi(row[0]), std::stoi(row[1]));
        profile.distances.push_back(row[2] == "inf" ? kUnreachable : std::stoi(row[2]));
        profile.abs_grad.push_back(parse_double(row[3]));
    }
    return profile;
}

void emit_reports(const std::filesystem::path& artifact_dir) {
    if (!std::filesystem::exists(artifact_dir / "history.csv"))
        throw ParseError("emit_reports: missing artifact " +
                         (artifact_dir / "history.csv").string());

    {
        const CsvTable t = read_csv(artifact_dir / "history.csv");
        SvgPlotSpec spec;
        spec.title = "Training history";
        spec.x_label = "outer iteration";
        spec.y_label = "metric";
        SvgSeries val{"validation", "#1f77b4", {}, {}, false};
        SvgSeries test{"test", "#d62728", {}, {}, false};
        const int it = t.column("iteration");
        const int vc = t.column("val_metric");
        const int tc = t.column("test_metric");
        for (const auto& row : t.rows) {
            val.x.push_back(parse_double(row[it]));
            val.y.push_back(parse_double(row[vc]));
            test.x.push_back(parse_double(row[it]));
            test.y.push_back(parse_double(row[tc]));
        }
        spec.series = {val, test};
        write_svg_plot(artifact_dir / "plot_history.svg", spec);
    }
    if (std::filesystem::exists(artifact_dir / "refined_counts.csv")) {
        const CsvTable t = read_csv(artifact_dir / "refined_counts.csv");
        SvgPlotSpec spec;
        spec.title = "Refined edges";
        spec.x_label = "outer iteration";
        spec.y_label = "edges above 1% of max weight";
        SvgSeries s{"refined", "#2ca02c", {}, {}, false};
        for (const auto& row : t.rows) {
            s.x.push_back(parse_double(row[0]));
            s.y.push_back(parse_double(row[1]));
        }
        spec.series = {s};
        write_svg_plot(artifact_dir / "plot_refined_counts.svg", spec);
    }
    for (const auto& entry : std::filesystem::directory_iterator(artifact_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("profile_iter", 0) != 0 || entry.path().extension() != ".csv") continue;
        const CsvTable t = read_csv(entry.path());
        SvgPlotSpec spec;
        spec.title = "Hypergradient vs edge distance";
        spec.x_label = "edge distance (15 = unreachable)";
        spec.y_label = "|hypergradient|";
        spec.log_y = true;
        SvgSeries s{"edges", "#1f77b4", {}, {}, true};
        const int dc = t.column("distance");
        const int gc = t.column("abs_hypergradient");
        for (const auto& row : t.rows) {
            // the unreachable sentinel renders at bucket 15
            s.x.push_back(row[dc] == "inf" ? 15.0 : parse_double(row[dc]));
            s.y.push_back(parse_double(row[gc]));
        }
        spec.series = {s};
        write_svg_plot(artifact_dir /
                           (entry.path().stem().string() + std::string(".svg")),
                       spec);
    }
}

// --- gradient-check battery ---------------------------------------------------

namespace {

Tensor rnd(Rng& rng, Index r, Index c, double lo = -1.0, double hi = 1.0) {
    return Tensor::random_uniform(r, c, rng, lo, hi);
}

// uniform values kept `margin` away from `kink` so finite differences stay on
// one side of the nondifferentiable point
Tensor rnd_away(Rng& rng, Index r, Index c, double kink, double margin) {
    Tensor t(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) {
            double v = rng.uniform(-1.0, 1.0);
            if (std::abs(v - kink) < margin) v = kink + (v >= kink ? margin : -margin) * 2.0;
            t(i, j) = v;
        }
    return t;
}

double input_scale(const std::vector<Tensor>& point) {
    double m = 1.0;
    for (const Tensor& t : point) m = std::max(m, t.max_abs());
    return m;
}

struct BatteryCase {
    TapeBuilder build;
    std::vector<Tensor> point;
};

using CaseGen = std::function<BatteryCase(Rng&)>;

GradCheckItem run_item(const std::string& name, const CaseGen& gen, Rng& rng, int instances) {
    GradCheckItem item;
    item.name = name;
    item.instances = instances;
    for (int i = 0; i < instances; ++i) {
        BatteryCase c = gen(rng);
        const double h = 1e-6 * input_scale(c.point);
        item.max_rel_error = std::max(item.max_rel_error, grad_check(c.build, c.point, h));
    }
    return item;
}

}  // namespace

double GradCheckReport::worst() const {
    double w = 0.0;
    for (const auto& item : items) w = std::max(w, item.max_rel_error);
    return w;
}

GradCheckReport run_grad_check_battery(std::uint64_t seed, int instances) {
    Rng rng(seed);
    GradCheckReport report;

    auto add = [&](const std::string& name, const CaseGen& gen) {
        report.items.push_back(run_item(name, gen, rng, instances));
    };

    add("matmul", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.matmul(in[0], in[1]));
                },
                {rnd(r, 3, 4), rnd(r, 4, 2)}};
    });
    add("add", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(t.add(in[0], in[1])));
                },
                {rnd(r, 3, 3), rnd(r, 3, 3)}};
    });
    add("subtract", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(t.subtract(in[0], in[1])));
                },
                {rnd(r, 3, 3), rnd(r, 3, 3)}};
    });
    add("hadamard", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.hadamard(in[0], in[1]));
                },
                {rnd(r, 3, 3), rnd(r, 3, 3)}};
    });
    add("scalar-scale", [](Rng& r) -> BatteryCase {
        const double factor = r.uniform(-2.0, 2.0);
        return {[factor](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(t.scalar_scale(in[0], factor)));
                },
                {rnd(r, 3, 3)}};
    });
    add("broadcast-add-row", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(t.broadcast_add_row(in[0], in[1])));
                },
                {rnd(r, 4, 3), rnd(r, 1, 3)}};
    });
    add("relu", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(t.relu(in[0])));
                },
                {rnd_away(r, 3, 3, 0.0, 5e-3)}};
    });
    add("softmax-rows", [](Rng& r) -> BatteryCase {
        Tensor c = rnd(r, 3, 4);
        return {[c](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.hadamard(t.softmax_rows(in[0]), t.constant(c)));
                },
                {rnd(r, 3, 4, -2.0, 2.0)}};
    });
    add("log", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.log(in[0]));
                },
                {rnd(r, 3, 3, 0.2, 3.0)}};
    });
    add("exp", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.exp(in[0]));
                },
                {rnd(r, 3, 3, -2.0, 2.0)}};
    });
    add("square", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(in[0]));
                },
                {rnd(r, 3, 3)}};
    });
    add("sqrt", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.sqrt(in[0]));
                },
                {rnd(r, 3, 3, 0.3, 3.0)}};
    });
    add("abs", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.abs(in[0]));
                },
                {rnd_away(r, 3, 3, 0.0, 5e-3)}};
    });
    add("transpose", [](Rng& r) -> BatteryCase {
        Tensor c = rnd(r, 4, 3);
        return {[c](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.hadamard(t.transpose(in[0]), t.constant(c)));
                },
                {rnd(r, 3, 4)}};
    });
    add("row-select", [](Rng& r) -> BatteryCase {
        std::vector<Index> rows;
        for (int k = 0; k < 4; ++k) rows.push_back(r.uniform_int(0, 4));
        return {[rows](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(t.row_select(in[0], rows)));
                },
                {rnd(r, 5, 3)}};
    });
    add("reduce-sum", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) { return t.reduce_sum(in[0]); },
                {rnd(r, 3, 4)}};
    });
    add("reduce-mean", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_mean(t.square(in[0]));
                },
                {rnd(r, 3, 4)}};
    });
    add("masked-fill", [](Rng& r) -> BatteryCase {
        std::vector<std::uint8_t> mask(12);
        for (auto& m : mask) m = r.uniform() < 0.4 ? 1 : 0;
        const double fill = r.uniform(-1.0, 1.0);
        return {[mask, fill](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(t.masked_fill(in[0], mask, fill)));
                },
                {rnd(r, 3, 4)}};
    });
    add("clamp-min", [](Rng& r) -> BatteryCase {
        return {[](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.square(t.clamp_min(in[0], 0.1)));
                },
                {rnd_away(r, 3, 3, 0.1, 5e-3)}};
    });
    add("scatter-edges", [](Rng& r) -> BatteryCase {
        const std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {0, 3}, {2, 3}};
        Tensor c = rnd(r, 4, 4);
        return {[edges, c](Tape& t, const std::vector<VarId>& in) {
                    return t.reduce_sum(t.hadamard(t.scatter_edges(in[0], edges, 4), t.constant(c)));
                },
                {rnd(r, 4, 1)}};
    });

    // inner models: full objective gradients wrt adjacency, parameters and labels
    add("gcn-inner-model", [](Rng& r) -> BatteryCase {
        const int n = 6;
        GcnShape shape{3, {4}, 2};
        LabeledTargets targets;
        std::vector<int> class_of;
        for (int i = 0; i < n; ++i) class_of.push_back(static_cast<int>(r.uniform_int(0, 1)));
        targets.y_obs = Tensor(n, 2);
        for (int i = 0; i < n; ++i) targets.y_obs(i, class_of[static_cast<std::size_t>(i)]) = 1.0;
        targets.mask.assign(n, 1);
        const std::vector<int> v_tr{0, 1, 2};

        Tensor a_raw = rnd(r, n, n, 0.0, 1.0);
        Tensor a_sym(Matrix(0.5 * (a_raw.mat() + Matrix(a_raw.mat().transpose()))));
        for (int i = 0; i < n; ++i) a_sym(i, i) = 0.0;

        std::vector<Tensor> point{a_sym, rnd(r, n, 3)};
        for (int l = 0; l < shape.layer_count(); ++l) {
            point.push_back(rnd(r, shape.dim_in(l), shape.dim_out(l)));
            point.push_back(rnd(r, shape.dim_in(l), shape.dim_out(l)));
            point.push_back(rnd(r, 1, shape.dim_out(l)));
        }
        return {[shape, targets, v_tr](Tape& t, const std::vector<VarId>& in) {
                    GcnParams params = GcnParams::from_flat(
                        shape, std::vector<VarId>(in.begin() + 2, in.end()));
                    VarId pred = gcn_forward(t, params, in[0], in[1]);
                    return masked_loss(t, pred, targets, v_tr, LossKind::cce);
                },
                std::move(point)};
    });
    add("laplacian-inner-model", [](Rng& r) -> BatteryCase {
        const int n = 6;
        LabeledTargets targets;
        targets.y_obs = rnd(r, n, 1, 0.0, 1.0);
        targets.mask.assign(n, 1);
        const std::vector<int> v_tr{0, 1};
        const double lambda = 0.7;

        Tensor a_raw = rnd(r, n, n, 0.0, 1.0);
        Tensor a_sym(Matrix(0.5 * (a_raw.mat() + Matrix(a_raw.mat().transpose()))));
        for (int i = 0; i < n; ++i) a_sym(i, i) = 0.0;

        return {[targets, v_tr, lambda](Tape& t, const std::vector<VarId>& in) {
                    return laplacian_reg_objective(t, in[1], in[0], targets, v_tr, lambda, 7);
                },
                {a_sym, rnd(r, n, 1)}};
    });

    return report;
}

}  // namespace scarcegrad
