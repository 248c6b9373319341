#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "scarcegrad/datasets.hpp"
#include "scarcegrad/errors.hpp"
#include "scarcegrad/lab.hpp"

namespace {

using namespace scarcegrad;

constexpr int kExitConfigError = 2;
constexpr int kExitDivergence = 3;

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
    TomlDocument doc = parse_toml_file(config_path);
    for (const auto& assignment : overrides) doc.set_dotted(assignment);
    ExperimentConfig cfg = ExperimentConfig::from_toml(doc);
    RunArtifacts artifacts = run(cfg);

    std::printf("run complete: %s\n", artifacts.dir.string().c_str());
    std::printf("  iterations: %zu\n", artifacts.result.history.size());
    std::printf("  best iteration: %d (val metric %.6g)\n", artifacts.result.best_iteration,
                artifacts.result.best_val_metric);
    if (!artifacts.result.history.empty()) {
        const auto& last = artifacts.result.history.back();
        std::printf("  final F_out: %.6g, val %.6g, test %.6g\n", last.f_out, last.val_metric,
                    last.test_metric);
    }
    return 0;
}

int cmd_profile(const std::string& dir, int iteration) {
    HypergradProfile profile = read_profile(dir, iteration);
    std::map<int, std::pair<double, long>> buckets;  // distance -> (max |g|, count)
    long zero_edges = 0;
    for (std::size_t e = 0; e < profile.edges.size(); ++e) {
        const int d = profile.distances[e] == kUnreachable ? 15 : profile.distances[e];
        auto& [max_g, count] = buckets[d];
        max_g = std::max(max_g, profile.abs_grad[e]);
        ++count;
        if (profile.abs_grad[e] <= 1e-12) ++zero_edges;
    }
    std::printf("profile at iteration %d: %zu edges, %ld with |g| <= 1e-12\n",
                profile.iteration, profile.edges.size(), zero_edges);
    std::printf("%-10s %-8s %s\n", "distance", "edges", "max |hypergradient|");
    for (const auto& [d, entry] : buckets)
        std::printf("%-10d %-8ld %.6e\n", d, entry.second, entry.first);
    return 0;
}

int cmd_report(const std::string& dir) {
    emit_reports(dir);
    std::printf("reports written to %s\n", dir.c_str());
    return 0;
}

int cmd_gen_dataset(const std::string& name, std::uint64_t seed, const std::string& out,
                    int n, const std::string& cora_content, const std::string& cora_cites) {
    Dataset ds;
    if (name == "synthetic1") {
        Synthetic1Options opts;
        if (n > 0) {
            opts.n = n;
            // keep the expected node degree of the full-size dataset
            opts.sigma = 0.06 * std::sqrt(1536.0 / static_cast<double>(n));
        }
        ds = gen_synthetic1(seed, opts);
    } else if (name == "cheaters") {
        ds = gen_cheaters(seed);
    } else if (name == "cora") {
        if (cora_content.empty() || cora_cites.empty())
            throw ConfigError({"gen-dataset cora requires --cora-content and --cora-cites"});
        ds = load_cora(cora_content, cora_cites, seed);
    } else {
        throw ConfigError({"unknown dataset '" + name + "'"});
    }
    export_dataset(ds, out);
    std::printf("dataset %s (seed %llu): n=%d p=%d c=%d edges=%zu -> %s\n", name.c_str(),
                static_cast<unsigned long long>(seed), ds.n, ds.p, ds.c,
                ds.a_obs.edge_count(), out.c_str());
    return 0;
}

int cmd_grad_check(std::uint64_t seed, int instances, double tolerance) {
    GradCheckReport report = run_grad_check_battery(seed, instances);
    bool ok = true;
    for (const auto& item : report.items) {
        const bool pass = item.max_rel_error <= tolerance;
        ok = ok && pass;
        std::printf("%-24s %4d instances  max rel err %.3e  %s\n", item.name.c_str(),
                    item.instances, item.max_rel_error, pass ? "ok" : "FAIL");
    }
    std::printf("worst: %.3e (tolerance %.1e)\n", report.worst(), tolerance);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bilevel graph-learning laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment config");
    run_cmd->add_option("config", config_path, "TOML experiment config")->required();
    run_cmd->add_option("--set", overrides, "override config values (section.key=value)");

    std::string profile_dir;
    int profile_iteration = 9;
    CLI::App* profile_cmd =
        app.add_subcommand("profile", "summarize a stored hypergradient profile");
    profile_cmd->add_option("artifact-dir", profile_dir, "run artifact directory")->required();
    profile_cmd->add_option("--iteration", profile_iteration, "snapshot iteration");

    std::string report_dir;
    CLI::App* report_cmd = app.add_subcommand("report", "render SVG reports for a run");
    report_cmd->add_option("artifact-dir", report_dir, "run artifact directory")->required();

    std::string ds_name, ds_out, cora_content, cora_cites;
    std::uint64_t ds_seed = 0;
    int ds_n = 0;
    CLI::App* gen_cmd = app.add_subcommand("gen-dataset", "generate or ingest a dataset");
    gen_cmd->add_option("name", ds_name, "synthetic1 | cheaters | cora")->required();
    gen_cmd->add_option("--seed", ds_seed, "generation seed");
    gen_cmd->add_option("--out", ds_out, "output directory")->required();
    gen_cmd->add_option("--n", ds_n, "synthetic1 node count override");
    gen_cmd->add_option("--cora-content", cora_content, "cora.content path");
    gen_cmd->add_option("--cora-cites", cora_cites, "cora.cites path");

    std::uint64_t gc_seed = 0;
    int gc_instances = 100;
    double gc_tol = 1e-5;
    CLI::App* gc_cmd =
        app.add_subcommand("grad-check", "finite-difference check of the gradient engine");
    gc_cmd->add_option("--seed", gc_seed, "random seed");
    gc_cmd->add_option("--instances", gc_instances, "random instances per item");
    gc_cmd->add_option("--tolerance", gc_tol, "max relative error allowed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(config_path, overrides);
        if (*profile_cmd) return cmd_profile(profile_dir, profile_iteration);
        if (*report_cmd) return cmd_report(report_dir);
        if (*gen_cmd)
            return cmd_gen_dataset(ds_name, ds_seed, ds_out, ds_n, cora_content, cora_cites);
        if (*gc_cmd) return cmd_grad_check(gc_seed, gc_instances, gc_tol);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfigError;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s (iteration %d)\n", e.what(), e.iteration);
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
