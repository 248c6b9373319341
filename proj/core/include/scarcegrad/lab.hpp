#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scarcegrad/bilevel.hpp"
#include "scarcegrad/csv.hpp"
#include "scarcegrad/toml.hpp"

namespace scarcegrad {

// One experiment: dataset, inner model, outer parameterization, optimizer
// settings, snapshots and output location. Unset numeric fields resolve to
// per-dataset defaults (resolve_defaults).
struct ExperimentConfig {
    // dataset
    std::string dataset;  // synthetic1 | cheaters | cora
    std::uint64_t dataset_seed = 0;
    int synthetic_n = 1536;
    double synthetic_sigma = 0.06;
    bool synthetic_concentrated = false;
    std::string cora_content;
    std::string cora_cites;
    int cora_train = 140;
    int cora_outer = 140;

    // inner model
    std::string inner_model;  // gcn | laplacian
    std::vector<int> gcn_hidden;
    double lambda = 1.0;
    int tau_in = -1;
    double eta_in = -1.0;
    std::string inner_optimizer = "adam";

    // outer problem
    std::string parameterization;  // direct | g2g
    int power = 1;                 // support = zero pattern of sum_t A_obs^t
    double gamma = 0.0;
    int tau_out = -1;
    double eta_out = -1.0;
    std::string outer_optimizer = "adam";
    std::uint64_t outer_seed = 0;
    double init_scale = -1.0;       // direct-edge init: scale * U[0,1]
    std::vector<int> g2g_hidden;
    double g2g_final_scale = -1.0;

    // run
    std::vector<int> snapshot_iterations;
    std::string out_dir;

    static ExperimentConfig from_toml(const TomlDocument& doc);
    std::vector<std::string> validate() const;  // every violated field
    void resolve_defaults();
};

struct HypergradProfile {
    int iteration = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> distances;  // kUnreachable encodes infinity
    std::vector<double> abs_grad;
};

struct RunArtifacts {
    std::filesystem::path dir;
    Dataset dataset;
    OuterLoopResult result;
    std::vector<HypergradProfile> profiles;
};

// Executes the configured experiment and writes history.csv,
// refined_counts.csv, per-snapshot profile CSVs, the final learned graph and
// a manifest pinning every seed and parameter.
RunArtifacts run(const ExperimentConfig& cfg);

// Count of edges with weight strictly above one percent of the maximum weight
// at each recorded iteration.
std::vector<long> count_refined(const std::vector<std::vector<double>>& weight_history);
long count_refined_at(const std::vector<double>& weights);

enum class SubsetKind { tr, out, val, test };
double evaluate(const Tensor& pred, const Dataset& ds, SubsetKind subset);

// Renders SVG plots for every CSV artifact in the directory.
void emit_reports(const std::filesystem::path& artifact_dir);

// Reads a stored profile CSV back.
HypergradProfile read_profile(const std::filesystem::path& artifact_dir, int iteration);

// --- gradient-check battery ---------------------------------------------------

struct GradCheckItem {
    std::string name;
    double max_rel_error = 0.0;
    int instances = 0;
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    double worst() const;
};

// Checks every tape primitive and both inner models against central finite
// differences on `instances` random cases each.
GradCheckReport run_grad_check_battery(std::uint64_t seed, int instances);

}  // namespace scarcegrad
