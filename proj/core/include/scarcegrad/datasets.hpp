#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "scarcegrad/graph.hpp"
#include "scarcegrad/inner_models.hpp"
#include "scarcegrad/tensor.hpp"

namespace scarcegrad {

enum class TaskKind { regression, classification };

struct DatasetMeta {
    std::string name;
    std::uint64_t seed = 0;
    double sigma = 0.0;
    double tau_grade = 0.0;
    double zeta = 0.0;
    std::array<std::array<double, 2>, 3> centers{};
    int attempts = 1;       // generation retries until a connected graph
    long warnings = 0;      // skipped records during ingestion
};

struct Dataset {
    Tensor x;                            // n x p features
    WeightedGraph a_obs;                 // observed graph
    std::optional<WeightedGraph> a_star; // ground-truth graph when generated
    LabeledTargets targets;              // y_obs masked to V_tr u V_out
    Tensor labels_full;                  // ground truth everywhere (n x c)
    std::vector<int> class_of;           // classification only: class per node
    NodeSplit split;
    TaskKind task = TaskKind::regression;
    DatasetMeta meta;

    int n = 0;
    int p = 0;
    int c = 0;
};

struct Synthetic1Options {
    int n = 1536;
    double sigma = 0.06;
    bool concentrated_vtr = false;  // default: well-spread V_tr
    int n_train = 100;
    int n_outer = 25;
    double lambda = 1.0;  // used to propagate labels through the true graph
};

// Uniform 2-d latent positions, radius graph ground truth, labels from a
// scaled 3-Gaussian mixture on V_tr propagated to the rest of the graph, and
// observed weights that randomly attenuate the true edges. Regression task.
Dataset gen_synthetic1(std::uint64_t seed, const Synthetic1Options& opts = {});

// Exam-classroom binary classification: 1-d seating positions, Gaussian
// ground-truth affinity, Bernoulli-sampled observed edges, grades mixed
// through the true graph, pass/fail labels.
Dataset gen_cheaters(std::uint64_t seed);

struct CoraSplitSizes {
    int n_train = 140;
    int n_outer = 140;
};

// Raw Cora ingestion: cora.content (node features and class per line) and
// cora.cites (cited citing pairs). Splits are seeded.
Dataset load_cora(const std::filesystem::path& content_path,
                  const std::filesystem::path& cites_path, std::uint64_t seed,
                  const CoraSplitSizes& sizes = {});

// Writes X.csv, edges.txt, labels.csv and splits.json into `dir`.
void export_dataset(const Dataset& ds, const std::filesystem::path& dir);

// Classification: argmax match rate on the subset. Regression: mean squared
// error on the subset.
double evaluate_subset(const Tensor& pred, const Dataset& ds, std::span<const int> subset);

// Whether larger metric values are better for this dataset's task.
inline bool metric_is_accuracy(const Dataset& ds) {
    return ds.task == TaskKind::classification;
}

}  // namespace scarcegrad
