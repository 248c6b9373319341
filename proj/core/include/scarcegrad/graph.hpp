#pragma once

#include <filesystem>
#include <limits>
#include <utility>
#include <vector>

#include "scarcegrad/tensor.hpp"

namespace scarcegrad {

// Hop distance of an unreachable node.
constexpr int kUnreachable = std::numeric_limits<int>::max();

// Adds hop counts with saturation at kUnreachable.
inline int hop_add(int a, int b) {
    if (a == kUnreachable || b == kUnreachable) return kUnreachable;
    return a + b;
}

// The set of optimizable edges: node count plus unordered pairs {i, j}, i != j.
// Stored with i < j, sorted, deduplicated.
struct SupportPattern {
    int n = 0;
    std::vector<std::pair<int, int>> edges;

    static SupportPattern from_pairs(int n, std::vector<std::pair<int, int>> pairs);

    std::size_t edge_count() const { return edges.size(); }
    bool contains(int i, int j) const;
    std::vector<std::vector<int>> adjacency_lists() const;
};

// Symmetric weighted graph over a support: one weight per unordered edge, so
// the materialized adjacency is symmetric by construction.
struct WeightedGraph {
    SupportPattern support;
    std::vector<double> weights;  // parallel to support.edges

    static WeightedGraph unit(SupportPattern support);
    static WeightedGraph with_weights(SupportPattern support, std::vector<double> weights);

    Tensor adjacency() const;
    std::size_t edge_count() const { return support.edge_count(); }
};

// Disjoint node index sets; V_tr and V_out must be nonempty.
struct NodeSplit {
    std::vector<int> train;  // V_tr
    std::vector<int> outer;  // V_out
    std::vector<int> val;    // V_val
    std::vector<int> test;   // V_test

    void validate(int n) const;
    std::vector<int> train_union_outer() const;
};

// L = D - A. Symmetric, zero row sums, positive semidefinite.
Tensor laplacian(const WeightedGraph& g);

// BFS hop distances from a nonempty source set; kUnreachable where no path.
std::vector<int> hop_distances(const SupportPattern& support, const std::vector<int>& sources);

enum class EdgeDistanceMode { gcn, laplacian };

// Distance label for arbitrary node pairs measured on `metric`:
//   laplacian: min over endpoints of (dist to V_tr + dist to V_out)
//   gcn:       min over endpoints of dist to V_tr u V_out
std::vector<int> edge_distances(const SupportPattern& metric,
                                const std::vector<std::pair<int, int>>& edges,
                                const std::vector<int>& v_tr, const std::vector<int>& v_out,
                                EdgeDistanceMode mode);

// Same, for the support's own edges.
std::vector<int> edge_distances(const SupportPattern& support, const NodeSplit& split,
                                EdgeDistanceMode mode);

// Zero pattern of sum_{t=1..r} A^t: {i, j} present iff a path of length <= r
// connects them. Self-loops excluded. r >= 1.
SupportPattern power_support(const SupportPattern& support, int r);

// Clamps every weight to [lo, hi].
WeightedGraph project_weights(WeightedGraph g, double lo, double hi);

// Connected components; returns component id per node and the component count.
std::pair<std::vector<int>, int> connected_components(const SupportPattern& support);

// Edge-list text format: one "i j w" triple per line, 0-indexed,
// whitespace-separated, UTF-8.
void write_edge_list(const std::filesystem::path& path, const WeightedGraph& g);
WeightedGraph read_edge_list(const std::filesystem::path& path);

}  // namespace scarcegrad
