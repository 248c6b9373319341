#include "scarcegrad/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "scarcegrad/errors.hpp"

namespace scarcegrad {

SupportPattern SupportPattern::from_pairs(int n, std::vector<std::pair<int, int>> pairs) {
    if (n < 0) throw ContractError("SupportPattern: negative node count");
    for (auto& [i, j] : pairs) {
        if (i == j) throw ContractError("SupportPattern: self-loop");
        if (i < 0 || j < 0 || i >= n || j >= n)
            throw ContractError("SupportPattern: node index out of range");
        if (i > j) std::swap(i, j);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    SupportPattern s;
    s.n = n;
    s.edges = std::move(pairs);
    return s;
}

bool SupportPattern::contains(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

std::vector<std::vector<int>> SupportPattern::adjacency_lists() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& [i, j] : edges) {
        adj[static_cast<std::size_t>(i)].push_back(j);
        adj[static_cast<std::size_t>(j)].push_back(i);
    }
    return adj;
}

WeightedGraph WeightedGraph::unit(SupportPattern support) {
    WeightedGraph g;
    g.weights.assign(support.edge_count(), 1.0);
    g.support = std::move(support);
    return g;
}

WeightedGraph WeightedGraph::with_weights(SupportPattern support, std::vector<double> weights) {
    if (weights.size() != support.edge_count())
        throw ContractError("WeightedGraph: weight count does not match edge count");
    WeightedGraph g;
    g.support = std::move(support);
    g.weights = std::move(weights);
    return g;
}

Tensor WeightedGraph::adjacency() const {
    Tensor a(support.n, support.n);
    for (std::size_t e = 0; e < support.edges.size(); ++e) {
        const auto [i, j] = support.edges[e];
        a(i, j) = weights[e];
        a(j, i) = weights[e];
    }
    return a;
}

void NodeSplit::validate(int n) const {
    if (train.empty()) throw ContractError("NodeSplit: V_tr is empty");
    if (outer.empty()) throw ContractError("NodeSplit: V_out is empty");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const auto* set : {&train, &outer, &val, &test}) {
        for (int v : *set) {
            if (v < 0 || v >= n) throw ContractError("NodeSplit: node index out of range");
            if (seen[static_cast<std::size_t>(v)])
                throw ContractError("NodeSplit: sets are not pairwise disjoint");
            seen[static_cast<std::size_t>(v)] = 1;
        }
    }
}

std::vector<int> NodeSplit::train_union_outer() const {
    std::vector<int> u = train;
    u.insert(u.end(), outer.begin(), outer.end());
    std::sort(u.begin(), u.end());
    return u;
}

Tensor laplacian(const WeightedGraph& g) {
    const int n = g.support.n;
    Tensor l(n, n);
    for (std::size_t e = 0; e < g.support.edges.size(); ++e) {
        const auto [i, j] = g.support.edges[e];
        const double w = g.weights[e];
        l(i, j) -= w;
        l(j, i) -= w;
        l(i, i) += w;
        l(j, j) += w;
    }
    return l;
}

std::vector<int> hop_distances(const SupportPattern& support, const std::vector<int>& sources) {
    if (sources.empty()) throw ContractError("hop_distances: empty source set");
    std::vector<int> dist(static_cast<std::size_t>(support.n), kUnreachable);
    std::deque<int> queue;
    for (int s : sources) {
        if (s < 0 || s >= support.n)
            throw ContractError("hop_distances: source index out of range");
        if (dist[static_cast<std::size_t>(s)] == 0) continue;
        dist[static_cast<std::size_t>(s)] = 0;
        queue.push_back(s);
    }
    const auto adj = support.adjacency_lists();
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (dist[static_cast<std::size_t>(v)] != kUnreachable) continue;
            dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
            queue.push_back(v);
        }
    }
    return dist;
}

std::vector<int> edge_distances(const SupportPattern& metric,
                                const std::vector<std::pair<int, int>>& edges,
                                const std::vector<int>& v_tr, const std::vector<int>& v_out,
                                EdgeDistanceMode mode) {
    std::vector<int> result;
    result.reserve(edges.size());
    if (mode == EdgeDistanceMode::laplacian) {
        const auto d_tr = hop_distances(metric, v_tr);
        const auto d_out = hop_distances(metric, v_out);
        for (const auto& [i, j] : edges) {
            const int di = hop_add(d_tr[static_cast<std::size_t>(i)],
                                   d_out[static_cast<std::size_t>(i)]);
            const int dj = hop_add(d_tr[static_cast<std::size_t>(j)],
                                   d_out[static_cast<std::size_t>(j)]);
            result.push_back(std::min(di, dj));
        }
    } else {
        std::vector<int> labelled = v_tr;
        labelled.insert(labelled.end(), v_out.begin(), v_out.end());
        const auto d = hop_distances(metric, labelled);
        for (const auto& [i, j] : edges)
            result.push_back(std::min(d[static_cast<std::size_t>(i)],
                                      d[static_cast<std::size_t>(j)]));
    }
    return result;
}

std::vector<int> edge_distances(const SupportPattern& support, const NodeSplit& split,
                                EdgeDistanceMode mode) {
    return edge_distances(support, support.edges, split.train, split.outer, mode);
}

SupportPattern power_support(const SupportPattern& support, int r) {
    if (r < 1) throw ContractError("power_support: r must be >= 1");
    const auto adj = support.adjacency_lists();
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> dist(static_cast<std::size_t>(support.n));
    // BFS from every node truncated at depth r
    for (int s = 0; s < support.n; ++s) {
        std::fill(dist.begin(), dist.end(), kUnreachable);
        dist[static_cast<std::size_t>(s)] = 0;
        std::deque<int> queue{s};
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            if (dist[static_cast<std::size_t>(u)] == r) continue;
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (dist[static_cast<std::size_t>(v)] != kUnreachable) continue;
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                queue.push_back(v);
                if (v > s) pairs.emplace_back(s, v);
            }
        }
    }
    return SupportPattern::from_pairs(support.n, std::move(pairs));
}

WeightedGraph project_weights(WeightedGraph g, double lo, double hi) {
    if (lo > hi) throw ContractError("project_weights: lo > hi");
    for (double& w : g.weights) w = std::clamp(w, lo, hi);
    return g;
}

std::pair<std::vector<int>, int> connected_components(const SupportPattern& support) {
    std::vector<int> comp(static_cast<std::size_t>(support.n), -1);
    const auto adj = support.adjacency_lists();
    int count = 0;
    for (int s = 0; s < support.n; ++s) {
        if (comp[static_cast<std::size_t>(s)] >= 0) continue;
        comp[static_cast<std::size_t>(s)] = count;
        std::deque<int> queue{s};
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (comp[static_cast<std::size_t>(v)] >= 0) continue;
                comp[static_cast<std::size_t>(v)] = count;
                queue.push_back(v);
            }
        }
        ++count;
    }
    return {std::move(comp), count};
}

void write_edge_list(const std::filesystem::path& path, const WeightedGraph& g) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_edge_list: cannot open " + path.string());
    out.precision(17);
    for (std::size_t e = 0; e < g.support.edges.size(); ++e)
        out << g.support.edges[e].first << ' ' << g.support.edges[e].second << ' '
            << g.weights[e] << '\n';
}

WeightedGraph read_edge_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("read_edge_list: cannot open " + path.string());
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> weights;
    int max_node = -1;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        int i, j;
        double w;
        if (!(ss >> i >> j >> w)) throw ParseError("read_edge_list: malformed triple", line_no);
        if (i < 0 || j < 0) throw ParseError("read_edge_list: negative node index", line_no);
        pairs.emplace_back(i, j);
        weights.push_back(w);
        max_node = std::max({max_node, i, j});
    }
    // from_pairs sorts; reorder weights identically
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    for (auto& [i, j] : pairs)
        if (i > j) std::swap(i, j);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pairs[a] < pairs[b]; });
    std::vector<std::pair<int, int>> sorted_pairs;
    std::vector<double> sorted_weights;
    sorted_pairs.reserve(pairs.size());
    for (std::size_t k : order) {
        if (!sorted_pairs.empty() && sorted_pairs.back() == pairs[k]) continue;
        sorted_pairs.push_back(pairs[k]);
        sorted_weights.push_back(weights[k]);
    }
    return WeightedGraph::with_weights(
        SupportPattern::from_pairs(max_node + 1, std::move(sorted_pairs)),
        std::move(sorted_weights));
}

}  // namespace scarcegrad
