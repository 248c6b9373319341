#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "scarcegrad/datasets.hpp"
#include "scarcegrad/inner_models.hpp"
#include "scarcegrad/tape.hpp"

namespace scarcegrad {

enum class OptimizerKind { gd, adam };

// Inner optimizer recorded on the tape, so hypergradients flow through every
// update. Adam keeps its moment estimates as tape variables.
class TapeOptimizer {
public:
    TapeOptimizer(OptimizerKind kind, double eta) : kind_(kind), eta_(eta) {}

    std::vector<VarId> step(Tape& tape, const std::vector<VarId>& params,
                            const std::vector<VarId>& grads);

    OptimizerKind kind() const { return kind_; }
    double eta() const { return eta_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    OptimizerKind kind_;
    double eta_;
    int t_ = 0;
    std::vector<VarId> m_, v_;
};

// Plain Adam/GD over flat host vectors; drives the outer iterations.
class HostOptimizer {
public:
    HostOptimizer(OptimizerKind kind, double eta) : kind_(kind), eta_(eta) {}
    void step(std::vector<double>& params, const std::vector<double>& grads);

private:
    OptimizerKind kind_;
    double eta_;
    int t_ = 0;
    std::vector<double> m_, v_;
};

// --- outer parameterizations -------------------------------------------------

struct DirectEdges {
    SupportPattern support;
    std::vector<double> weights;

    static DirectEdges random_init(SupportPattern support, Rng& rng, double scale = 1.0);
};

struct G2gShape {
    int input_dim = 0;
    std::vector<int> hidden;  // e.g. {16, 16}; output dim is always 1
    int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
    int dim_in(int l) const { return l == 0 ? input_dim : hidden[l - 1]; }
    int dim_out(int l) const { return l == static_cast<int>(hidden.size()) ? 1 : hidden[l]; }
};

// Edge model alpha((X_i - X_j)^2): an MLP applied per support edge, relu on
// hidden layers and on the final scalar so edge weights stay nonnegative.
struct LatentG2g {
    SupportPattern support;
    G2gShape shape;
    std::vector<Matrix> w;  // per layer
    std::vector<Matrix> b;  // 1 x d_out per layer

    static LatentG2g init(SupportPattern support, G2gShape shape, Rng& rng,
                          double final_layer_scale = 1.0);

    std::vector<double> flatten() const;
    void assign_flat(const std::vector<double>& flat);
    std::size_t param_count() const;
};

using OuterParameterization = std::variant<DirectEdges, LatentG2g>;

const SupportPattern& param_support(const OuterParameterization& p);

// Entrywise squared feature differences per support edge (|E| x p).
Matrix g2g_edge_features(const SupportPattern& support, const Tensor& x);
// Host-side forward of the edge MLP; mirrors the tape computation.
std::vector<double> g2g_edge_values(const LatentG2g& param, const Tensor& x);

// --- configuration ------------------------------------------------------------

struct InnerModelSpec {
    enum class Kind { gcn, laplacian };
    Kind kind = Kind::gcn;
    GcnShape gcn;           // used when kind == gcn
    LossKind loss = LossKind::mse;
    double lambda = 1.0;    // balance for the laplacian objective
};

struct OuterConfig {
    InnerModelSpec model;
    LossKind outer_loss = LossKind::mse;
    int tau_in = 1;
    int tau_out = 1;
    double eta_in = 1e-2;
    double eta_out = 1e-2;
    double gamma = 0.0;  // log-degree regularizer weight; 0 disables it
    std::uint64_t seed = 0;
    OptimizerKind inner_opt = OptimizerKind::adam;
    OptimizerKind outer_opt = OptimizerKind::adam;
    double weight_lo = 0.0;
    double weight_hi = 1e6;

    void validate() const;
};

// --- engine -------------------------------------------------------------------

struct Materialized {
    VarId a;                     // symmetric n x n, zeros off-support
    VarId edge_values;           // |E| x 1 values fed into the scatter
    std::vector<VarId> leaves;   // differentiable parameter leaves
};

Materialized materialize_adjacency(Tape& tape, const OuterParameterization& param,
                                   const Tensor& x);

struct UnrollResult {
    VarId predictions;
    std::vector<double> inner_loss;  // monitored value per step
};

// Records tau_in optimizer steps of the inner problem on the tape and returns
// the trained predictions. `support_edge_count` is |E| of the adjacency's
// support, used by the laplacian objective normalization. Throws
// DivergenceError on a non-finite inner loss.
UnrollResult unroll_inner(Tape& tape, VarId a, std::size_t support_edge_count,
                          const Dataset& ds, const OuterConfig& cfg, std::uint64_t inner_seed);

// V_out loss plus, when gamma > 0, the log-degree penalty
// -gamma * sum_i log(deg_i + 1e-8).
VarId outer_objective(Tape& tape, VarId pred, const Dataset& ds, double gamma, VarId a,
                      LossKind outer_loss);

struct HypergradResult {
    std::vector<double> param_grad;   // per edge weight or per theta entry
    std::vector<double> edge_grad;    // dF_out/d(edge value) at the scatter input
    std::vector<double> edge_values;  // materialized edge values
    double f_out = 0.0;
    Tensor predictions;
};

// One full differentiable pipeline: materialize, unroll, outer objective,
// backward. Gradients are reported on the outer parameter leaves.
HypergradResult hypergradient(const OuterConfig& cfg, const Dataset& ds,
                              const OuterParameterization& param, std::uint64_t inner_seed);

// Forward-only pipeline value at the same inner seed; finite-difference oracle
// helper for tests.
double outer_value(const OuterConfig& cfg, const Dataset& ds,
                   const OuterParameterization& param, std::uint64_t inner_seed);

struct OuterLoopOptions {
    std::vector<int> snapshot_iterations;
    bool record_weights = true;
};

struct HistoryRow {
    int iteration = 0;
    double f_out = 0.0;
    double out_metric = 0.0;   // accuracy/MSE on V_out (the outer training set)
    double val_metric = 0.0;
    double test_metric = 0.0;
    int attempts = 1;          // unroll attempts (divergence retries)
    double eta_in_used = 0.0;
};

struct Snapshot {
    int iteration = 0;
    // DirectEdges: |dF_out/dw_e|. LatentG2g: per-edge update magnitude
    // |A_e(theta_next) - A_e(theta)| / eta_out, the supervision an edge
    // actually receives through the latent model.
    std::vector<double> abs_edge_grad;
};

struct OuterLoopResult {
    OuterParameterization best_param;
    int best_iteration = -1;
    double best_val_metric = 0.0;
    Tensor best_predictions;
    std::vector<HistoryRow> history;
    // edge values per iteration; entry tau_out holds the post-final-update state
    std::vector<std::vector<double>> weight_history;
    std::vector<Snapshot> snapshots;
};

OuterLoopResult outer_loop(const OuterConfig& cfg, const Dataset& ds,
                           OuterParameterization init, const OuterLoopOptions& opts = {});

}  // namespace scarcegrad
