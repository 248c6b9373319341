#pragma once

#include <vector>

#include "scarcegrad/rng.hpp"
#include "scarcegrad/tape.hpp"

namespace scarcegrad {

enum class LossKind { mse, cce };

// Observed targets: n x c values (one-hot for classification) plus a per-node
// labelled mask. Rows with mask = false are ignored by every loss.
struct LabeledTargets {
    Tensor y_obs;
    std::vector<std::uint8_t> mask;

    void check_nodes_labelled(const std::vector<int>& nodes) const;
};

// Message-passing layer dimensions: input -> hidden... -> output. The model
// has k = hidden.size() + 1 rounds of message passing; hidden layers use relu,
// the final layer is linear (softmax lives inside the CCE loss).
struct GcnShape {
    int input_dim = 0;
    std::vector<int> hidden;
    int output_dim = 0;

    int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
    int dim_in(int layer) const { return layer == 0 ? input_dim : hidden[layer - 1]; }
    int dim_out(int layer) const {
        return layer == static_cast<int>(hidden.size()) ? output_dim : hidden[layer];
    }
};

// Per-layer parameter handles on a tape: X W1 + A X W2 + 1 b^T.
struct GcnLayerVars {
    VarId w1, w2, b;
};

struct GcnParams {
    GcnShape shape;
    std::vector<GcnLayerVars> layers;

    std::vector<VarId> flatten() const;
    static GcnParams from_flat(const GcnShape& shape, const std::vector<VarId>& flat);
};

// Xavier-uniform weights, zero biases.
GcnParams init_gcn_params(Tape& tape, const GcnShape& shape, Rng& rng);
GcnParams gcn_params_from_tensors(Tape& tape, const GcnShape& shape,
                                  const std::vector<Tensor>& flat_values,
                                  bool requires_grad = false);

// Forward intermediates needed by the hand-derived gradient.
struct GcnForwardTrace {
    std::vector<VarId> inputs;  // X^{l-1} per layer
    std::vector<VarId> ax;      // A X^{l-1} per layer
    std::vector<VarId> pre;     // pre-activation Z^l per layer
    VarId output;               // X^k (logits / regression values)
};

GcnForwardTrace gcn_forward_trace(Tape& tape, const GcnParams& params, VarId a, VarId x);
VarId gcn_forward(Tape& tape, const GcnParams& params, VarId a, VarId x);

// (1/|nodes|) sum over nodes of the per-node loss; cce applies row softmax.
VarId masked_loss(Tape& tape, VarId pred, const LabeledTargets& targets,
                  const std::vector<int>& nodes, LossKind kind);

// masked_loss(Y, V_tr, mse) + (lambda/|E|) * sum over columns of Y^T L Y,
// with L assembled on-tape from the adjacency variable.
VarId laplacian_reg_objective(Tape& tape, VarId y, VarId a, const LabeledTargets& targets,
                              const std::vector<int>& v_tr, double lambda,
                              std::size_t edge_count);

// Cached per-unroll constants (recorded once, reused every step).
struct InnerGradWorkspace {
    VarId a_transpose;  // transpose(A)
    VarId ones_row_n;   // 1 x n of ones
    VarId x_transpose;  // transpose(X)
};
InnerGradWorkspace make_inner_grad_workspace(Tape& tape, VarId a, VarId x);

struct GcnLayerGrads {
    VarId w1, w2, b;
};

struct GcnGradients {
    std::vector<GcnLayerGrads> layers;
    VarId prediction;  // forward output used to form the gradient

    std::vector<VarId> flatten() const;
};

// Hand-derived gradient of the inner GCN objective with respect to every
// parameter, expressed entirely in first-order primitives so a later backward
// pass differentiates through it. The relu masks are treated as constants.
GcnGradients inner_grad_gcn(Tape& tape, const GcnParams& params, VarId a, VarId x,
                            const LabeledTargets& targets, const std::vector<int>& v_tr,
                            LossKind kind, const InnerGradWorkspace& ws);

// (2/|V_tr|) S_in (Y - Y_obs) + (2 lambda / |E|) L Y, as tape primitives.
VarId inner_grad_labels(Tape& tape, VarId y, VarId a, const LabeledTargets& targets,
                        const std::vector<int>& v_tr, double lambda, std::size_t edge_count);

// Entry mask that zeroes every row not in `keep_rows` (n x c row-major).
std::vector<std::uint8_t> rows_not_in_mask(Index n, Index c, const std::vector<int>& keep_rows);

}  // namespace scarcegrad
