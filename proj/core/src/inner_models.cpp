#include "scarcegrad/inner_models.hpp"

#include <cmath>

#include "scarcegrad/errors.hpp"

namespace scarcegrad {

namespace {

// floor under softmax probabilities so log never sees a zero
constexpr double kProbFloor = 1e-300;

}  // namespace

void LabeledTargets::check_nodes_labelled(const std::vector<int>& nodes) const {
    for (int v : nodes) {
        if (v < 0 || static_cast<std::size_t>(v) >= mask.size())
            throw ContractError("masked_loss: node index out of range");
        if (!mask[static_cast<std::size_t>(v)])
            throw ContractError("masked_loss: node " + std::to_string(v) + " is not labelled");
    }
}

std::vector<VarId> GcnParams::flatten() const {
    std::vector<VarId> flat;
    flat.reserve(layers.size() * 3);
    for (const auto& l : layers) {
        flat.push_back(l.w1);
        flat.push_back(l.w2);
        flat.push_back(l.b);
    }
    return flat;
}

GcnParams GcnParams::from_flat(const GcnShape& shape, const std::vector<VarId>& flat) {
    if (flat.size() != static_cast<std::size_t>(shape.layer_count()) * 3)
        throw ContractError("GcnParams::from_flat: wrong variable count");
    GcnParams p;
    p.shape = shape;
    for (int l = 0; l < shape.layer_count(); ++l)
        p.layers.push_back({flat[3 * l], flat[3 * l + 1], flat[3 * l + 2]});
    return p;
}

GcnParams init_gcn_params(Tape& tape, const GcnShape& shape, Rng& rng) {
    GcnParams p;
    p.shape = shape;
    for (int l = 0; l < shape.layer_count(); ++l) {
        const int din = shape.dim_in(l);
        const int dout = shape.dim_out(l);
        const double bound = std::sqrt(6.0 / static_cast<double>(din + dout));
        GcnLayerVars vars;
        vars.w1 = tape.leaf(Tensor::random_uniform(din, dout, rng, -bound, bound));
        vars.w2 = tape.leaf(Tensor::random_uniform(din, dout, rng, -bound, bound));
        vars.b = tape.leaf(Tensor::zeros(1, dout));
        p.layers.push_back(vars);
    }
    return p;
}

GcnParams gcn_params_from_tensors(Tape& tape, const GcnShape& shape,
                                  const std::vector<Tensor>& flat_values, bool requires_grad) {
    if (flat_values.size() != static_cast<std::size_t>(shape.layer_count()) * 3)
        throw ContractError("gcn_params_from_tensors: wrong tensor count");
    std::vector<VarId> flat;
    flat.reserve(flat_values.size());
    for (const Tensor& t : flat_values) flat.push_back(tape.leaf(t, requires_grad));
    return GcnParams::from_flat(shape, flat);
}

GcnForwardTrace gcn_forward_trace(Tape& tape, const GcnParams& params, VarId a, VarId x) {
    const Tensor& av = tape.value(a);
    const Tensor& xv = tape.value(x);
    if (av.rows() != av.cols()) throw DimensionError("gcn_forward: adjacency must be square");
    if (xv.rows() != av.rows())
        throw DimensionError("gcn_forward: feature rows must match node count");
    if (xv.cols() != params.shape.input_dim)
        throw DimensionError("gcn_forward: feature dim does not match model input dim");

    GcnForwardTrace trace;
    VarId cur = x;
    const int k = params.shape.layer_count();
    for (int l = 0; l < k; ++l) {
        trace.inputs.push_back(cur);
        VarId xw1 = tape.matmul(cur, params.layers[l].w1);
        VarId ax = tape.matmul(a, cur);
        trace.ax.push_back(ax);
        VarId axw2 = tape.matmul(ax, params.layers[l].w2);
        VarId z = tape.broadcast_add_row(tape.add(xw1, axw2), params.layers[l].b);
        trace.pre.push_back(z);
        cur = (l + 1 < k) ? tape.relu(z) : z;
    }
    trace.output = cur;
    return trace;
}

VarId gcn_forward(Tape& tape, const GcnParams& params, VarId a, VarId x) {
    return gcn_forward_trace(tape, params, a, x).output;
}

std::vector<std::uint8_t> rows_not_in_mask(Index n, Index c, const std::vector<int>& keep_rows) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n * c), 1);
    for (int r : keep_rows)
        for (Index j = 0; j < c; ++j) mask[static_cast<std::size_t>(r * c + j)] = 0;
    return mask;
}

VarId masked_loss(Tape& tape, VarId pred, const LabeledTargets& targets,
                  const std::vector<int>& nodes, LossKind kind) {
    if (nodes.empty()) throw ContractError("masked_loss: empty node set");
    targets.check_nodes_labelled(nodes);
    const Tensor& pv = tape.value(pred);
    if (pv.rows() != targets.y_obs.rows() || pv.cols() != targets.y_obs.cols())
        throw DimensionError("masked_loss: prediction shape does not match targets");

    std::vector<Index> rows(nodes.begin(), nodes.end());
    VarId yobs = tape.constant(targets.y_obs);
    const double inv = 1.0 / static_cast<double>(nodes.size());
    if (kind == LossKind::mse) {
        VarId diff = tape.subtract(pred, yobs);
        VarId sel = tape.row_select(diff, rows);
        return tape.scalar_scale(tape.reduce_sum(tape.square(sel)), inv);
    }
    VarId probs = tape.clamp_min(tape.softmax_rows(pred), kProbFloor);
    VarId picked = tape.hadamard(tape.log(probs), yobs);
    VarId sel = tape.row_select(picked, rows);
    return tape.scalar_scale(tape.reduce_sum(sel), -inv);
}

namespace {

// L Y assembled from the adjacency variable: diag(A 1) Y - A Y.
VarId laplacian_apply(Tape& tape, VarId a, VarId y) {
    const Index n = tape.value(a).rows();
    const Index c = tape.value(y).cols();
    VarId deg = tape.matmul(a, tape.constant(Tensor::ones(n, 1)));
    VarId deg_tiled = c == 1 ? deg : tape.matmul(deg, tape.constant(Tensor::ones(1, c)));
    VarId dy = tape.hadamard(deg_tiled, y);
    VarId ay = tape.matmul(a, y);
    return tape.subtract(dy, ay);
}

}  // namespace

VarId laplacian_reg_objective(Tape& tape, VarId y, VarId a, const LabeledTargets& targets,
                              const std::vector<int>& v_tr, double lambda,
                              std::size_t edge_count) {
    if (!(lambda > 0.0)) throw ContractError("laplacian_reg_objective: lambda must be > 0");
    if (edge_count == 0)
        throw ContractError("laplacian_reg_objective: edgeless graph (|E| = 0)");
    VarId fit = masked_loss(tape, y, targets, v_tr, LossKind::mse);
    VarId ly = laplacian_apply(tape, a, y);
    VarId quad = tape.reduce_sum(tape.hadamard(y, ly));
    VarId reg = tape.scalar_scale(quad, lambda / static_cast<double>(edge_count));
    return tape.add(fit, reg);
}

InnerGradWorkspace make_inner_grad_workspace(Tape& tape, VarId a, VarId x) {
    InnerGradWorkspace ws;
    ws.a_transpose = tape.transpose(a);
    ws.ones_row_n = tape.constant(Tensor::ones(1, tape.value(a).rows()));
    ws.x_transpose = tape.transpose(x);
    return ws;
}

GcnGradients inner_grad_gcn(Tape& tape, const GcnParams& params, VarId a, VarId x,
                            const LabeledTargets& targets, const std::vector<int>& v_tr,
                            LossKind kind, const InnerGradWorkspace& ws) {
    if (v_tr.empty()) throw ContractError("inner_grad_gcn: empty training set");
    targets.check_nodes_labelled(v_tr);

    GcnForwardTrace trace = gcn_forward_trace(tape, params, a, x);
    const Tensor& pv = tape.value(trace.output);
    const Index n = pv.rows();
    const Index c = pv.cols();
    VarId yobs = tape.constant(targets.y_obs);
    const auto off_rows = rows_not_in_mask(n, c, v_tr);
    const double inv = 1.0 / static_cast<double>(v_tr.size());

    // dF/d(pred), masked to V_tr rows
    VarId seed;
    if (kind == LossKind::mse) {
        VarId diff = tape.subtract(trace.output, yobs);
        seed = tape.scalar_scale(tape.masked_fill(diff, off_rows, 0.0), 2.0 * inv);
    } else {
        VarId probs = tape.softmax_rows(trace.output);
        VarId diff = tape.subtract(probs, yobs);
        seed = tape.scalar_scale(tape.masked_fill(diff, off_rows, 0.0), inv);
    }

    const int k = params.shape.layer_count();
    GcnGradients grads;
    grads.prediction = trace.output;
    grads.layers.resize(static_cast<std::size_t>(k));

    VarId delta = seed;  // dF/dZ^l, starting with the linear output layer
    for (int l = k - 1; l >= 0; --l) {
        VarId input_t =
            l == 0 ? ws.x_transpose : tape.transpose(trace.inputs[static_cast<std::size_t>(l)]);
        GcnLayerGrads g;
        g.w1 = tape.matmul(input_t, delta);
        g.w2 = tape.matmul(tape.transpose(trace.ax[static_cast<std::size_t>(l)]), delta);
        g.b = tape.matmul(ws.ones_row_n, delta);
        grads.layers[static_cast<std::size_t>(l)] = g;
        if (l == 0) break;

        VarId w1_t = tape.transpose(params.layers[static_cast<std::size_t>(l)].w1);
        VarId w2_t = tape.transpose(params.layers[static_cast<std::size_t>(l)].w2);
        VarId dx = tape.add(tape.matmul(delta, w1_t),
                            tape.matmul(ws.a_transpose, tape.matmul(delta, w2_t)));
        // relu mask of the previous pre-activation, held constant
        const Matrix& z_prev = tape.value(trace.pre[static_cast<std::size_t>(l - 1)]).mat();
        Tensor mask(Matrix((z_prev.array() > 0.0).cast<double>().matrix()));
        delta = tape.hadamard(dx, tape.constant(std::move(mask)));
    }
    return grads;
}

std::vector<VarId> GcnGradients::flatten() const {
    std::vector<VarId> flat;
    flat.reserve(layers.size() * 3);
    for (const auto& l : layers) {
        flat.push_back(l.w1);
        flat.push_back(l.w2);
        flat.push_back(l.b);
    }
    return flat;
}

VarId inner_grad_labels(Tape& tape, VarId y, VarId a, const LabeledTargets& targets,
                        const std::vector<int>& v_tr, double lambda, std::size_t edge_count) {
    if (!(lambda > 0.0)) throw ContractError("inner_grad_labels: lambda must be > 0");
    if (edge_count == 0) throw ContractError("inner_grad_labels: edgeless graph (|E| = 0)");
    if (v_tr.empty()) throw ContractError("inner_grad_labels: empty training set");
    targets.check_nodes_labelled(v_tr);
    const Index rows = tape.value(y).rows();
    const Index cols = tape.value(y).cols();

    VarId diff = tape.subtract(y, tape.constant(targets.y_obs));
    VarId fit = tape.scalar_scale(
        tape.masked_fill(diff, rows_not_in_mask(rows, cols, v_tr), 0.0),
        2.0 / static_cast<double>(v_tr.size()));
    VarId smooth = tape.scalar_scale(laplacian_apply(tape, a, y),
                                     2.0 * lambda / static_cast<double>(edge_count));
    return tape.add(fit, smooth);
}

}  // namespace scarcegrad
