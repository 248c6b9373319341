#include "scarcegrad/tape.hpp"

#include <atomic>
#include <cmath>

namespace scarcegrad {

namespace {

std::uint32_t next_tape_tag() {
    static std::atomic<std::uint32_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

// exp(x) overflows double beyond ~709.78
constexpr double kExpOverflow = 709.0;

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
    throw DimensionError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ")");
}

}  // namespace

const char* op_name(OpKind op) {
    switch (op) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::subtract: return "subtract";
        case OpKind::hadamard: return "hadamard";
        case OpKind::scalar_scale: return "scalar-scale";
        case OpKind::broadcast_add_row: return "broadcast-add-row";
        case OpKind::relu: return "relu";
        case OpKind::softmax_rows: return "softmax-rows";
        case OpKind::log: return "log";
        case OpKind::exp: return "exp";
        case OpKind::square: return "square";
        case OpKind::sqrt: return "sqrt";
        case OpKind::abs: return "abs";
        case OpKind::transpose: return "transpose";
        case OpKind::row_select: return "row-select";
        case OpKind::reduce_sum: return "reduce-sum";
        case OpKind::reduce_mean: return "reduce-mean";
        case OpKind::masked_fill: return "masked-fill";
        case OpKind::clamp_min: return "clamp-min";
        case OpKind::scatter_edges: return "scatter-edges";
    }
    return "?";
}

Tape::Tape() : tag_(next_tape_tag()) {}

void Tape::check_owned(VarId v, const char* op) const {
    if (!v.valid() || v.tape_tag != tag_ || v.index >= nodes_.size())
        throw ContractError(std::string(op) + ": VarId does not belong to this tape");
}

const Tape::Node& Tape::node(VarId v) const { return nodes_[v.index]; }

VarId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return VarId{static_cast<std::uint32_t>(nodes_.size() - 1), tag_};
}

VarId Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = OpKind::leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

VarId Tape::unary(OpKind op, VarId a, Tensor value) {
    check_owned(a, op_name(op));
    Node n;
    n.op = op;
    n.parents[0] = a.index;
    n.num_parents = 1;
    n.value = std::move(value);
    n.requires_grad = node(a).requires_grad;
    return push(std::move(n));
}

VarId Tape::binary(OpKind op, VarId a, VarId b, Tensor value) {
    check_owned(a, op_name(op));
    check_owned(b, op_name(op));
    Node n;
    n.op = op;
    n.parents[0] = a.index;
    n.parents[1] = b.index;
    n.num_parents = 2;
    n.value = std::move(value);
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(n));
}

VarId Tape::matmul(VarId a, VarId b) {
    check_owned(a, "matmul");
    check_owned(b, "matmul");
    const Tensor& va = node(a).value;
    const Tensor& vb = node(b).value;
    if (va.cols() != vb.rows()) dim_error("matmul", va, vb);
    return binary(OpKind::matmul, a, b, Tensor(Matrix(va.mat() * vb.mat())));
}

VarId Tape::add(VarId a, VarId b) {
    check_owned(a, "add");
    check_owned(b, "add");
    const Tensor& va = node(a).value;
    const Tensor& vb = node(b).value;
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) dim_error("add", va, vb);
    return binary(OpKind::add, a, b, Tensor(Matrix(va.mat() + vb.mat())));
}

VarId Tape::subtract(VarId a, VarId b) {
    check_owned(a, "subtract");
    check_owned(b, "subtract");
    const Tensor& va = node(a).value;
    const Tensor& vb = node(b).value;
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) dim_error("subtract", va, vb);
    return binary(OpKind::subtract, a, b, Tensor(Matrix(va.mat() - vb.mat())));
}

VarId Tape::hadamard(VarId a, VarId b) {
    check_owned(a, "hadamard");
    check_owned(b, "hadamard");
    const Tensor& va = node(a).value;
    const Tensor& vb = node(b).value;
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) dim_error("hadamard", va, vb);
    return binary(OpKind::hadamard, a, b, Tensor(Matrix(va.mat().cwiseProduct(vb.mat()))));
}

VarId Tape::scalar_scale(VarId a, double factor) {
    check_owned(a, "scalar-scale");
    VarId id = unary(OpKind::scalar_scale, a, Tensor(Matrix(node(a).value.mat() * factor)));
    nodes_[id.index].scalar = factor;
    return id;
}

VarId Tape::broadcast_add_row(VarId a, VarId row) {
    check_owned(a, "broadcast-add-row");
    check_owned(row, "broadcast-add-row");
    const Tensor& va = node(a).value;
    const Tensor& vr = node(row).value;
    if (vr.rows() != 1 || vr.cols() != va.cols()) dim_error("broadcast-add-row", va, vr);
    Matrix out = va.mat();
    out.rowwise() += vr.mat().row(0);
    return binary(OpKind::broadcast_add_row, a, row, Tensor(std::move(out)));
}

VarId Tape::relu(VarId a) {
    check_owned(a, "relu");
    return unary(OpKind::relu, a, Tensor(Matrix(node(a).value.mat().cwiseMax(0.0))));
}

VarId Tape::softmax_rows(VarId a) {
    check_owned(a, "softmax-rows");
    const Matrix& x = node(a).value.mat();
    Matrix out(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double m = x.row(i).maxCoeff();
        Eigen::RowVectorXd e = (x.row(i).array() - m).exp();
        out.row(i) = e / e.sum();
    }
    return unary(OpKind::softmax_rows, a, Tensor(std::move(out)));
}

VarId Tape::log(VarId a) {
    check_owned(a, "log");
    const Matrix& x = node(a).value.mat();
    if (x.size() > 0 && x.minCoeff() <= 0.0)
        throw DomainError("log: non-positive entry");
    return unary(OpKind::log, a, Tensor(Matrix(x.array().log().matrix())));
}

VarId Tape::exp(VarId a) {
    check_owned(a, "exp");
    const Matrix& x = node(a).value.mat();
    if (x.size() > 0 && x.maxCoeff() > kExpOverflow)
        throw DomainError("exp: entry exceeds overflow threshold");
    return unary(OpKind::exp, a, Tensor(Matrix(x.array().exp().matrix())));
}

VarId Tape::square(VarId a) {
    check_owned(a, "square");
    const Matrix& x = node(a).value.mat();
    return unary(OpKind::square, a, Tensor(Matrix(x.cwiseProduct(x))));
}

VarId Tape::sqrt(VarId a) {
    check_owned(a, "sqrt");
    const Matrix& x = node(a).value.mat();
    if (x.size() > 0 && x.minCoeff() < 0.0)
        throw DomainError("sqrt: negative entry");
    return unary(OpKind::sqrt, a, Tensor(Matrix(x.array().sqrt().matrix())));
}

VarId Tape::abs(VarId a) {
    check_owned(a, "abs");
    return unary(OpKind::abs, a, Tensor(Matrix(node(a).value.mat().cwiseAbs())));
}

VarId Tape::transpose(VarId a) {
    check_owned(a, "transpose");
    return unary(OpKind::transpose, a, Tensor(Matrix(node(a).value.mat().transpose())));
}

VarId Tape::row_select(VarId a, std::vector<Index> rows) {
    check_owned(a, "row-select");
    const Matrix& x = node(a).value.mat();
    for (Index r : rows)
        if (r < 0 || r >= x.rows())
            throw DimensionError("row-select: row index out of range");
    Matrix out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = x.row(rows[k]);
    VarId id = unary(OpKind::row_select, a, Tensor(std::move(out)));
    nodes_[id.index].rows = std::make_shared<const std::vector<Index>>(std::move(rows));
    return id;
}

VarId Tape::reduce_sum(VarId a) {
    check_owned(a, "reduce-sum");
    return unary(OpKind::reduce_sum, a, Tensor::scalar(node(a).value.mat().sum()));
}

VarId Tape::reduce_mean(VarId a) {
    check_owned(a, "reduce-mean");
    const Matrix& x = node(a).value.mat();
    if (x.size() == 0) throw ContractError("reduce-mean: empty tensor");
    return unary(OpKind::reduce_mean, a, Tensor::scalar(x.mean()));
}

VarId Tape::masked_fill(VarId a, std::vector<std::uint8_t> mask, double value) {
    check_owned(a, "masked-fill");
    const Matrix& x = node(a).value.mat();
    if (static_cast<Index>(mask.size()) != x.size())
        throw DimensionError("masked-fill: mask size does not match tensor size");
    Matrix out = x;
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < x.cols(); ++j)
            if (mask[static_cast<std::size_t>(i * x.cols() + j)]) out(i, j) = value;
    VarId id = unary(OpKind::masked_fill, a, Tensor(std::move(out)));
    nodes_[id.index].mask = std::make_shared<const std::vector<std::uint8_t>>(std::move(mask));
    nodes_[id.index].scalar = value;
    return id;
}

VarId Tape::clamp_min(VarId a, double lo) {
    check_owned(a, "clamp-min");
    VarId id = unary(OpKind::clamp_min, a, Tensor(Matrix(node(a).value.mat().cwiseMax(lo))));
    nodes_[id.index].scalar = lo;
    return id;
}

VarId Tape::scatter_edges(VarId weights, const std::vector<std::pair<int, int>>& edges, int n) {
    check_owned(weights, "scatter-edges");
    const Tensor& w = node(weights).value;
    if (w.cols() != 1 || w.rows() != static_cast<Index>(edges.size()))
        throw DimensionError("scatter-edges: weights must be |E| x 1");
    Matrix out = Matrix::Zero(n, n);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [i, j] = edges[e];
        if (i < 0 || j < 0 || i >= n || j >= n || i == j)
            throw ContractError("scatter-edges: invalid edge");
        out(i, j) = w(static_cast<Index>(e), 0);
        out(j, i) = w(static_cast<Index>(e), 0);
    }
    VarId id = unary(OpKind::scatter_edges, weights, Tensor(std::move(out)));
    nodes_[id.index].edges = std::make_shared<const std::vector<std::pair<int, int>>>(edges);
    nodes_[id.index].scatter_n = n;
    return id;
}

const Tensor& Tape::value(VarId v) const {
    check_owned(v, "value");
    return node(v).value;
}

bool Tape::requires_grad(VarId v) const {
    check_owned(v, "requires_grad");
    return node(v).requires_grad;
}

bool GradientMap::contains(VarId v) const {
    return v.tape_tag == tape_tag_ && grads_.count(v.index) > 0;
}

const Tensor& GradientMap::at(VarId v) const {
    if (v.tape_tag != tape_tag_)
        throw ContractError("GradientMap::at: VarId from a different tape");
    auto it = grads_.find(v.index);
    if (it == grads_.end()) throw ContractError("GradientMap::at: no gradient for variable");
    return it->second;
}

GradientMap Tape::backward(VarId root, std::span<const VarId> also_report) const {
    check_owned(root, "backward");
    const Node& root_node = node(root);
    if (!root_node.value.is_scalar())
        throw ContractError("backward: root must be a 1x1 scalar");

    std::vector<Matrix> grad(root.index + 1);
    std::vector<char> has(root.index + 1, 0);
    grad[root.index] = Matrix::Constant(1, 1, 1.0);
    has[root.index] = 1;

    auto accumulate = [&](std::uint32_t idx, Matrix g) {
        if (!nodes_[idx].requires_grad) return;
        if (has[idx]) {
            grad[idx] += g;
        } else {
            grad[idx] = std::move(g);
            has[idx] = 1;
        }
    };

    for (std::uint32_t idx = root.index + 1; idx-- > 0;) {
        if (!has[idx]) continue;
        const Node& nd = nodes_[idx];
        if (nd.op == OpKind::leaf) continue;
        if (!nd.requires_grad) continue;
        const Matrix& g = grad[idx];
        const std::uint32_t p0 = nd.parents[0];
        const std::uint32_t p1 = nd.parents[1];
        const Matrix& x0 = nodes_[p0].value.mat();

        switch (nd.op) {
            case OpKind::matmul: {
                const Matrix& x1 = nodes_[p1].value.mat();
                if (nodes_[p0].requires_grad) accumulate(p0, Matrix(g * x1.transpose()));
                if (nodes_[p1].requires_grad) accumulate(p1, Matrix(x0.transpose() * g));
                break;
            }
            case OpKind::add:
                if (nodes_[p0].requires_grad) accumulate(p0, g);
                if (nodes_[p1].requires_grad) accumulate(p1, g);
                break;
            case OpKind::subtract:
                if (nodes_[p0].requires_grad) accumulate(p0, g);
                if (nodes_[p1].requires_grad) accumulate(p1, Matrix(-g));
                break;
            case OpKind::hadamard: {
                const Matrix& x1 = nodes_[p1].value.mat();
                if (nodes_[p0].requires_grad) accumulate(p0, Matrix(g.cwiseProduct(x1)));
                if (nodes_[p1].requires_grad) accumulate(p1, Matrix(g.cwiseProduct(x0)));
                break;
            }
            case OpKind::scalar_scale:
                accumulate(p0, Matrix(g * nd.scalar));
                break;
            case OpKind::broadcast_add_row:
                if (nodes_[p0].requires_grad) accumulate(p0, g);
                if (nodes_[p1].requires_grad) accumulate(p1, Matrix(g.colwise().sum()));
                break;
            case OpKind::relu: {
                // subgradient at 0 is 0
                Matrix m = (x0.array() > 0.0).cast<double>();
                accumulate(p0, Matrix(g.cwiseProduct(m)));
                break;
            }
            case OpKind::softmax_rows: {
                const Matrix& y = nd.value.mat();
                Matrix gy = g.cwiseProduct(y);
                Eigen::VectorXd rowdot = gy.rowwise().sum();
                Matrix out = gy - y.cwiseProduct(rowdot.replicate(1, y.cols()));
                accumulate(p0, std::move(out));
                break;
            }
            case OpKind::log:
                accumulate(p0, Matrix(g.cwiseQuotient(x0)));
                break;
            case OpKind::exp:
                accumulate(p0, Matrix(g.cwiseProduct(nd.value.mat())));
                break;
            case OpKind::square:
                accumulate(p0, Matrix(2.0 * g.cwiseProduct(x0)));
                break;
            case OpKind::sqrt:
                accumulate(p0, Matrix(0.5 * g.cwiseQuotient(nd.value.mat())));
                break;
            case OpKind::abs: {
                Matrix s = x0.array().sign().matrix();
                accumulate(p0, Matrix(g.cwiseProduct(s)));
                break;
            }
            case OpKind::transpose:
                accumulate(p0, Matrix(g.transpose()));
                break;
            case OpKind::row_select: {
                Matrix out = Matrix::Zero(x0.rows(), x0.cols());
                const auto& rows = *nd.rows;
                for (std::size_t k = 0; k < rows.size(); ++k)
                    out.row(rows[k]) += g.row(static_cast<Index>(k));
                accumulate(p0, std::move(out));
                break;
            }
            case OpKind::reduce_sum:
                accumulate(p0, Matrix(Matrix::Constant(x0.rows(), x0.cols(), g(0, 0))));
                break;
            case OpKind::reduce_mean:
                accumulate(p0, Matrix(Matrix::Constant(x0.rows(), x0.cols(),
                                                       g(0, 0) / static_cast<double>(x0.size()))));
                break;
            case OpKind::masked_fill: {
                Matrix out = g;
                const auto& mask = *nd.mask;
                for (Index i = 0; i < out.rows(); ++i)
                    for (Index j = 0; j < out.cols(); ++j)
                        if (mask[static_cast<std::size_t>(i * out.cols() + j)]) out(i, j) = 0.0;
                accumulate(p0, std::move(out));
                break;
            }
            case OpKind::clamp_min: {
                Matrix m = (x0.array() > nd.scalar).cast<double>();
                accumulate(p0, Matrix(g.cwiseProduct(m)));
                break;
            }
            case OpKind::scatter_edges: {
                const auto& edges = *nd.edges;
                Matrix out(static_cast<Index>(edges.size()), 1);
                for (std::size_t e = 0; e < edges.size(); ++e) {
                    const auto [i, j] = edges[e];
                    out(static_cast<Index>(e), 0) = g(i, j) + g(j, i);
                }
                accumulate(p0, std::move(out));
                break;
            }
            case OpKind::leaf:
                break;
        }
        // Inner-node gradients are not needed once their parents received
        // contributions, unless explicitly requested below; free eagerly.
        bool keep = false;
        for (VarId v : also_report)
            if (v.index == idx) keep = true;
        if (!keep) {
            grad[idx].resize(0, 0);
            has[idx] = 2;  // visited, released
        }
    }

    GradientMap result;
    result.tape_tag_ = tag_;
    for (std::uint32_t idx = 0; idx <= root.index; ++idx) {
        if (has[idx] != 1) continue;
        if (nodes_[idx].op == OpKind::leaf && nodes_[idx].requires_grad)
            result.grads_.emplace(idx, Tensor(std::move(grad[idx])));
    }
    for (VarId v : also_report) {
        check_owned(v, "backward");
        if (v.index <= root.index && has[v.index] == 1 && result.grads_.count(v.index) == 0)
            result.grads_.emplace(v.index, Tensor(std::move(grad[v.index])));
    }
    return result;
}

}  // namespace scarcegrad
