#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scarcegrad/tensor.hpp"

namespace scarcegrad {

// Primitive operations recordable on a tape. The named set (matmul .. clamp_min)
// is the public surface; scatter_edges is a structural primitive used by the
// bilevel engine to build a symmetric adjacency from per-edge weights.
enum class OpKind : std::uint8_t {
    leaf,
    matmul,
    add,
    subtract,
    hadamard,
    scalar_scale,
    broadcast_add_row,
    relu,
    softmax_rows,
    log,
    exp,
    square,
    sqrt,
    abs,
    transpose,
    row_select,
    reduce_sum,
    reduce_mean,
    masked_fill,
    clamp_min,
    scatter_edges,
};

const char* op_name(OpKind op);

// Opaque handle into one tape's variable table. Valid for exactly the tape
// that issued it; cross-tape use is rejected.
struct VarId {
    std::uint32_t index = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t tape_tag = 0;

    bool valid() const { return index != std::numeric_limits<std::uint32_t>::max(); }
    friend bool operator==(VarId a, VarId b) {
        return a.index == b.index && a.tape_tag == b.tape_tag;
    }
};

class Tape;

// Gradients of one backward pass, keyed by VarId.
class GradientMap {
public:
    bool contains(VarId v) const;
    const Tensor& at(VarId v) const;

private:
    friend class Tape;
    std::uint32_t tape_tag_ = 0;
    std::unordered_map<std::uint32_t, Tensor> grads_;
};

// Define-by-run reverse-mode differentiation tape. Forward values are computed
// eagerly at record time; backward() replays the node list in reverse and
// accumulates gradients without mutating the tape, so a tape can serve several
// backward passes. Single-threaded during construction.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    VarId leaf(Tensor value, bool requires_grad = false);
    VarId constant(Tensor value) { return leaf(std::move(value), false); }

    VarId matmul(VarId a, VarId b);
    VarId add(VarId a, VarId b);
    VarId subtract(VarId a, VarId b);
    VarId hadamard(VarId a, VarId b);
    VarId scalar_scale(VarId a, double factor);
    // a (n x c) plus a broadcast 1 x c row
    VarId broadcast_add_row(VarId a, VarId row);
    VarId relu(VarId a);
    VarId softmax_rows(VarId a);
    VarId log(VarId a);   // entries must be strictly positive
    VarId exp(VarId a);   // entries must stay below the overflow threshold
    VarId square(VarId a);
    VarId sqrt(VarId a);  // entries must be nonnegative
    VarId abs(VarId a);
    VarId transpose(VarId a);
    VarId row_select(VarId a, std::vector<Index> rows);
    VarId reduce_sum(VarId a);
    VarId reduce_mean(VarId a);
    // entries where mask != 0 are replaced by `value` and receive no gradient
    VarId masked_fill(VarId a, std::vector<std::uint8_t> mask, double value);
    VarId clamp_min(VarId a, double lo);
    // weights is |E| x 1; produces a symmetric n x n with weights[e] written at
    // both (i_e, j_e) and (j_e, i_e), zero elsewhere
    VarId scatter_edges(VarId weights, const std::vector<std::pair<int, int>>& edges, int n);

    // The reference stays valid for the tape's lifetime (node storage never
    // relocates on append).
    const Tensor& value(VarId v) const;
    bool requires_grad(VarId v) const;
    std::size_t size() const { return nodes_.size(); }

    // Reverse pass from a scalar root. Returns gradients for every leaf marked
    // as requiring gradient; `also_report` adds chosen intermediate variables.
    GradientMap backward(VarId root) const { return backward(root, {}); }
    GradientMap backward(VarId root, std::span<const VarId> also_report) const;

private:
    struct Node {
        OpKind op = OpKind::leaf;
        std::array<std::uint32_t, 2> parents{0, 0};
        std::uint8_t num_parents = 0;
        double scalar = 0.0;  // scale factor / fill value / clamp bound
        std::shared_ptr<const std::vector<Index>> rows;
        std::shared_ptr<const std::vector<std::uint8_t>> mask;
        std::shared_ptr<const std::vector<std::pair<int, int>>> edges;
        int scatter_n = 0;
        Tensor value;
        bool requires_grad = false;
    };

    VarId push(Node node);
    const Node& node(VarId v) const;
    void check_owned(VarId v, const char* op) const;
    VarId unary(OpKind op, VarId a, Tensor value);
    VarId binary(OpKind op, VarId a, VarId b, Tensor value);

    std::deque<Node> nodes_;
    std::uint32_t tag_;
};

}  // namespace scarcegrad
