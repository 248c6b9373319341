#include <doctest.h>

#include <cmath>

#include "scarcegrad/grad_check.hpp"
#include "scarcegrad/inner_models.hpp"
#include "scarcegrad/rng.hpp"

using namespace scarcegrad;

namespace {

Tensor symmetric_adjacency(Rng& rng, int n, double density = 0.5) {
    Tensor a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < density) {
                const double w = rng.uniform(0.1, 1.0);
                a(i, j) = w;
                a(j, i) = w;
            }
    return a;
}

std::vector<Tensor> random_gcn_tensors(Rng& rng, const GcnShape& shape) {
    std::vector<Tensor> flat;
    for (int l = 0; l < shape.layer_count(); ++l) {
        flat.push_back(Tensor::random_uniform(shape.dim_in(l), shape.dim_out(l), rng, -1, 1));
        flat.push_back(Tensor::random_uniform(shape.dim_in(l), shape.dim_out(l), rng, -1, 1));
        flat.push_back(Tensor::random_uniform(1, shape.dim_out(l), rng, -1, 1));
    }
    return flat;
}

LabeledTargets regression_targets(Rng& rng, int n, const std::vector<int>& labelled) {
    LabeledTargets t;
    t.y_obs = Tensor(n, 1);
    t.mask.assign(static_cast<std::size_t>(n), 0);
    for (int v : labelled) {
        t.y_obs(v, 0) = rng.uniform();
        t.mask[static_cast<std::size_t>(v)] = 1;
    }
    return t;
}

LabeledTargets classification_targets(Rng& rng, int n, int c,
                                      const std::vector<int>& labelled) {
    LabeledTargets t;
    t.y_obs = Tensor(n, c);
    t.mask.assign(static_cast<std::size_t>(n), 0);
    for (int v : labelled) {
        t.y_obs(v, static_cast<Index>(rng.uniform_int(0, c - 1))) = 1.0;
        t.mask[static_cast<std::size_t>(v)] = 1;
    }
    return t;
}

}  // namespace

TEST_CASE("single layer with zero adjacency ignores the graph") {
    Rng rng(2);
    GcnShape shape{3, {}, 2};
    Tape tape;
    GcnParams params = gcn_params_from_tensors(tape, shape, random_gcn_tensors(rng, shape));
    Tensor x = Tensor::random_uniform(5, 3, rng);
    VarId out = gcn_forward(tape, params, tape.constant(Tensor::zeros(5, 5)),
                            tape.constant(x));

    const Matrix expected = x.mat() * tape.value(params.layers[0].w1).mat() +
                            Matrix(Matrix::Ones(5, 1) * tape.value(params.layers[0].b).mat());
    CHECK((tape.value(out).mat() - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("single layer with zero input and zero bias is zero") {
    Rng rng(4);
    GcnShape shape{3, {}, 2};
    std::vector<Tensor> flat = random_gcn_tensors(rng, shape);
    flat[2] = Tensor::zeros(1, 2);  // bias
    Tape tape;
    GcnParams params = gcn_params_from_tensors(tape, shape, flat);
    VarId out = gcn_forward(tape, params, tape.constant(symmetric_adjacency(rng, 5)),
                            tape.constant(Tensor::zeros(5, 3)));
    CHECK(tape.value(out).max_abs() == 0.0);
}

TEST_CASE("two-layer output is independent of edges two hops away from a node") {
    // 5-node path; with W held fixed, output row 0 cannot depend on any
    // adjacency entry whose endpoints are both at least 2 hops from node 0
    Rng rng(6);
    GcnShape shape{2, {3}, 1};
    std::vector<Tensor> flat = random_gcn_tensors(rng, shape);
    Tensor x = Tensor::random_uniform(5, 2, rng);
    Tensor a(5, 5);
    for (int i = 0; i + 1 < 5; ++i) {
        a(i, i + 1) = rng.uniform(0.2, 1.0);
        a(i + 1, i) = a(i, i + 1);
    }

    auto forward_row0 = [&](const Tensor& adj) {
        Tape tape;
        GcnParams params = gcn_params_from_tensors(tape, shape, flat);
        VarId out = gcn_forward(tape, params, tape.constant(adj), tape.constant(x));
        return tape.value(out)(0, 0);
    };

    const double base = forward_row0(a);
    const double h = 1e-4;
    for (int i = 2; i < 5; ++i) {
        for (int j = 2; j < 5; ++j) {
            if (i == j) continue;
            Tensor perturbed = a;
            perturbed(i, j) += h;
            perturbed(j, i) += h;
            CHECK(forward_row0(perturbed) == base);
        }
    }
    // a nearby edge does change the output
    Tensor nearby = a;
    nearby(0, 1) += h;
    nearby(1, 0) += h;
    CHECK(forward_row0(nearby) != base);
}

TEST_CASE("gcn is equivariant to node relabeling") {
    Rng rng(8);
    GcnShape shape{3, {4}, 2};
    std::vector<Tensor> flat = random_gcn_tensors(rng, shape);
    const int n = 7;
    Tensor a = symmetric_adjacency(rng, n);
    Tensor x = Tensor::random_uniform(n, 3, rng);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);

    Tensor pa(n, n);
    Tensor px(n, 3);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) pa(i, j) = a(perm[i], perm[j]);
        for (int j = 0; j < 3; ++j) px(i, j) = x(perm[i], j);
    }

    Tape t1;
    VarId out1 = gcn_forward(t1, gcn_params_from_tensors(t1, shape, flat), t1.constant(a),
                             t1.constant(x));
    Tape t2;
    VarId out2 = gcn_forward(t2, gcn_params_from_tensors(t2, shape, flat), t2.constant(pa),
                             t2.constant(px));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(std::abs(t2.value(out2)(i, j) - t1.value(out1)(perm[i], j)) <= 1e-12);
}

TEST_CASE("mse loss vanishes when predictions equal targets") {
    Rng rng(10);
    const std::vector<int> nodes{0, 2, 3};
    LabeledTargets targets = regression_targets(rng, 5, nodes);
    Tape tape;
    VarId pred = tape.constant(targets.y_obs);
    VarId loss = masked_loss(tape, pred, targets, nodes, LossKind::mse);
    CHECK(tape.value(loss).scalar_value() == 0.0);
}

TEST_CASE("cce loss of uniform logits is ln(c)") {
    Rng rng(12);
    const int c = 4;
    const std::vector<int> nodes{0, 1};
    LabeledTargets targets = classification_targets(rng, 3, c, nodes);
    Tape tape;
    VarId pred = tape.constant(Tensor::zeros(3, c));
    VarId loss = masked_loss(tape, pred, targets, nodes, LossKind::cce);
    CHECK(tape.value(loss).scalar_value() == doctest::Approx(std::log(c)).epsilon(1e-12));
}

TEST_CASE("masked losses match a direct per-node summation oracle") {
    Rng rng(14);
    const int n = 9;
    const int c = 3;
    const std::vector<int> nodes{1, 3, 4, 7};
    LabeledTargets targets = classification_targets(rng, n, c, nodes);
    Tensor pred = Tensor::random_uniform(n, c, rng, -2.0, 2.0);

    Tape tape;
    VarId pv = tape.constant(pred);
    const double got_mse =
        tape.value(masked_loss(tape, pv, targets, nodes, LossKind::mse)).scalar_value();
    const double got_cce =
        tape.value(masked_loss(tape, pv, targets, nodes, LossKind::cce)).scalar_value();

    double want_mse = 0.0;
    double want_cce = 0.0;
    for (int v : nodes) {
        double denom = 0.0;
        for (int j = 0; j < c; ++j) denom += std::exp(pred(v, j));
        for (int j = 0; j < c; ++j) {
            const double d = pred(v, j) - targets.y_obs(v, j);
            want_mse += d * d;
            if (targets.y_obs(v, j) != 0.0)
                want_cce -= std::log(std::exp(pred(v, j)) / denom);
        }
    }
    want_mse /= static_cast<double>(nodes.size());
    want_cce /= static_cast<double>(nodes.size());
    CHECK(got_mse == doctest::Approx(want_mse).epsilon(1e-12));
    CHECK(got_cce == doctest::Approx(want_cce).epsilon(1e-12));
}

TEST_CASE("masked loss contracts") {
    Rng rng(16);
    LabeledTargets targets = regression_targets(rng, 4, {0, 1});
    Tape tape;
    VarId pred = tape.constant(Tensor::zeros(4, 1));
    CHECK_THROWS_AS(masked_loss(tape, pred, targets, {}, LossKind::mse), ContractError);
    CHECK_THROWS_AS(masked_loss(tape, pred, targets, {2}, LossKind::mse), ContractError);
}

TEST_CASE("laplacian regularizer term is zero for constant labels") {
    Rng rng(18);
    Tensor a = symmetric_adjacency(rng, 6);
    LabeledTargets targets;
    targets.y_obs = Tensor::constant(6, 1, 0.4);
    targets.mask.assign(6, 1);
    Tape tape;
    VarId y = tape.constant(Tensor::constant(6, 1, 0.4));
    VarId obj = laplacian_reg_objective(tape, y, tape.constant(a), targets, {0, 1}, 2.5, 7);
    CHECK(tape.value(obj).scalar_value() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("two-node laplacian objective equals lambda for a unit jump") {
    LabeledTargets targets;
    targets.y_obs = Tensor::from_rows({{0.0}, {1.0}});
    targets.mask.assign(2, 1);
    Tensor a = Tensor::from_rows({{0.0, 1.0}, {1.0, 0.0}});
    Tape tape;
    VarId y = tape.constant(Tensor::from_rows({{0.0}, {1.0}}));
    const double lambda = 1.7;
    // fit term is 0 (Y matches on V_tr), so only lambda * 1 / |E| remains
    VarId obj = laplacian_reg_objective(tape, y, tape.constant(a), targets, {0, 1}, lambda, 1);
    CHECK(tape.value(obj).scalar_value() == doctest::Approx(lambda).epsilon(1e-12));
}

TEST_CASE("laplacian objective matches a double-loop oracle") {
    Rng rng(20);
    const int n = 8;
    const std::vector<int> v_tr{0, 2, 5};
    Tensor a = symmetric_adjacency(rng, n);
    LabeledTargets targets = regression_targets(rng, n, v_tr);
    Tensor y = Tensor::random_uniform(n, 1, rng);
    const double lambda = 0.8;
    const std::size_t edges = 11;

    Tape tape;
    VarId obj = laplacian_reg_objective(tape, tape.constant(y), tape.constant(a), targets,
                                        v_tr, lambda, edges);

    double fit = 0.0;
    for (int v : v_tr) fit += (y(v, 0) - targets.y_obs(v, 0)) * (y(v, 0) - targets.y_obs(v, 0));
    fit /= static_cast<double>(v_tr.size());
    double quad = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            quad += a(i, j) * (y(i, 0) - y(j, 0)) * (y(i, 0) - y(j, 0));
    const double want = fit + lambda * quad / static_cast<double>(edges);
    CHECK(tape.value(obj).scalar_value() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("laplacian objective rejects an edgeless graph and nonpositive lambda") {
    LabeledTargets targets;
    targets.y_obs = Tensor::zeros(2, 1);
    targets.mask.assign(2, 1);
    Tape tape;
    VarId y = tape.constant(Tensor::zeros(2, 1));
    VarId a = tape.constant(Tensor::zeros(2, 2));
    CHECK_THROWS_AS(laplacian_reg_objective(tape, y, a, targets, {0}, 1.0, 0), ContractError);
    CHECK_THROWS_AS(laplacian_reg_objective(tape, y, a, targets, {0}, 0.0, 3), ContractError);
}

TEST_CASE("regularizer term alone is invariant to constant label shifts") {
    Rng rng(22);
    const int n = 6;
    Tensor a = symmetric_adjacency(rng, n);
    Tensor y = Tensor::random_uniform(n, 1, rng);
    Tensor y_shift(Matrix(y.mat().array() + 3.7));

    auto reg_value = [&](const Tensor& labels) {
        Tape tape;
        VarId yv = tape.constant(labels);
        VarId av = tape.constant(a);
        VarId deg = tape.matmul(av, tape.constant(Tensor::ones(n, 1)));
        VarId dy = tape.hadamard(deg, yv);
        VarId ly = tape.subtract(dy, tape.matmul(av, yv));
        return tape.value(tape.reduce_sum(tape.hadamard(yv, ly))).scalar_value();
    };
    const double r0 = reg_value(y);
    const double r1 = reg_value(y_shift);
    CHECK(std::abs(r0 - r1) <= 1e-10 * std::max(1.0, std::abs(r0)));
}

TEST_CASE("gcn inner gradient is zero when predictions already match on V_tr") {
    // zero weights and biases give zero predictions; zero targets on V_tr give
    // a zero learning signal
    GcnShape shape{2, {3}, 1};
    std::vector<Tensor> flat;
    for (int l = 0; l < shape.layer_count(); ++l) {
        flat.push_back(Tensor::zeros(shape.dim_in(l), shape.dim_out(l)));
        flat.push_back(Tensor::zeros(shape.dim_in(l), shape.dim_out(l)));
        flat.push_back(Tensor::zeros(1, shape.dim_out(l)));
    }
    Rng rng(24);
    const int n = 5;
    LabeledTargets targets;
    targets.y_obs = Tensor::zeros(n, 1);
    targets.mask.assign(n, 1);

    Tape tape;
    GcnParams params = gcn_params_from_tensors(tape, shape, flat);
    VarId a = tape.constant(symmetric_adjacency(rng, n));
    VarId x = tape.constant(Tensor::random_uniform(n, 2, rng));
    InnerGradWorkspace ws = make_inner_grad_workspace(tape, a, x);
    GcnGradients grads =
        inner_grad_gcn(tape, params, a, x, targets, {0, 1, 2}, LossKind::mse, ws);
    for (VarId g : grads.flatten()) CHECK(tape.value(g).max_abs() == 0.0);
}

TEST_CASE("hand-derived gcn gradient matches tape backward to 1e-10") {
    Rng rng(26);
    GcnShape shape{3, {4}, 2};
    const int n = 6;
    const std::vector<int> v_tr{0, 1, 4};

    for (int trial = 0; trial < 50; ++trial) {
        const LossKind kind = trial % 2 == 0 ? LossKind::cce : LossKind::mse;
        LabeledTargets targets = classification_targets(rng, n, 2, v_tr);
        Tensor a = symmetric_adjacency(rng, n);
        Tensor x = Tensor::random_uniform(n, 3, rng);
        std::vector<Tensor> flat = random_gcn_tensors(rng, shape);

        Tape tape;
        GcnParams params = gcn_params_from_tensors(tape, shape, flat, true);
        VarId av = tape.constant(a);
        VarId xv = tape.constant(x);

        VarId pred = gcn_forward(tape, params, av, xv);
        VarId loss = masked_loss(tape, pred, targets, v_tr, kind);
        GradientMap ad = tape.backward(loss);

        InnerGradWorkspace ws = make_inner_grad_workspace(tape, av, xv);
        GcnGradients hand = inner_grad_gcn(tape, params, av, xv, targets, v_tr, kind, ws);

        const std::vector<VarId> param_vars = params.flatten();
        const std::vector<VarId> hand_vars = hand.flatten();
        for (std::size_t k = 0; k < param_vars.size(); ++k) {
            const Tensor& want = ad.at(param_vars[k]);
            const Tensor& got = tape.value(hand_vars[k]);
            const double scale = std::max(1.0, want.max_abs());
            CHECK((got.mat() - want.mat()).cwiseAbs().maxCoeff() <= 1e-10 * scale);
        }
    }
}

TEST_CASE("hand-derived gcn gradient matches finite differences") {
    Rng rng(28);
    GcnShape shape{2, {3}, 2};
    const int n = 6;
    const std::vector<int> v_tr{0, 3};
    LabeledTargets targets = classification_targets(rng, n, 2, v_tr);
    Tensor a = symmetric_adjacency(rng, n);
    Tensor x = Tensor::random_uniform(n, 2, rng);
    std::vector<Tensor> flat = random_gcn_tensors(rng, shape);

    // hand gradient values
    Tape tape;
    GcnParams params = gcn_params_from_tensors(tape, shape, flat);
    VarId av = tape.constant(a);
    VarId xv = tape.constant(x);
    InnerGradWorkspace ws = make_inner_grad_workspace(tape, av, xv);
    GcnGradients hand = inner_grad_gcn(tape, params, av, xv, targets, v_tr, LossKind::cce, ws);

    // finite differences of the objective for each parameter tensor
    for (std::size_t k = 0; k < flat.size(); ++k) {
        std::vector<double> at;
        for (Index i = 0; i < flat[k].rows(); ++i)
            for (Index j = 0; j < flat[k].cols(); ++j) at.push_back(flat[k](i, j));

        auto objective = [&](const std::vector<double>& params_flat) {
            std::vector<Tensor> probe = flat;
            std::size_t c = 0;
            for (Index i = 0; i < probe[k].rows(); ++i)
                for (Index j = 0; j < probe[k].cols(); ++j) probe[k](i, j) = params_flat[c++];
            Tape t;
            GcnParams p = gcn_params_from_tensors(t, shape, probe);
            VarId pred = gcn_forward(t, p, t.constant(a), t.constant(x));
            return t.value(masked_loss(t, pred, targets, v_tr, LossKind::cce)).scalar_value();
        };
        const std::vector<double> fd = central_fd(objective, at, 1e-6);

        const Tensor& got = tape.value(hand.flatten()[k]);
        std::size_t c = 0;
        for (Index i = 0; i < got.rows(); ++i)
            for (Index j = 0; j < got.cols(); ++j) {
                CHECK(std::abs(got(i, j) - fd[c]) <= 1e-5 * std::max(1.0, std::abs(fd[c])));
                ++c;
            }
    }
}

TEST_CASE("hand-derived label gradient matches tape backward and finite differences") {
    Rng rng(30);
    const int n = 7;
    const std::vector<int> v_tr{0, 2};
    const double lambda = 1.3;
    const std::size_t edges = 9;

    for (int trial = 0; trial < 50; ++trial) {
        Tensor a = symmetric_adjacency(rng, n);
        LabeledTargets targets = regression_targets(rng, n, v_tr);
        Tensor y = Tensor::random_uniform(n, 1, rng);

        Tape tape;
        VarId yv = tape.leaf(y, true);
        VarId av = tape.constant(a);
        VarId obj = laplacian_reg_objective(tape, yv, av, targets, v_tr, lambda, edges);
        GradientMap ad = tape.backward(obj);

        VarId hand = inner_grad_labels(tape, yv, av, targets, v_tr, lambda, edges);
        const Tensor& got = tape.value(hand);
        const Tensor& want = ad.at(yv);
        const double scale = std::max(1.0, want.max_abs());
        CHECK((got.mat() - want.mat()).cwiseAbs().maxCoeff() <= 1e-10 * scale);

        if (trial == 0) {
            std::vector<double> at;
            for (Index i = 0; i < n; ++i) at.push_back(y(i, 0));
            auto objective = [&](const std::vector<double>& labels) {
                Tensor probe(n, 1);
                for (Index i = 0; i < n; ++i) probe(i, 0) = labels[static_cast<std::size_t>(i)];
                Tape t;
                return t
                    .value(laplacian_reg_objective(t, t.constant(probe), t.constant(a),
                                                   targets, v_tr, lambda, edges))
                    .scalar_value();
            };
            const std::vector<double> fd = central_fd(objective, at, 1e-6);
            for (Index i = 0; i < n; ++i)
                CHECK(std::abs(got(i, 0) - fd[static_cast<std::size_t>(i)]) <=
                      1e-6 * std::max(1.0, std::abs(fd[static_cast<std::size_t>(i)])));
        }
    }
}
