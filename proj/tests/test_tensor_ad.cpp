#include <doctest.h>

#include <cmath>

#include "scarcegrad/grad_check.hpp"
#include "scarcegrad/lab.hpp"
#include "scarcegrad/rng.hpp"
#include "scarcegrad/tape.hpp"

using namespace scarcegrad;

namespace {

Tensor random_tensor(Rng& rng, Index r, Index c, double lo = -1.0, double hi = 1.0) {
    return Tensor::random_uniform(r, c, rng, lo, hi);
}

}  // namespace

TEST_CASE("matmul by identity returns the operand") {
    Rng rng(7);
    Tape tape;
    Tensor m = random_tensor(rng, 2, 2);
    VarId id2 = tape.constant(Tensor::identity(2));
    VarId mv = tape.constant(m);
    VarId out = tape.matmul(id2, mv);
    CHECK(tape.value(out).mat() == m.mat());
}

TEST_CASE("relu forward clamps negatives") {
    Tape tape;
    VarId x = tape.constant(Tensor::from_rows({{-1.0, 2.0}}));
    const Tensor& y = tape.value(tape.relu(x));
    CHECK(y(0, 0) == 0.0);
    CHECK(y(0, 1) == 2.0);
}

TEST_CASE("softmax of a constant row is uniform") {
    Tape tape;
    VarId x = tape.constant(Tensor::from_rows({{0.0, 0.0}}));
    const Tensor& y = tape.value(tape.softmax_rows(x));
    CHECK(y(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("backward of sum of squares is 2x") {
    Tape tape;
    VarId x = tape.leaf(Tensor::from_rows({{3.0}}), true);
    VarId root = tape.reduce_sum(tape.square(x));
    GradientMap grads = tape.backward(root);
    CHECK(grads.at(x)(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("backward of sum(matmul) matches finite differences") {
    Rng rng(11);
    Tensor b = random_tensor(rng, 2, 3);
    auto build = [](Tape& t, const std::vector<VarId>& in) {
        return t.reduce_sum(t.matmul(in[0], in[1]));
    };
    const double err = grad_check(build, {Tensor::identity(2), b}, 1e-6);
    CHECK(err <= 1e-5);
}

TEST_CASE("fused softmax cross-entropy gradient is softmax minus onehot") {
    Rng rng(13);
    Tensor z = random_tensor(rng, 4, 3, -2.0, 2.0);
    Tensor onehot(4, 3);
    for (int i = 0; i < 4; ++i) onehot(i, static_cast<Index>(rng.uniform_int(0, 2))) = 1.0;

    Tape tape;
    VarId zv = tape.leaf(z, true);
    VarId probs = tape.clamp_min(tape.softmax_rows(zv), 1e-300);
    VarId picked = tape.hadamard(tape.log(probs), tape.constant(onehot));
    VarId root = tape.scalar_scale(tape.reduce_sum(picked), -1.0);
    GradientMap grads = tape.backward(root);

    const Tensor& sm = tape.value(tape.softmax_rows(zv));
    const Tensor& g = grads.at(zv);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 3; ++j)
            CHECK(g(i, j) == doctest::Approx(sm(i, j) - onehot(i, j)).epsilon(1e-12));

    // cross-checked against finite differences
    auto build = [onehot](Tape& t, const std::vector<VarId>& in) {
        VarId p = t.clamp_min(t.softmax_rows(in[0]), 1e-300);
        return t.scalar_scale(t.reduce_sum(t.hadamard(t.log(p), t.constant(onehot))), -1.0);
    };
    CHECK(grad_check(build, {z}, 1e-6) <= 1e-5);
}

TEST_CASE("grad_check on the squared Frobenius norm") {
    Rng rng(17);
    auto build = [](Tape& t, const std::vector<VarId>& in) {
        return t.reduce_sum(t.square(in[0]));
    };
    CHECK(grad_check(build, {random_tensor(rng, 3, 3)}, 1e-6) <= 1e-6);
}

TEST_CASE("grad_check of a constant function is zero") {
    auto build = [](Tape& t, const std::vector<VarId>&) {
        return t.constant(Tensor::scalar(4.2));
    };
    CHECK(grad_check(build, {Tensor::from_rows({{1.0, 2.0}})}, 1e-6) == 0.0);
}

TEST_CASE("grad_check rejects an out-of-range step size") {
    auto build = [](Tape& t, const std::vector<VarId>& in) { return t.reduce_sum(in[0]); };
    CHECK_THROWS_AS(grad_check(build, {Tensor::scalar(1.0)}, 0.1), ContractError);
    CHECK_THROWS_AS(grad_check(build, {Tensor::scalar(1.0)}, 0.0), ContractError);
}

TEST_CASE("backward requires a scalar root") {
    Tape tape;
    VarId x = tape.leaf(Tensor::from_rows({{1.0, 2.0}}), true);
    VarId y = tape.square(x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("shape mismatch errors name the primitive") {
    Tape tape;
    VarId a = tape.constant(Tensor::zeros(2, 3));
    VarId b = tape.constant(Tensor::zeros(2, 3));
    try {
        tape.matmul(a, b);
        FAIL("expected a dimension error");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    }
    CHECK_THROWS_AS(tape.add(a, tape.constant(Tensor::zeros(3, 2))), DimensionError);
    CHECK_THROWS_AS(tape.broadcast_add_row(a, tape.constant(Tensor::zeros(1, 2))),
                    DimensionError);
}

TEST_CASE("domain contracts fire on bad entries") {
    Tape tape;
    CHECK_THROWS_AS(tape.log(tape.constant(Tensor::from_rows({{0.0}}))), DomainError);
    CHECK_THROWS_AS(tape.log(tape.constant(Tensor::from_rows({{-1.0}}))), DomainError);
    CHECK_THROWS_AS(tape.sqrt(tape.constant(Tensor::from_rows({{-1e-8}}))), DomainError);
    CHECK_THROWS_AS(tape.exp(tape.constant(Tensor::from_rows({{800.0}}))), DomainError);
}

TEST_CASE("cross-tape variables are rejected") {
    Tape a;
    Tape b;
    VarId x = a.constant(Tensor::scalar(1.0));
    CHECK_THROWS_AS(b.square(x), ContractError);
}

TEST_CASE("a tape supports several backward passes") {
    Tape tape;
    VarId x = tape.leaf(Tensor::from_rows({{2.0}}), true);
    VarId sq = tape.square(x);
    VarId root1 = tape.reduce_sum(sq);
    VarId root2 = tape.reduce_sum(tape.scalar_scale(sq, 3.0));
    GradientMap g1 = tape.backward(root1);
    GradientMap g2 = tape.backward(root2);
    GradientMap g1_again = tape.backward(root1);
    CHECK(g1.at(x)(0, 0) == doctest::Approx(4.0));
    CHECK(g2.at(x)(0, 0) == doctest::Approx(12.0));
    CHECK(g1_again.at(x)(0, 0) == g1.at(x)(0, 0));
}

TEST_CASE("backward is linear in the root") {
    Rng rng(23);
    const double a = 1.7;
    const double b = -0.6;
    Tensor x = random_tensor(rng, 3, 3, 0.2, 2.0);
    Tensor c = random_tensor(rng, 3, 3);

    Tape tape;
    VarId xv = tape.leaf(x, true);
    VarId f = tape.reduce_sum(tape.square(xv));
    VarId g = tape.reduce_sum(tape.hadamard(xv, tape.constant(c)));
    VarId combo = tape.add(tape.scalar_scale(f, a), tape.scalar_scale(g, b));

    GradientMap gf = tape.backward(f);
    GradientMap gg = tape.backward(g);
    GradientMap gc = tape.backward(combo);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) {
            const double expected = a * gf.at(xv)(i, j) + b * gg.at(xv)(i, j);
            const double got = gc.at(xv)(i, j);
            CHECK(std::abs(got - expected) <=
                  1e-12 * std::max(1.0, std::abs(expected)));
        }
}

TEST_CASE("identical seeds give bit-identical gradients") {
    auto compute = [] {
        Rng rng(99);
        Tape tape;
        VarId x = tape.leaf(Tensor::random_uniform(4, 4, rng), true);
        VarId w = tape.constant(Tensor::random_uniform(4, 2, rng));
        VarId root = tape.reduce_sum(tape.square(tape.matmul(tape.relu(x), w)));
        return tape.backward(root).at(x);
    };
    const Tensor g1 = compute();
    const Tensor g2 = compute();
    REQUIRE(g1.rows() == g2.rows());
    for (Index i = 0; i < g1.rows(); ++i)
        for (Index j = 0; j < g1.cols(); ++j) CHECK(g1(i, j) == g2(i, j));
}

TEST_CASE("masked entries receive no gradient") {
    Tape tape;
    VarId x = tape.leaf(Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}}), true);
    VarId filled = tape.masked_fill(x, {1, 0, 0, 1}, 0.0);
    GradientMap grads = tape.backward(tape.reduce_sum(filled));
    CHECK(grads.at(x)(0, 0) == 0.0);
    CHECK(grads.at(x)(0, 1) == 1.0);
    CHECK(grads.at(x)(1, 0) == 1.0);
    CHECK(grads.at(x)(1, 1) == 0.0);
}

TEST_CASE("scatter-edges builds a symmetric adjacency and gathers gradients") {
    Tape tape;
    VarId w = tape.leaf(Tensor::from_rows({{0.7}, {0.2}}), true);
    VarId a = tape.scatter_edges(w, {{0, 1}, {1, 2}}, 3);
    const Tensor& av = tape.value(a);
    CHECK(av(0, 1) == 0.7);
    CHECK(av(1, 0) == 0.7);
    CHECK(av(1, 2) == 0.2);
    CHECK(av(0, 2) == 0.0);
    CHECK(av(0, 0) == 0.0);

    // asymmetric downstream weights still accumulate both mirrored entries
    Tensor c(3, 3);
    c(0, 1) = 2.0;
    c(1, 0) = 5.0;
    GradientMap grads =
        tape.backward(tape.reduce_sum(tape.hadamard(a, tape.constant(c))));
    CHECK(grads.at(w)(0, 0) == doctest::Approx(7.0));
    CHECK(grads.at(w)(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("small grad-check battery stays within tolerance") {
    GradCheckReport report = run_grad_check_battery(1234, 10);
    for (const auto& item : report.items) {
        INFO(item.name);
        CHECK(item.max_rel_error <= 1e-5);
    }
}
