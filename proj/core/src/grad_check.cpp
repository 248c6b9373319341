#include "scarcegrad/grad_check.hpp"

#include <cmath>

#include "scarcegrad/errors.hpp"

namespace scarcegrad {

namespace {

double eval_at(const TapeBuilder& build, const std::vector<Tensor>& point) {
    Tape tape;
    std::vector<VarId> leaves;
    leaves.reserve(point.size());
    for (const Tensor& t : point) leaves.push_back(tape.leaf(t, false));
    VarId root = build(tape, leaves);
    return tape.value(root).scalar_value();
}

}  // namespace

double grad_check(const TapeBuilder& build, const std::vector<Tensor>& point, double h) {
    if (!(h > 0.0) || h > 1e-3) throw ContractError("grad_check: h must lie in (0, 1e-3]");

    Tape tape;
    std::vector<VarId> leaves;
    leaves.reserve(point.size());
    for (const Tensor& t : point) leaves.push_back(tape.leaf(t, true));
    VarId root = build(tape, leaves);
    GradientMap grads = tape.backward(root);

    double worst = 0.0;
    for (std::size_t k = 0; k < point.size(); ++k) {
        const Tensor& x = point[k];
        for (Index i = 0; i < x.rows(); ++i) {
            for (Index j = 0; j < x.cols(); ++j) {
                std::vector<Tensor> plus = point;
                std::vector<Tensor> minus = point;
                plus[k](i, j) += h;
                minus[k](i, j) -= h;
                const double fd = (eval_at(build, plus) - eval_at(build, minus)) / (2.0 * h);
                const double ad =
                    grads.contains(leaves[k]) ? grads.at(leaves[k])(i, j) : 0.0;
                const double err = std::abs(ad - fd) / std::max(1.0, std::abs(fd));
                worst = std::max(worst, err);
            }
        }
    }
    return worst;
}

std::vector<double> central_fd(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& at, double h) {
    std::vector<double> grad(at.size());
    for (std::size_t i = 0; i < at.size(); ++i) {
        std::vector<double> plus = at;
        std::vector<double> minus = at;
        plus[i] += h;
        minus[i] -= h;
        grad[i] = (f(plus) - f(minus)) / (2.0 * h);
    }
    return grad;
}

}  // namespace scarcegrad
