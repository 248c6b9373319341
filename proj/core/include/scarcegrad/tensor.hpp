#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <initializer_list>

#include "scarcegrad/errors.hpp"
#include "scarcegrad/rng.hpp"

namespace scarcegrad {

// All dense storage is float64 row-major.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Dense float64 matrix value. Thin wrapper over an Eigen row-major matrix;
// immutable by convention once handed to a Tape.
class Tensor {
public:
    Tensor() : m_(0, 0) {}
    Tensor(Index rows, Index cols) : m_(Matrix::Zero(rows, cols)) {}
    explicit Tensor(Matrix m) : m_(std::move(m)) {}

    static Tensor zeros(Index rows, Index cols) { return Tensor(rows, cols); }
    static Tensor constant(Index rows, Index cols, double v) {
        return Tensor(Matrix::Constant(rows, cols, v));
    }
    static Tensor identity(Index n) { return Tensor(Matrix(Matrix::Identity(n, n))); }
    static Tensor scalar(double v) { return constant(1, 1, v); }
    static Tensor ones(Index rows, Index cols) { return constant(rows, cols, 1.0); }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const Index r = static_cast<Index>(rows.size());
        const Index c = r > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
        Matrix m(r, c);
        Index i = 0;
        for (const auto& row : rows) {
            if (static_cast<Index>(row.size()) != c)
                throw DimensionError("Tensor::from_rows: ragged rows");
            Index j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return Tensor(std::move(m));
    }

    static Tensor random_uniform(Index rows, Index cols, Rng& rng, double lo = 0.0,
                                 double hi = 1.0) {
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
        return Tensor(std::move(m));
    }

    Index rows() const { return m_.rows(); }
    Index cols() const { return m_.cols(); }
    Index size() const { return m_.size(); }
    bool is_scalar() const { return m_.rows() == 1 && m_.cols() == 1; }

    double operator()(Index i, Index j) const { return m_(i, j); }
    double& operator()(Index i, Index j) { return m_(i, j); }
    double scalar_value() const {
        if (!is_scalar()) throw ContractError("Tensor::scalar_value: tensor is not 1x1");
        return m_(0, 0);
    }

    Matrix& mat() { return m_; }
    const Matrix& mat() const { return m_; }

    bool all_finite() const { return m_.allFinite(); }
    double max_abs() const { return m_.size() == 0 ? 0.0 : m_.cwiseAbs().maxCoeff(); }
    double frobenius() const { return m_.norm(); }

private:
    Matrix m_;
};

}  // namespace scarcegrad
