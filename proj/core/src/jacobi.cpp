#include "scarcegrad/jacobi.hpp"

#include <algorithm>
#include <cmath>

#include "scarcegrad/errors.hpp"

namespace scarcegrad {

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = i + 1; j < a.cols(); ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
}

}  // namespace

namespace {

void check_symmetric(const Matrix& sym, const char* who) {
    const double asym = (sym - Matrix(sym.transpose())).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * std::max(1.0, sym.cwiseAbs().maxCoeff()))
        throw ContractError(std::string(who) + ": matrix is not symmetric");
}

}  // namespace

JacobiResult jacobi_eigenvalues(const Matrix& sym, double off_tol, bool with_vectors) {
    const Index n = sym.rows();
    if (sym.cols() != n) throw DimensionError("jacobi_eigenvalues: matrix must be square");
    if (n == 0) return {};
    check_symmetric(sym, "jacobi_eigenvalues");

    Matrix a = sym;
    Matrix v;
    if (with_vectors) v = Matrix::Identity(n, n);
    const double scale = std::max(1.0, a.norm());
    const int max_sweeps = 100;

    Eigen::RowVectorXd rp(n), rq(n);
    JacobiResult result;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double off = off_diagonal_norm(a);
        if (off <= off_tol * scale) break;
        result.sweeps = sweep + 1;
        // rotate everything in early sweeps only when the pivot is significant
        const double thresh =
            sweep < 3 ? 0.2 * off / (static_cast<double>(n) * static_cast<double>(n)) : 0.0;
        for (Index p = 0; p < n - 1; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                const double small = 1e-20 * std::max(std::abs(a(p, p)), std::abs(a(q, q)));
                if (std::abs(apq) <= small) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                if (std::abs(apq) < thresh) continue;

                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                                     : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                // rows of G A (vectorized, contiguous in row-major storage)
                rp = c * a.row(p) - s * a.row(q);
                rq = s * a.row(p) + c * a.row(q);
                // 2x2 pivot block of G A G^T
                const double app = c * rp(p) - s * rp(q);
                const double aqq = s * rq(p) + c * rq(q);
                rp(p) = app;
                rp(q) = 0.0;  // rotation zeroes the pivot exactly
                rq(p) = 0.0;
                rq(q) = aqq;
                a.row(p) = rp;
                a.row(q) = rq;
                // mirror into the columns to keep the matrix symmetric
                a.col(p) = rp.transpose();
                a.col(q) = rq.transpose();

                if (with_vectors) {
                    for (Index k = 0; k < n; ++k) {
                        const double vkp = v(k, p);
                        const double vkq = v(k, q);
                        v(k, p) = c * vkp - s * vkq;
                        v(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) < a(y, y); });

    result.eigenvalues.resize(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < order.size(); ++k)
        result.eigenvalues[k] = a(order[k], order[k]);
    if (with_vectors) {
        result.eigenvectors.resize(n, n);
        for (std::size_t k = 0; k < order.size(); ++k)
            result.eigenvectors.col(static_cast<Index>(k)) = v.col(order[k]);
    }
    return result;
}

std::vector<double> symmetric_eigenvalues(const Matrix& sym) {
    const Index n = sym.rows();
    if (sym.cols() != n)
        throw DimensionError("symmetric_eigenvalues: matrix must be square");
    if (n == 0) return {};
    check_symmetric(sym, "symmetric_eigenvalues");

    Matrix a = sym;
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);

    // Householder reduction to tridiagonal form (values only)
    for (Index i = n - 1; i >= 1; --i) {
        const Index l = i - 1;
        double h = 0.0;
        if (l > 0) {
            double scale = 0.0;
            for (Index k = 0; k <= l; ++k) scale += std::abs(a(i, k));
            if (scale == 0.0) {
                e[static_cast<std::size_t>(i)] = a(i, l);
            } else {
                for (Index k = 0; k <= l; ++k) {
                    a(i, k) /= scale;
                    h += a(i, k) * a(i, k);
                }
                double f = a(i, l);
                const double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
                e[static_cast<std::size_t>(i)] = scale * g;
                h -= f * g;
                a(i, l) = f - g;
                f = 0.0;
                for (Index j = 0; j <= l; ++j) {
                    double gj = 0.0;
                    for (Index k = 0; k <= j; ++k) gj += a(j, k) * a(i, k);
                    for (Index k = j + 1; k <= l; ++k) gj += a(k, j) * a(i, k);
                    e[static_cast<std::size_t>(j)] = gj / h;
                    f += e[static_cast<std::size_t>(j)] * a(i, j);
                }
                const double hh = f / (h + h);
                for (Index j = 0; j <= l; ++j) {
                    f = a(i, j);
                    const double gj = e[static_cast<std::size_t>(j)] - hh * f;
                    e[static_cast<std::size_t>(j)] = gj;
                    for (Index k = 0; k <= j; ++k)
                        a(j, k) -= f * e[static_cast<std::size_t>(k)] + gj * a(i, k);
                }
            }
        } else {
            e[static_cast<std::size_t>(i)] = a(i, l);
        }
        d[static_cast<std::size_t>(i)] = h;
    }
    for (Index i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = a(i, i);

    // implicit-shift QL on the tridiagonal
    for (Index i = 1; i < n; ++i) e[static_cast<std::size_t>(i - 1)] = e[static_cast<std::size_t>(i)];
    e[static_cast<std::size_t>(n - 1)] = 0.0;
    for (Index l = 0; l < n; ++l) {
        int iterations = 0;
        Index m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[static_cast<std::size_t>(m)]) +
                                  std::abs(d[static_cast<std::size_t>(m + 1)]);
                if (std::abs(e[static_cast<std::size_t>(m)]) <=
                    std::numeric_limits<double>::epsilon() * dd)
                    break;
            }
            if (m != l) {
                if (iterations++ == 60)
                    throw InternalConsistencyError(
                        "symmetric_eigenvalues: QL iteration failed to converge");
                double g = (d[static_cast<std::size_t>(l + 1)] - d[static_cast<std::size_t>(l)]) /
                           (2.0 * e[static_cast<std::size_t>(l)]);
                double r = std::hypot(g, 1.0);
                g = d[static_cast<std::size_t>(m)] - d[static_cast<std::size_t>(l)] +
                    e[static_cast<std::size_t>(l)] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0;
                double c = 1.0;
                double p = 0.0;
                Index i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[static_cast<std::size_t>(i)];
                    const double b = c * e[static_cast<std::size_t>(i)];
                    r = std::hypot(f, g);
                    e[static_cast<std::size_t>(i + 1)] = r;
                    if (r == 0.0) {
                        d[static_cast<std::size_t>(i + 1)] -= p;
                        e[static_cast<std::size_t>(m)] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[static_cast<std::size_t>(i + 1)] - p;
                    r = (d[static_cast<std::size_t>(i)] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[static_cast<std::size_t>(i + 1)] = g + p;
                    g = c * r - b;
                }
                if (r == 0.0 && i >= l) continue;
                d[static_cast<std::size_t>(l)] -= p;
                e[static_cast<std::size_t>(l)] = g;
                e[static_cast<std::size_t>(m)] = 0.0;
            }
        } while (m != l);
    }

    std::sort(d.begin(), d.end());
    return d;
}

}  // namespace scarcegrad
