#pragma once

#include <vector>

#include "scarcegrad/tensor.hpp"

namespace scarcegrad {

struct JacobiResult {
    std::vector<double> eigenvalues;  // ascending
    Matrix eigenvectors;              // columns, aligned with eigenvalues; empty unless requested
    int sweeps = 0;
};

// Cyclic Jacobi rotations for a symmetric matrix. Iterates full sweeps until
// the off-diagonal Frobenius norm falls below off_tol (relative to the input
// norm). Quadratically convergent and simple, but the rotation updates are
// cache-hostile; use it up to a few hundred rows.
JacobiResult jacobi_eigenvalues(const Matrix& sym, double off_tol = 1e-12,
                                bool with_vectors = false);

// Householder tridiagonalization followed by implicit-shift QL, eigenvalues
// only, ascending. Handles the larger systems the rotation scheme cannot.
std::vector<double> symmetric_eigenvalues(const Matrix& sym);

}  // namespace scarcegrad
