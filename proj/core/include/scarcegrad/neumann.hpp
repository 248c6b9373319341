#pragma once

#include <optional>
#include <vector>

#include "scarcegrad/graph.hpp"
#include "scarcegrad/tensor.hpp"

namespace scarcegrad {

// B = S_in/|V_tr| + lambda L/|E| together with the quantities derived from it.
struct RegularizedSystem {
    Matrix b;                 // n x n symmetric
    double lambda = 0.0;
    std::size_t n_train = 0;  // |V_tr|
    std::size_t edge_count = 0;
    double y_inf = 0.0;       // ||Y_obs||_inf
    Matrix s_in_y_obs;        // S_in/|V_tr| * Y_obs (n x c)
    std::vector<int> v_tr;

    static RegularizedSystem build(const WeightedGraph& g, const Tensor& y_obs,
                                   const std::vector<int>& v_tr, double lambda);
};

struct SpectralSummary {
    double mu_min = 0.0;
    double mu_max = 0.0;
    double mu = 0.0;  // mu_min / mu_max
    double nu = 0.0;  // 1 - mu
};

// Extreme eigenvalues of B via cyclic Jacobi; verifies the eigenvalue bounds
// 0 < mu_min and mu_max <= 1/|V_tr| + 2 lambda up to 1e-9.
SpectralSummary spectral_bounds(const RegularizedSystem& sys);

// Y = B^{-1} S_in/|V_tr| Y_obs via a direct SPD solve. Requires a connected
// support and lambda > 0.
Tensor closed_form_solve(const WeightedGraph& g, const Tensor& y_obs,
                         const std::vector<int>& v_tr, double lambda);

// Truncated expansion Y = sum_r T_r with T_r = (I - B/mu_max)^r mu_max^{-1}
// S_in/|V_tr| Y_obs. Stops when ||T_r||_F <= tol or r reaches r_max.
class NeumannSeries {
public:
    static NeumannSeries compute(const RegularizedSystem& sys, const SpectralSummary& spectral,
                                 int r_max, double tol);

    const std::vector<Matrix>& terms() const { return terms_; }
    const Matrix& propagator() const { return p_; }  // I - B/mu_max
    double mu_max() const { return mu_max_; }
    double nu() const { return nu_; }
    bool converged() const { return converged_; }
    double tail_bound() const;  // bound on || sum of dropped terms ||
    Matrix sum() const;

    // (I - B/mu_max)^m, cached; intended for small systems only.
    const Matrix& power(int m) const;

private:
    std::vector<Matrix> terms_;
    Matrix p_;
    double mu_max_ = 0.0;
    double nu_ = 0.0;
    bool converged_ = false;
    mutable std::vector<Matrix> powers_;
};

// Literal evaluation of the derivative of (T_r)_u with respect to the
// symmetric edge weight A_ij: the four-term sum over h = 1..r scaled by
// -lambda/(|E| mu_max). Single label column only.
double analytic_dTr(const RegularizedSystem& sys, const NeumannSeries& series, int r, int u,
                    int i, int j);

struct AnalyticHypergrad {
    double value = 0.0;
    bool truncated = false;  // series stopped at r_max before reaching tol
};

// dF_out/dA_ij for the MSE outer loss (1/|V_out|) ||S_out(Y - Y_obs)||^2,
// assembled from the series term derivatives.
AnalyticHypergrad analytic_hypergradient(const RegularizedSystem& sys,
                                         const NeumannSeries& series, const Tensor& y_obs,
                                         const std::vector<int>& v_out, int i, int j);

// Per-edge sweep; `threads` <= 0 means use all hardware threads.
std::vector<AnalyticHypergrad> analytic_hypergradient_sweep(
    const RegularizedSystem& sys, const NeumannSeries& series, const Tensor& y_obs,
    const std::vector<int>& v_out, const std::vector<std::pair<int, int>>& edges, int threads);

// Exponential decay envelope on |dF_out/dA_ij| for an edge whose endpoints are
// at least q hops from V_tr and k hops from V_out, scaled by the configured
// absolute constant.
double decay_envelope(const RegularizedSystem& sys, const SpectralSummary& spectral,
                         std::size_t n_out, int q, int k, double c_abs);

// Edge-level wrapper computing q and k from BFS distances. Returns 0 when the
// edge's component holds no V_out node (the true hypergradient is then zero);
// returns +infinity when distances are infinite but V_out is present.
double decay_envelope_for_edge(const RegularizedSystem& sys, const SpectralSummary& spectral,
                                  const SupportPattern& support, const std::vector<int>& v_tr,
                                  const std::vector<int>& v_out, int i, int j, double c_abs);

}  // namespace scarcegrad
