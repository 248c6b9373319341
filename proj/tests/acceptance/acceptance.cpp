// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// gating criterion fails. Criterion 10 (Cora accuracy table) is explicitly
// non-gating and runs only when SCARCEGRAD_CORA_DIR points at the raw files.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scarcegrad/bilevel.hpp"
#include "scarcegrad/grad_check.hpp"
#include "scarcegrad/lab.hpp"
#include "scarcegrad/neumann.hpp"
#include "scarcegrad/rng.hpp"

using namespace scarcegrad;

namespace {

struct CriterionResult {
    int id;
    std::string name;
    bool pass = false;
    bool gating = true;
    std::string detail;
    double seconds = 0.0;
};

std::vector<CriterionResult> g_results;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds, bool gating = true) {
    g_results.push_back({id, name, pass, gating, detail, seconds});
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", pass ? "PASS" : (gating ? "FAIL" : "warn"),
                id, name.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
}

std::filesystem::path work_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "scarcegrad_acceptance";
    std::filesystem::create_directories(dir);
    return dir;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------

void criterion1_gradient_engine() {
    Timer timer;
    GradCheckReport rep = run_grad_check_battery(20240801, 100);
    const double worst = rep.worst();
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%zu items x 100 instances, worst rel err %.3e (tol 1e-5)",
                  rep.items.size(), worst);
    report(1, "gradient engine vs finite differences", worst <= 1e-5, detail,
           timer.seconds());
}

void criterion2_exact_zero_hypergradients() {
    Timer timer;
    ExperimentConfig cfg;
    cfg.dataset = "cheaters";
    cfg.dataset_seed = 0;
    cfg.inner_model = "gcn";
    cfg.parameterization = "direct";
    cfg.outer_seed = 0;
    cfg.tau_out = 10;
    cfg.snapshot_iterations = {9};
    cfg.out_dir = (work_dir() / "c2_baseline").string();
    RunArtifacts artifacts = run(cfg);

    const HypergradProfile& profile = artifacts.profiles.front();
    long far_edges = 0;
    long far_violations = 0;
    long near_strong = 0;
    double max_far = 0.0;
    for (std::size_t e = 0; e < profile.edges.size(); ++e) {
        const bool far = profile.distances[e] == kUnreachable || profile.distances[e] >= 2;
        if (far) {
            ++far_edges;
            max_far = std::max(max_far, profile.abs_grad[e]);
            if (profile.abs_grad[e] > 1e-12) ++far_violations;
        } else if (profile.abs_grad[e] > 1e-8) {
            ++near_strong;
        }
    }
    const bool pass = far_edges > 0 && far_violations == 0 && near_strong >= 1;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "%ld far edges, %ld above 1e-12 (max %.2e); %ld near edges above 1e-8",
                  far_edges, far_violations, max_far, near_strong);
    report(2, "exact zero hypergradients beyond the receptive field", pass, detail,
           timer.seconds());
}

void criterion3_weight_independence() {
    Timer timer;
    // 12-node path with two chords among the far nodes; V_tr at one end
    const int n = 12;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    edges.emplace_back(5, 7);
    edges.emplace_back(8, 10);
    SupportPattern support = SupportPattern::from_pairs(n, std::move(edges));

    Rng rng(3);
    Dataset ds;
    ds.n = n;
    ds.p = 3;
    ds.c = 2;
    ds.task = TaskKind::classification;
    ds.x = Tensor::random_uniform(n, 3, rng);
    ds.a_obs = WeightedGraph::unit(support);
    ds.class_of.resize(static_cast<std::size_t>(n));
    ds.labels_full = Tensor(n, 2);
    for (int i = 0; i < n; ++i) {
        ds.class_of[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 1));
        ds.labels_full(i, ds.class_of[static_cast<std::size_t>(i)]) = 1.0;
    }
    ds.split.train = {0, 1};
    ds.split.outer = {11};
    ds.targets.mask.assign(static_cast<std::size_t>(n), 0);
    ds.targets.y_obs = Tensor(n, 2);
    for (int v : {0, 1, 11}) {
        ds.targets.mask[static_cast<std::size_t>(v)] = 1;
        for (int j = 0; j < 2; ++j) ds.targets.y_obs(v, j) = ds.labels_full(v, j);
    }

    const GcnShape shape{3, {4}, 2};  // k = 2 rounds of message passing
    const int tau_in = 50;
    const double h = 1e-4;
    const std::uint64_t inner_seed = 314;

    // unrolls inner training and snapshots every parameter tensor at every step
    auto weight_trajectory = [&](const Tensor& adjacency) {
        Tape tape;
        Rng init_rng(inner_seed);
        GcnParams params = init_gcn_params(tape, shape, init_rng);
        VarId a = tape.constant(adjacency);
        VarId x = tape.constant(ds.x);
        InnerGradWorkspace ws = make_inner_grad_workspace(tape, a, x);
        TapeOptimizer opt(OptimizerKind::adam, 1e-2);
        std::vector<Tensor> snapshots;
        for (int t = 0; t < tau_in; ++t) {
            GcnGradients grads =
                inner_grad_gcn(tape, params, a, x, ds.targets, ds.split.train, LossKind::cce, ws);
            params = GcnParams::from_flat(shape,
                                          opt.step(tape, params.flatten(), grads.flatten()));
            for (VarId p : params.flatten()) snapshots.push_back(tape.value(p));
        }
        return snapshots;
    };

    const Tensor base_a = ds.a_obs.adjacency();
    const std::vector<Tensor> base = weight_trajectory(base_a);

    const auto d_tr = hop_distances(support, ds.split.train);
    long tested_edges = 0;
    double worst = 0.0;
    for (const auto& [i, j] : support.edges) {
        if (std::min(d_tr[static_cast<std::size_t>(i)], d_tr[static_cast<std::size_t>(j)]) < 2)
            continue;
        ++tested_edges;
        Tensor perturbed = base_a;
        perturbed(i, j) += h;
        perturbed(j, i) += h;
        const std::vector<Tensor> probe = weight_trajectory(perturbed);
        for (std::size_t k = 0; k < base.size(); ++k)
            worst = std::max(worst,
                             (probe[k].mat() - base[k].mat()).cwiseAbs().maxCoeff());
    }
    const bool pass = tested_edges > 0 && worst <= 1e-9;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%ld far edges perturbed, max W_t change %.2e over %d steps (tol 1e-9)",
                  tested_edges, worst, tau_in);
    report(3, "trained weights independent of far edges", pass, detail, timer.seconds());
}

void criterion4_eigenvalue_bounds() {
    Timer timer;
    Rng rng(4);
    long violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 8 + static_cast<int>(rng.uniform_int(0, 40));
        // path backbone with random chords keeps the graph connected
        std::vector<std::pair<int, int>> edges;
        for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        for (int i = 0; i < n; ++i)
            for (int j = i + 2; j < n; ++j)
                if (rng.uniform() < 0.1) edges.emplace_back(i, j);
        SupportPattern s = SupportPattern::from_pairs(n, std::move(edges));
        std::vector<double> w(s.edge_count());
        for (double& x : w) x = rng.uniform(0.1, 1.0);
        WeightedGraph g = WeightedGraph::with_weights(s, w);

        const int n_tr = 1 + static_cast<int>(rng.uniform_int(0, n / 2));
        std::vector<int> v_tr;
        for (int i = 0; i < n_tr; ++i) v_tr.push_back(i);
        const double lambda = rng.uniform(0.1, 3.0);
        Tensor y_obs = Tensor::random_uniform(n, 1, rng);

        try {
            RegularizedSystem sys = RegularizedSystem::build(g, y_obs, v_tr, lambda);
            SpectralSummary spectral = spectral_bounds(sys);
            const double upper = 1.0 / static_cast<double>(n_tr) + 2.0 * lambda + 1e-9;
            if (!(spectral.mu_min > 0.0) || spectral.mu_max > upper) ++violations;
        } catch (const InternalConsistencyError&) {
            ++violations;
        }
    }

    // the generated regression dataset at its published size
    Dataset ds = gen_synthetic1(0);
    bool synth_ok = true;
    double synth_mu_min = 0.0;
    double synth_mu_max = 0.0;
    try {
        RegularizedSystem sys =
            RegularizedSystem::build(ds.a_obs, ds.targets.y_obs, ds.split.train, 1.0);
        SpectralSummary spectral = spectral_bounds(sys);
        synth_mu_min = spectral.mu_min;
        synth_mu_max = spectral.mu_max;
        synth_ok = spectral.mu_min > 0.0 &&
                   synth_mu_max <= 1.0 / 100.0 + 2.0 + 1e-9;
    } catch (const InternalConsistencyError&) {
        synth_ok = false;
    }

    const bool pass = violations == 0 && synth_ok;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "50 random graphs: %ld violations; synthetic-1: mu_min %.3e, mu_max %.4f "
                  "(cap %.4f)",
                  violations, synth_mu_min, synth_mu_max, 1.0 / 100.0 + 2.0);
    report(4, "eigenvalue bounds of the regularized system", pass, detail, timer.seconds());
}

void criterion5_neumann_equivalence() {
    Timer timer;
    bool pass = true;
    std::string detail;
    Rng rng(5);

    for (const int n : {16, 32, 64}) {
        // random connected graph
        std::vector<std::pair<int, int>> edges;
        for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        for (int i = 0; i < n; ++i)
            for (int j = i + 2; j < n; ++j)
                if (rng.uniform() < 6.0 / n) edges.emplace_back(i, j);
        SupportPattern s = SupportPattern::from_pairs(n, std::move(edges));
        std::vector<double> w(s.edge_count());
        for (double& x : w) x = rng.uniform(0.2, 1.0);
        WeightedGraph g = WeightedGraph::with_weights(s, w);

        Dataset ds;
        ds.n = n;
        ds.p = 1;
        ds.c = 1;
        ds.task = TaskKind::regression;
        ds.x = Tensor::zeros(n, 1);
        ds.a_obs = g;
        ds.labels_full = Tensor::random_uniform(n, 1, rng);
        ds.split.train = {0, n / 3, 2 * n / 3, n - 2};
        ds.split.outer = {1, n / 2, n - 1};
        ds.targets.mask.assign(static_cast<std::size_t>(n), 0);
        ds.targets.y_obs = Tensor(n, 1);
        for (int v : ds.split.train) {
            ds.targets.mask[static_cast<std::size_t>(v)] = 1;
            ds.targets.y_obs(v, 0) = ds.labels_full(v, 0);
        }
        for (int v : ds.split.outer) {
            ds.targets.mask[static_cast<std::size_t>(v)] = 1;
            ds.targets.y_obs(v, 0) = ds.labels_full(v, 0);
        }

        RegularizedSystem sys =
            RegularizedSystem::build(g, ds.targets.y_obs, ds.split.train, 1.0);
        SpectralSummary spectral = spectral_bounds(sys);
        NeumannSeries series = NeumannSeries::compute(sys, spectral, 2000000, 1e-14);

        // (a) against central finite differences of the closed-form pipeline
        auto outer_mse = [&](const std::vector<double>& weights) {
            WeightedGraph probe = g;
            probe.weights = weights;
            Tensor y = closed_form_solve(probe, ds.targets.y_obs, ds.split.train, 1.0);
            double total = 0.0;
            for (int v : ds.split.outer) {
                const double d = y(v, 0) - ds.targets.y_obs(v, 0);
                total += d * d;
            }
            return total / static_cast<double>(ds.split.outer.size());
        };
        // h = 1e-4 keeps the central difference above the solver's roundoff
        const std::vector<double> fd = central_fd(outer_mse, g.weights, 1e-4);
        double worst_fd = 0.0;
        for (std::size_t e = 0; e < g.support.edges.size(); ++e) {
            const auto [i, j] = g.support.edges[e];
            const double got =
                analytic_hypergradient(sys, series, ds.targets.y_obs, ds.split.outer, i, j)
                    .value;
            if (std::abs(fd[e]) <= 1e-9) continue;  // below the fd noise floor
            const double err = std::abs(got - fd[e]) / std::abs(fd[e]);
            worst_fd = std::max(worst_fd, err);
            if (err > 1e-5) pass = false;
        }

        // (b) against the unrolled autodiff engine at inner convergence
        OuterConfig cfg;
        cfg.model.kind = InnerModelSpec::Kind::laplacian;
        cfg.model.loss = LossKind::mse;
        cfg.model.lambda = 1.0;
        cfg.outer_loss = LossKind::mse;
        cfg.inner_opt = OptimizerKind::gd;
        cfg.eta_in = 1.0 / (spectral.mu_max + spectral.mu_min);
        cfg.tau_in = 25000;
        DirectEdges d;
        d.support = g.support;
        d.weights = g.weights;
        HypergradResult hg = hypergradient(cfg, ds, d, 777);

        double worst_ad = 0.0;
        for (std::size_t e = 0; e < g.support.edges.size(); ++e) {
            const auto [i, j] = g.support.edges[e];
            if (std::abs(hg.param_grad[e]) <= 1e-12) continue;
            const double analytic =
                analytic_hypergradient(sys, series, ds.targets.y_obs, ds.split.outer, i, j)
                    .value;
            const double err =
                std::abs(analytic - hg.param_grad[e]) / std::abs(hg.param_grad[e]);
            worst_ad = std::max(worst_ad, err);
            if (err > 1e-3) pass = false;
        }
        char buf[120];
        std::snprintf(buf, sizeof(buf), "n=%d: fd %.2e, unrolled %.2e; ", n, worst_fd,
                      worst_ad);
        detail += buf;
    }
    report(5, "analytic oracle vs finite differences and unrolled autodiff", pass, detail,
           timer.seconds());
}

void criterion6_decay_envelope() {
    Timer timer;
    ExperimentConfig cfg;
    cfg.dataset = "synthetic1";
    cfg.dataset_seed = 0;
    cfg.synthetic_n = 512;
    // reduced size keeps the expected node degree of the published dataset
    cfg.synthetic_sigma = 0.06 * std::sqrt(1536.0 / 512.0);
    cfg.inner_model = "laplacian";
    cfg.parameterization = "direct";
    cfg.outer_seed = 0;
    cfg.tau_out = 7;
    cfg.snapshot_iterations = {6};
    cfg.out_dir = (work_dir() / "c6_synthetic1").string();
    RunArtifacts artifacts = run(cfg);

    const HypergradProfile& profile = artifacts.profiles.front();
    const Dataset& ds = artifacts.dataset;

    // the learned graph at the snapshot iteration backs the spectral envelope
    const std::vector<double>& weights6 = artifacts.result.weight_history[6];
    WeightedGraph g6 = WeightedGraph::with_weights(ds.a_obs.support, weights6);
    RegularizedSystem sys =
        RegularizedSystem::build(g6, ds.targets.y_obs, ds.split.train, 1.0);
    SpectralSummary spectral = spectral_bounds(sys);

    const auto d_tr = hop_distances(ds.a_obs.support, ds.split.train);
    const auto d_out = hop_distances(ds.a_obs.support, ds.split.outer);

    std::map<int, double> bucket_max;
    long envelope_violations = 0;
    double worst_ratio = 0.0;
    for (std::size_t e = 0; e < profile.edges.size(); ++e) {
        const auto [i, j] = profile.edges[e];
        const int dist = profile.distances[e];
        if (dist != kUnreachable) {
            auto& m = bucket_max[dist];
            m = std::max(m, profile.abs_grad[e]);
        }
        const int q = std::min(d_tr[static_cast<std::size_t>(i)],
                               d_tr[static_cast<std::size_t>(j)]);
        const int k = std::min(d_out[static_cast<std::size_t>(i)],
                               d_out[static_cast<std::size_t>(j)]);
        const double envelope = decay_envelope(sys, spectral, ds.split.outer.size(), q, k,
                                                  16.0);
        if (profile.abs_grad[e] > envelope) ++envelope_violations;
        if (envelope > 0.0)
            worst_ratio = std::max(worst_ratio, profile.abs_grad[e] / envelope);
    }

    std::vector<double> xs, ys;
    for (const auto& [dist, max_g] : bucket_max) {
        if (max_g <= 0.0) continue;
        xs.push_back(static_cast<double>(dist));
        ys.push_back(std::log(max_g));
    }
    const double slope = xs.size() >= 2 ? ls_slope(xs, ys) : 0.0;

    const bool pass = xs.size() >= 3 && slope < 0.0 && envelope_violations == 0;
    char detail[220];
    std::snprintf(detail, sizeof(detail),
                  "%zu distance buckets, log-slope %.3f; envelope violations %ld "
                  "(worst |g|/bound %.2e, mu %.2e)",
                  xs.size(), slope, envelope_violations, worst_ratio, spectral.mu);
    report(6, "exponential hypergradient decay under the quadratic model", pass, detail,
           timer.seconds());
}

void criterion7_term_derivative_zeros() {
    Timer timer;
    Rng rng(7);
    const int n = 20;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    for (int i = 0; i < n; ++i)
        for (int j = i + 2; j < n; ++j)
            if (rng.uniform() < 0.08) edges.emplace_back(i, j);
    SupportPattern s = SupportPattern::from_pairs(n, std::move(edges));
    std::vector<double> w(s.edge_count());
    for (double& x : w) x = rng.uniform(0.2, 1.0);
    WeightedGraph g = WeightedGraph::with_weights(s, w);
    Tensor y_obs = Tensor::random_uniform(n, 1, rng);
    const std::vector<int> v_tr{0, 9};
    const double lambda = 1.0;

    RegularizedSystem sys = RegularizedSystem::build(g, y_obs, v_tr, lambda);
    SpectralSummary spectral = spectral_bounds(sys);
    NeumannSeries series = NeumannSeries::compute(sys, spectral, 40, 0.0);

    const auto d_tr = hop_distances(s, v_tr);
    long zero_checks = 0;
    long zero_violations = 0;
    long bound_checks = 0;
    long bound_violations = 0;
    for (int r = 0; r <= 10; ++r) {
        for (const auto& [i, j] : s.edges) {
            const int q = std::min(d_tr[static_cast<std::size_t>(i)],
                                   d_tr[static_cast<std::size_t>(j)]);
            for (int u = 0; u < n; ++u) {
                const auto d_u = hop_distances(s, {u});
                const int k = std::min(d_u[static_cast<std::size_t>(i)],
                                       d_u[static_cast<std::size_t>(j)]);
                const double val = analytic_dTr(sys, series, r, u, i, j);
                if (hop_add(q, k) > r) {
                    ++zero_checks;
                    if (val != 0.0) ++zero_violations;
                } else {
                    ++bound_checks;
                    const double bound =
                        4.0 * lambda * sys.y_inf /
                            (static_cast<double>(sys.edge_count) * spectral.mu_max *
                             spectral.mu_max * std::sqrt(2.0)) *
                            static_cast<double>(r - q - k) *
                            std::pow(spectral.nu, static_cast<double>(r - 1)) +
                        1e-12;
                    if (std::abs(val) > bound) ++bound_violations;
                }
            }
        }
    }
    const bool pass = zero_violations == 0 && bound_violations == 0 && zero_checks > 0;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "%ld exact-zero cases (%ld violations), %ld bounded cases (%ld violations)",
                  zero_checks, zero_violations, bound_checks, bound_violations);
    report(7, "series term derivatives vanish beyond the distance budget", pass, detail,
           timer.seconds());
}

struct CheatersRun {
    std::string label;
    RunArtifacts artifacts;
};

std::vector<CheatersRun> run_cheaters_suite() {
    std::vector<CheatersRun> runs;
    auto make = [&](const std::string& label, auto mutate) {
        ExperimentConfig cfg;
        cfg.dataset = "cheaters";
        cfg.dataset_seed = 0;
        cfg.inner_model = "gcn";
        cfg.parameterization = "direct";
        cfg.outer_seed = 0;
        cfg.tau_out = 150;
        cfg.snapshot_iterations = {9, 149};
        cfg.out_dir = (work_dir() / ("c8_" + label)).string();
        mutate(cfg);
        Timer t;
        std::printf("  running cheaters/%s ...", label.c_str());
        std::fflush(stdout);
        runs.push_back({label, run(cfg)});
        std::printf(" done [%.1fs]\n", t.seconds());
        std::fflush(stdout);
    };
    make("baseline", [](ExperimentConfig&) {});
    make("power6", [](ExperimentConfig& cfg) { cfg.power = 6; });
    make("regularized", [](ExperimentConfig& cfg) { cfg.gamma = 1.0; });
    make("g2g", [](ExperimentConfig& cfg) { cfg.parameterization = "g2g"; });
    return runs;
}

void criteria89_fixes(const std::vector<CheatersRun>& runs) {
    Timer timer;
    const RunArtifacts& baseline = runs[0].artifacts;
    const RunArtifacts& power6 = runs[1].artifacts;
    const RunArtifacts& regularized = runs[2].artifacts;
    const RunArtifacts& g2g = runs[3].artifacts;

    // refined-edge counts at outer iteration 150 (after the final update)
    auto refined_at_end = [](const RunArtifacts& a) {
        return count_refined_at(a.result.weight_history.back());
    };
    const long count_base = refined_at_end(baseline);
    const long count_pow = refined_at_end(power6);
    const long count_reg = refined_at_end(regularized);
    const long count_g2g = refined_at_end(g2g);

    // edges far from labels (distance >= 2 on the observed graph) that still
    // receive supervision, measured at the final snapshot
    auto far_supervised = [](const RunArtifacts& a) {
        const HypergradProfile& p = a.profiles.back();
        long count = 0;
        for (std::size_t e = 0; e < p.edges.size(); ++e) {
            const bool far = p.distances[e] == kUnreachable || p.distances[e] >= 2;
            if (far && p.abs_grad[e] > 1e-12) ++count;
        }
        return count;
    };
    const long far_base = far_supervised(baseline);
    const long far_pow = far_supervised(power6);
    const long far_reg = far_supervised(regularized);
    const long far_g2g = far_supervised(g2g);

    const bool ordering = count_pow > std::max(count_g2g, count_reg) &&
                          std::max(count_g2g, count_reg) > count_base;
    const bool supervision =
        far_pow > far_base && far_reg > far_base && far_g2g > far_base;
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "refined@150: A^6 %ld > max(G2G %ld, reg %ld) > baseline %ld; "
                  "far edges with |g|>1e-12: base %ld, A^6 %ld, reg %ld, G2G %ld",
                  count_pow, count_g2g, count_reg, count_base, far_base, far_pow, far_reg,
                  far_g2g);
    report(8, "fixes restore supervision on far edges", ordering && supervision, detail,
           timer.seconds());

    // criterion 9: resolving scarcity does not imply better generalization.
    // The orderings concern the trained models, so they are read off the
    // final outer iteration of each run.
    Timer timer9;
    const HistoryRow& base_final = baseline.result.history.back();
    const HistoryRow& pow_final = power6.result.history.back();
    const HistoryRow& g2g_final = g2g.result.history.back();
    const bool pass = pow_final.out_metric >= base_final.out_metric &&
                      pow_final.test_metric <= g2g_final.test_metric;
    char detail9[200];
    std::snprintf(detail9, sizeof(detail9),
                  "final V_out acc: A^6 %.3f >= baseline %.3f; final test acc: A^6 %.3f <= "
                  "G2G %.3f",
                  pow_final.out_metric, base_final.out_metric, pow_final.test_metric,
                  g2g_final.test_metric);
    report(9, "scarcity relief is not generalization", pass, detail9, timer9.seconds());
}

void criterion10_cora_stretch() {
    Timer timer;
    const char* dir = std::getenv("SCARCEGRAD_CORA_DIR");
    if (dir == nullptr) {
        report(10, "cora accuracy table (stretch)", true,
               "skipped: set SCARCEGRAD_CORA_DIR to the raw cora files to run", 0.0, false);
        return;
    }
    const std::filesystem::path base(dir);
    struct Row {
        std::string label;
        std::string model;
        double gamma;
        std::string param;
        double target;
    };
    // published reference accuracies, checked at +-3 points, non-gating
    const std::vector<Row> rows{{"gcn-bilevel", "gcn", 0.0, "direct", 76.2},
                                {"gcn-regularized", "gcn", 1.0, "direct", 80.3},
                                {"gcn-g2g", "gcn", 0.0, "g2g", 82.0},
                                {"laplacian-bilevel", "laplacian", 0.0, "direct", 76.2},
                                {"laplacian-regularized", "laplacian", 1.0, "direct", 78.3},
                                {"laplacian-g2g", "laplacian", 0.0, "g2g", 76.2}};
    std::string detail;
    bool all_close = true;
    for (const Row& row : rows) {
        ExperimentConfig cfg;
        cfg.dataset = "cora";
        cfg.cora_content = (base / "cora.content").string();
        cfg.cora_cites = (base / "cora.cites").string();
        cfg.inner_model = row.model;
        cfg.parameterization = row.param;
        cfg.gamma = row.gamma;
        cfg.outer_seed = 0;
        cfg.out_dir = (work_dir() / ("c10_" + row.label)).string();
        RunArtifacts artifacts = run(cfg);
        const double acc =
            100.0 * evaluate(artifacts.result.best_predictions, artifacts.dataset,
                             SubsetKind::test);
        const bool close = std::abs(acc - row.target) <= 3.0;
        all_close = all_close && close;
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%s %.1f (ref %.1f)%s; ", row.label.c_str(), acc,
                      row.target, close ? "" : " OFF");
        detail += buf;
    }
    report(10, "cora accuracy table (stretch)", all_close, detail, timer.seconds(), false);
}

}  // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::string(argv[1]) == "--quick";

    criterion1_gradient_engine();
    criterion3_weight_independence();
    criterion7_term_derivative_zeros();
    criterion4_eigenvalue_bounds();
    criterion5_neumann_equivalence();
    criterion2_exact_zero_hypergradients();
    criterion6_decay_envelope();
    if (!quick) {
        std::printf("running the four cheaters mitigation experiments...\n");
        std::fflush(stdout);
        const std::vector<CheatersRun> runs = run_cheaters_suite();
        criteria89_fixes(runs);
    } else {
        std::printf("--quick: skipping criteria 8 and 9 (long cheaters runs)\n");
    }
    criterion10_cora_stretch();

    int failures = 0;
    std::printf("\nsummary:\n");
    for (const auto& r : g_results) {
        std::printf("  %-4s criterion %2d: %s\n",
                    r.pass ? "PASS" : (r.gating ? "FAIL" : "warn"), r.id, r.name.c_str());
        if (!r.pass && r.gating) ++failures;
    }
    if (failures > 0) std::printf("%d gating criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
