#include "scarcegrad/bilevel.hpp"

#include <cmath>

#include "scarcegrad/errors.hpp"

namespace scarcegrad {

namespace {

constexpr double kDegreeEps = 1e-8;
// guard inside sqrt so a zero second moment cannot produce 0/0 in backward
constexpr double kSqrtGuard = 1e-300;

}  // namespace

std::vector<VarId> TapeOptimizer::step(Tape& tape, const std::vector<VarId>& params,
                                       const std::vector<VarId>& grads) {
    if (params.size() != grads.size())
        throw ContractError("optimizer_step: parameter/gradient count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Tensor& pv = tape.value(params[k]);
        const Tensor& gv = tape.value(grads[k]);
        if (pv.rows() != gv.rows() || pv.cols() != gv.cols())
            throw ContractError("optimizer_step: parameter/gradient shape mismatch");
    }

    std::vector<VarId> updated;
    updated.reserve(params.size());

    if (kind_ == OptimizerKind::gd) {
        for (std::size_t k = 0; k < params.size(); ++k)
            updated.push_back(tape.subtract(params[k], tape.scalar_scale(grads[k], eta_)));
        return updated;
    }

    if (m_.empty()) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const VarId p : params) {
            const Index rows = tape.value(p).rows();
            const Index cols = tape.value(p).cols();
            m_.push_back(tape.constant(Tensor::zeros(rows, cols)));
            v_.push_back(tape.constant(Tensor::zeros(rows, cols)));
        }
    }
    ++t_;
    const double bc1 = 1.0 / (1.0 - std::pow(kBeta1, t_));
    const double bc2 = 1.0 / (1.0 - std::pow(kBeta2, t_));

    for (std::size_t k = 0; k < params.size(); ++k) {
        const Index rows = tape.value(params[k]).rows();
        const Index cols = tape.value(params[k]).cols();
        VarId m_new = tape.add(tape.scalar_scale(m_[k], kBeta1),
                               tape.scalar_scale(grads[k], 1.0 - kBeta1));
        VarId v_new = tape.add(tape.scalar_scale(v_[k], kBeta2),
                               tape.scalar_scale(tape.square(grads[k]), 1.0 - kBeta2));
        m_[k] = m_new;
        v_[k] = v_new;

        VarId m_hat = tape.scalar_scale(m_new, bc1);
        VarId v_hat = tape.scalar_scale(v_new, bc2);
        VarId guarded =
            tape.add(v_hat, tape.constant(Tensor::constant(rows, cols, kSqrtGuard)));
        VarId denom = tape.add(tape.sqrt(guarded),
                               tape.constant(Tensor::constant(rows, cols, kEps)));
        // reciprocal expressed as exp(-log(denom)); denom >= eps > 0
        VarId recip = tape.exp(tape.scalar_scale(tape.log(denom), -1.0));
        VarId update = tape.hadamard(m_hat, recip);
        updated.push_back(tape.subtract(params[k], tape.scalar_scale(update, eta_)));
    }
    return updated;
}

void HostOptimizer::step(std::vector<double>& params, const std::vector<double>& grads) {
    if (params.size() != grads.size())
        throw ContractError("HostOptimizer: parameter/gradient size mismatch");
    if (kind_ == OptimizerKind::gd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= eta_ * grads[i];
        return;
    }
    if (m_.empty()) {
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(TapeOptimizer::kBeta1, t_);
    const double bc2 = 1.0 - std::pow(TapeOptimizer::kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = TapeOptimizer::kBeta1 * m_[i] + (1.0 - TapeOptimizer::kBeta1) * grads[i];
        v_[i] = TapeOptimizer::kBeta2 * v_[i] + (1.0 - TapeOptimizer::kBeta2) * grads[i] * grads[i];
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        params[i] -= eta_ * m_hat / (std::sqrt(v_hat) + TapeOptimizer::kEps);
    }
}

DirectEdges DirectEdges::random_init(SupportPattern support, Rng& rng, double scale) {
    DirectEdges d;
    d.weights.resize(support.edge_count());
    for (double& w : d.weights) w = scale * rng.uniform();
    d.support = std::move(support);
    return d;
}

LatentG2g LatentG2g::init(SupportPattern support, G2gShape shape, Rng& rng,
                          double final_layer_scale) {
    LatentG2g g;
    g.support = std::move(support);
    const int layers = shape.layer_count();
    for (int l = 0; l < layers; ++l) {
        const int din = shape.dim_in(l);
        const int dout = shape.dim_out(l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(din));
        const double scale = (l == layers - 1) ? final_layer_scale : 1.0;
        Matrix w(din, dout);
        for (Index i = 0; i < w.rows(); ++i)
            for (Index j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.uniform(-bound, bound);
        Matrix b(1, dout);
        for (Index j = 0; j < b.cols(); ++j) b(0, j) = scale * rng.uniform(-bound, bound);
        g.w.push_back(std::move(w));
        g.b.push_back(std::move(b));
    }
    g.shape = std::move(shape);
    return g;
}

std::vector<double> LatentG2g::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (Index i = 0; i < w[l].rows(); ++i)
            for (Index j = 0; j < w[l].cols(); ++j) flat.push_back(w[l](i, j));
        for (Index j = 0; j < b[l].cols(); ++j) flat.push_back(b[l](0, j));
    }
    return flat;
}

void LatentG2g::assign_flat(const std::vector<double>& flat) {
    if (flat.size() != param_count())
        throw ContractError("LatentG2g::assign_flat: size mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (Index i = 0; i < w[l].rows(); ++i)
            for (Index j = 0; j < w[l].cols(); ++j) w[l](i, j) = flat[k++];
        for (Index j = 0; j < b[l].cols(); ++j) b[l](0, j) = flat[k++];
    }
}

std::size_t LatentG2g::param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < w.size(); ++l)
        total += static_cast<std::size_t>(w[l].size() + b[l].size());
    return total;
}

const SupportPattern& param_support(const OuterParameterization& p) {
    return std::visit([](const auto& v) -> const SupportPattern& { return v.support; }, p);
}

Matrix g2g_edge_features(const SupportPattern& support, const Tensor& x) {
    Matrix f(static_cast<Index>(support.edge_count()), x.cols());
    for (std::size_t e = 0; e < support.edges.size(); ++e) {
        const auto [i, j] = support.edges[e];
        for (Index k = 0; k < x.cols(); ++k) {
            const double d = x(i, k) - x(j, k);
            f(static_cast<Index>(e), k) = d * d;
        }
    }
    return f;
}

std::vector<double> g2g_edge_values(const LatentG2g& param, const Tensor& x) {
    Matrix h = g2g_edge_features(param.support, x);
    const int layers = param.shape.layer_count();
    for (int l = 0; l < layers; ++l) {
        h = (h * param.w[static_cast<std::size_t>(l)]).eval();
        h.rowwise() += param.b[static_cast<std::size_t>(l)].row(0);
        h = h.cwiseMax(0.0);  // hidden relu, and the final nonnegativity relu
    }
    std::vector<double> values(static_cast<std::size_t>(h.rows()));
    for (Index e = 0; e < h.rows(); ++e) values[static_cast<std::size_t>(e)] = h(e, 0);
    return values;
}

void OuterConfig::validate() const {
    if (tau_in < 1) throw ContractError("OuterConfig: tau_in must be >= 1");
    if (tau_out < 1) throw ContractError("OuterConfig: tau_out must be >= 1");
    if (!(eta_in > 0.0)) throw ContractError("OuterConfig: eta_in must be > 0");
    if (!(eta_out > 0.0)) throw ContractError("OuterConfig: eta_out must be > 0");
    if (gamma < 0.0) throw ContractError("OuterConfig: gamma must be >= 0");
    if (weight_lo > weight_hi) throw ContractError("OuterConfig: weight_lo > weight_hi");
    if (model.kind == InnerModelSpec::Kind::laplacian && !(model.lambda > 0.0))
        throw ContractError("OuterConfig: lambda must be > 0");
}

Materialized materialize_adjacency(Tape& tape, const OuterParameterization& param,
                                   const Tensor& x) {
    Materialized out;
    if (const auto* direct = std::get_if<DirectEdges>(&param)) {
        if (direct->weights.size() != direct->support.edge_count())
            throw ContractError("materialize_adjacency: weight per support edge required");
        Tensor w(static_cast<Index>(direct->weights.size()), 1);
        for (std::size_t e = 0; e < direct->weights.size(); ++e)
            w(static_cast<Index>(e), 0) = direct->weights[e];
        VarId leaf = tape.leaf(std::move(w), true);
        out.edge_values = leaf;
        out.leaves = {leaf};
        out.a = tape.scatter_edges(leaf, direct->support.edges, direct->support.n);
        return out;
    }

    const auto& g2g = std::get<LatentG2g>(param);
    if (x.cols() != g2g.shape.input_dim)
        throw DimensionError("materialize_adjacency: feature dim does not match edge model");
    VarId h = tape.constant(Tensor(g2g_edge_features(g2g.support, x)));
    const int layers = g2g.shape.layer_count();
    for (int l = 0; l < layers; ++l) {
        VarId w = tape.leaf(Tensor(g2g.w[static_cast<std::size_t>(l)]), true);
        VarId b = tape.leaf(Tensor(g2g.b[static_cast<std::size_t>(l)]), true);
        out.leaves.push_back(w);
        out.leaves.push_back(b);
        h = tape.relu(tape.broadcast_add_row(tape.matmul(h, w), b));
    }
    out.edge_values = h;
    out.a = tape.scatter_edges(h, g2g.support.edges, g2g.support.n);
    return out;
}

namespace {

double host_masked_loss(const Tensor& pred, const LabeledTargets& targets,
                        const std::vector<int>& nodes, LossKind kind) {
    double total = 0.0;
    for (int v : nodes) {
        if (kind == LossKind::mse) {
            for (Index j = 0; j < pred.cols(); ++j) {
                const double d = pred(v, j) - targets.y_obs(v, j);
                total += d * d;
            }
        } else {
            double row_max = pred(v, 0);
            for (Index j = 1; j < pred.cols(); ++j) row_max = std::max(row_max, pred(v, j));
            double denom = 0.0;
            for (Index j = 0; j < pred.cols(); ++j) denom += std::exp(pred(v, j) - row_max);
            for (Index j = 0; j < pred.cols(); ++j)
                if (targets.y_obs(v, j) != 0.0)
                    total -= targets.y_obs(v, j) *
                             (pred(v, j) - row_max - std::log(denom));
        }
    }
    return total / static_cast<double>(nodes.size());
}

double host_laplacian_objective(const Tensor& y, const Tensor& a, const LabeledTargets& targets,
                                const std::vector<int>& v_tr, double lambda,
                                std::size_t edge_count) {
    double fit = host_masked_loss(y, targets, v_tr, LossKind::mse);
    Eigen::VectorXd deg = a.mat().rowwise().sum();
    Matrix ly = deg.asDiagonal() * y.mat() - a.mat() * y.mat();
    const double quad = (y.mat().cwiseProduct(ly)).sum();
    return fit + lambda * quad / static_cast<double>(edge_count);
}

}  // namespace

UnrollResult unroll_inner(Tape& tape, VarId a, std::size_t support_edge_count,
                          const Dataset& ds, const OuterConfig& cfg, std::uint64_t inner_seed) {
    cfg.validate();
    Rng rng(inner_seed);
    TapeOptimizer opt(cfg.inner_opt, cfg.eta_in);
    UnrollResult result;

    if (cfg.model.kind == InnerModelSpec::Kind::gcn) {
        GcnParams params = init_gcn_params(tape, cfg.model.gcn, rng);
        VarId x = tape.constant(ds.x);
        InnerGradWorkspace ws = make_inner_grad_workspace(tape, a, x);
        for (int t = 0; t < cfg.tau_in; ++t) {
            GcnGradients grads = inner_grad_gcn(tape, params, a, x, ds.targets, ds.split.train,
                                                cfg.model.loss, ws);
            const double loss = host_masked_loss(tape.value(grads.prediction), ds.targets,
                                                 ds.split.train, cfg.model.loss);
            result.inner_loss.push_back(loss);
            if (!std::isfinite(loss))
                throw DivergenceError("unroll_inner: non-finite inner loss", t);
            params = GcnParams::from_flat(cfg.model.gcn,
                                          opt.step(tape, params.flatten(), grads.flatten()));
        }
        result.predictions = gcn_forward(tape, params, a, x);
        return result;
    }

    // laplacian label propagation: the labels themselves are the parameters
    const std::size_t edge_count = support_edge_count;
    VarId y = tape.leaf(Tensor::random_uniform(ds.n, ds.c, rng));
    for (int t = 0; t < cfg.tau_in; ++t) {
        VarId grad = inner_grad_labels(tape, y, a, ds.targets, ds.split.train, cfg.model.lambda,
                                       edge_count);
        const double loss =
            host_laplacian_objective(tape.value(y), tape.value(a), ds.targets, ds.split.train,
                                     cfg.model.lambda, edge_count);
        result.inner_loss.push_back(loss);
        if (!std::isfinite(loss))
            throw DivergenceError("unroll_inner: non-finite inner loss", t);
        y = opt.step(tape, {y}, {grad}).front();
    }
    result.predictions = y;
    return result;
}

VarId outer_objective(Tape& tape, VarId pred, const Dataset& ds, double gamma, VarId a,
                      LossKind outer_loss) {
    if (gamma < 0.0) throw ContractError("outer_objective: gamma must be >= 0");
    VarId loss = masked_loss(tape, pred, ds.targets, ds.split.outer, outer_loss);
    if (gamma == 0.0) return loss;
    const Index n = tape.value(a).rows();
    VarId deg = tape.matmul(a, tape.constant(Tensor::ones(n, 1)));
    VarId shifted = tape.add(deg, tape.constant(Tensor::constant(n, 1, kDegreeEps)));
    VarId reg = tape.scalar_scale(tape.reduce_sum(tape.log(shifted)), -gamma);
    return tape.add(loss, reg);
}

HypergradResult hypergradient(const OuterConfig& cfg, const Dataset& ds,
                              const OuterParameterization& param, std::uint64_t inner_seed) {
    cfg.validate();
    Tape tape;
    Materialized mat = materialize_adjacency(tape, param, ds.x);
    UnrollResult unrolled = unroll_inner(tape, mat.a, param_support(param).edge_count(), ds, cfg, inner_seed);
    VarId f_out = outer_objective(tape, unrolled.predictions, ds, cfg.gamma, mat.a,
                                  cfg.outer_loss);

    const VarId report[] = {mat.edge_values};
    GradientMap grads = tape.backward(f_out, report);

    HypergradResult result;
    result.f_out = tape.value(f_out).scalar_value();
    result.predictions = tape.value(unrolled.predictions);

    const Tensor& ev = tape.value(mat.edge_values);
    result.edge_values.resize(static_cast<std::size_t>(ev.rows()));
    for (Index e = 0; e < ev.rows(); ++e)
        result.edge_values[static_cast<std::size_t>(e)] = ev(e, 0);

    result.edge_grad.assign(result.edge_values.size(), 0.0);
    if (grads.contains(mat.edge_values)) {
        const Tensor& eg = grads.at(mat.edge_values);
        for (Index e = 0; e < eg.rows(); ++e)
            result.edge_grad[static_cast<std::size_t>(e)] = eg(e, 0);
    }

    for (const VarId leaf : mat.leaves) {
        const Tensor& pv = tape.value(leaf);
        if (grads.contains(leaf)) {
            const Tensor& g = grads.at(leaf);
            for (Index i = 0; i < g.rows(); ++i)
                for (Index j = 0; j < g.cols(); ++j) result.param_grad.push_back(g(i, j));
        } else {
            for (Index k = 0; k < pv.size(); ++k) result.param_grad.push_back(0.0);
        }
    }
    return result;
}

double outer_value(const OuterConfig& cfg, const Dataset& ds,
                   const OuterParameterization& param, std::uint64_t inner_seed) {
    Tape tape;
    Materialized mat = materialize_adjacency(tape, param, ds.x);
    UnrollResult unrolled = unroll_inner(tape, mat.a, param_support(param).edge_count(), ds, cfg, inner_seed);
    VarId f_out = outer_objective(tape, unrolled.predictions, ds, cfg.gamma, mat.a,
                                  cfg.outer_loss);
    return tape.value(f_out).scalar_value();
}

namespace {

std::vector<double> param_flat(const OuterParameterization& p) {
    if (const auto* direct = std::get_if<DirectEdges>(&p)) return direct->weights;
    return std::get<LatentG2g>(p).flatten();
}

void param_assign(OuterParameterization& p, const std::vector<double>& flat) {
    if (auto* direct = std::get_if<DirectEdges>(&p)) {
        direct->weights = flat;
        return;
    }
    std::get<LatentG2g>(p).assign_flat(flat);
}

}  // namespace

OuterLoopResult outer_loop(const OuterConfig& cfg, const Dataset& ds,
                           OuterParameterization init, const OuterLoopOptions& opts) {
    cfg.validate();
    OuterParameterization param = std::move(init);
    HostOptimizer outer_opt(cfg.outer_opt, cfg.eta_out);
    OuterLoopResult result;
    result.best_param = param;

    const bool accuracy = metric_is_accuracy(ds);

    for (int t = 0; t < cfg.tau_out; ++t) {
        // one unroll attempt, a reinitialized retry, then one retry at half
        // the inner step size before failing hard
        HypergradResult hg;
        int attempts = 0;
        double eta_used = cfg.eta_in;
        for (int attempt = 0;; ++attempt) {
            OuterConfig attempt_cfg = cfg;
            if (attempt == 2) attempt_cfg.eta_in = cfg.eta_in / 2.0;
            const std::uint64_t inner_seed =
                Rng::derive(cfg.seed, static_cast<std::uint64_t>(t) * 4 + attempt);
            try {
                hg = hypergradient(attempt_cfg, ds, param, inner_seed);
                attempts = attempt + 1;
                eta_used = attempt_cfg.eta_in;
                break;
            } catch (const DivergenceError&) {
                if (attempt >= 2) throw;
            }
        }

        if (opts.record_weights) result.weight_history.push_back(hg.edge_values);

        HistoryRow row;
        row.iteration = t;
        row.f_out = hg.f_out;
        row.attempts = attempts;
        row.eta_in_used = eta_used;
        row.out_metric = evaluate_subset(hg.predictions, ds, ds.split.outer);
        row.val_metric = ds.split.val.empty()
                             ? 0.0
                             : evaluate_subset(hg.predictions, ds, ds.split.val);
        row.test_metric = ds.split.test.empty()
                              ? 0.0
                              : evaluate_subset(hg.predictions, ds, ds.split.test);
        result.history.push_back(row);

        const bool better =
            result.best_iteration < 0 ||
            (accuracy ? row.val_metric > result.best_val_metric
                      : row.val_metric < result.best_val_metric);
        if (better) {
            result.best_iteration = t;
            result.best_val_metric = row.val_metric;
            result.best_param = param;
            result.best_predictions = hg.predictions;
        }

        std::vector<double> flat = param_flat(param);
        outer_opt.step(flat, hg.param_grad);
        if (auto* direct = std::get_if<DirectEdges>(&param)) {
            direct->weights = flat;
            for (double& w : direct->weights) w = std::clamp(w, cfg.weight_lo, cfg.weight_hi);
        } else {
            param_assign(param, flat);
        }

        for (int snap : opts.snapshot_iterations) {
            if (snap != t) continue;
            Snapshot s;
            s.iteration = t;
            if (std::holds_alternative<DirectEdges>(param)) {
                s.abs_edge_grad.reserve(hg.edge_grad.size());
                for (double g : hg.edge_grad) s.abs_edge_grad.push_back(std::abs(g));
            } else {
                const auto& g2g = std::get<LatentG2g>(param);
                const std::vector<double> after = g2g_edge_values(g2g, ds.x);
                s.abs_edge_grad.resize(after.size());
                for (std::size_t e = 0; e < after.size(); ++e)
                    s.abs_edge_grad[e] =
                        std::abs(after[e] - hg.edge_values[e]) / cfg.eta_out;
            }
            result.snapshots.push_back(std::move(s));
        }
    }

    // final post-update edge values
    if (opts.record_weights) {
        if (const auto* direct = std::get_if<DirectEdges>(&param)) {
            result.weight_history.push_back(direct->weights);
        } else {
            result.weight_history.push_back(
                g2g_edge_values(std::get<LatentG2g>(param), ds.x));
        }
    }
    return result;
}

}  // namespace scarcegrad
