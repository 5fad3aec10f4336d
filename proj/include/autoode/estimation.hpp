#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "autoode/errors.hpp"
#include "autoode/integrate.hpp"
#include "autoode/parallel.hpp"
#include "autoode/params.hpp"
#include "autoode/tape.hpp"

namespace autoode {

enum class LossKind { weighted_mse, quantile };

struct FitConfig {
    double lr = 0.01;
    int max_iters = 2000;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::weighted_mse;
    double alpha1 = 1.0;  // weight of the second observed feature group
    double alpha2 = 1.0;  // weight of the third
    double time_weight_exponent = 0.0;  // 0.5 gives w(t) = sqrt(t)
    std::vector<double> quantiles{0.1, 0.5, 0.9};
    double tol = 1e-7;
    int patience = 50;
    int restarts = 3;
    int threads = 0;                      // 0 = resolve from env/hardware
    std::vector<double> feature_weights;  // per observed column; empty = all ones
    Method method = Method::rk4;
};

// ===== losses =====

// (1/k) * sum_t w(t) * mean_f fw_f * (pred - obs)^2  with w(t) = t^exponent.
template <class T>
T weighted_mse(const std::vector<std::vector<T>>& pred, const Matrix& obs, double time_weight_exponent,
               std::span<const double> feature_weights = {}) {
    const int k = obs.rows();
    const int d = obs.cols();
    if (static_cast<int>(pred.size()) != k) throw ShapeMismatch("prediction row count differs from observations");
    if (!feature_weights.empty() && static_cast<int>(feature_weights.size()) != d)
        throw ShapeMismatch("feature weight count differs from observed columns");
    if (k == 0 || d == 0) throw BadSpec("weighted_mse needs a nonempty observation matrix");
    for (int t = 0; t < k; ++t)
        if (static_cast<int>(pred[static_cast<std::size_t>(t)].size()) != d)
            throw ShapeMismatch("prediction column count differs from observations");
    T total = (pred[0][0] - obs(0, 0)) * 0.0;  // zero of the right scalar type
    for (int t = 0; t < k; ++t) {
        double w = std::pow(static_cast<double>(t), time_weight_exponent);
        T row = (pred[static_cast<std::size_t>(t)][0] - obs(t, 0)) * 0.0;
        for (int f = 0; f < d; ++f) {
            T err = pred[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)] - obs(t, f);
            double fw = feature_weights.empty() ? 1.0 : feature_weights[static_cast<std::size_t>(f)];
            row = row + fw * (err * err);
        }
        total = total + (w / d) * row;
    }
    return (1.0 / k) * total;
}

// Mean pinball loss over quantiles, steps and features:
//   rho_tau(e) = max(tau*e, (tau-1)*e),  e = obs - pred.
template <class T>
T quantile_loss(const std::vector<std::vector<std::vector<T>>>& pred_per_quantile, const Matrix& obs,
                std::span<const double> quantiles) {
    if (quantiles.empty()) throw BadSpec("quantile loss needs at least one quantile");
    if (pred_per_quantile.size() != quantiles.size())
        throw ShapeMismatch("one prediction matrix per quantile is required");
    const int k = obs.rows();
    const int d = obs.cols();
    if (k == 0 || d == 0) throw BadSpec("quantile loss needs a nonempty observation matrix");
    for (const auto& pred : pred_per_quantile) {
        if (static_cast<int>(pred.size()) != k) throw ShapeMismatch("prediction row count differs from observations");
        for (const auto& row : pred)
            if (static_cast<int>(row.size()) != d) throw ShapeMismatch("prediction column count differs from observations");
    }
    T total = (pred_per_quantile[0][0][0] - obs(0, 0)) * 0.0;
    for (std::size_t q = 0; q < quantiles.size(); ++q) {
        double tau = quantiles[q];
        if (!(tau > 0.0 && tau < 1.0)) throw BadSpec("quantiles must lie strictly inside (0, 1)");
        const auto& pred = pred_per_quantile[q];
        for (int t = 0; t < k; ++t)
            for (int f = 0; f < d; ++f) {
                T e = obs(t, f) - pred[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)];
                total = total + max(tau * e, (tau - 1.0) * e);
            }
    }
    return total * (1.0 / (static_cast<double>(quantiles.size()) * k * d));
}

// ===== optimizer =====

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

// One Adam update with bias correction. Throws NonFiniteError on NaN/Inf
// gradients before touching x.
inline void adam_step(std::vector<double>& x, std::span<const double> g, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (g.size() != x.size()) throw ShapeMismatch("gradient size differs from parameter size");
    for (double gi : g)
        if (!std::isfinite(gi)) throw NonFiniteError("non-finite gradient in adam_step");
    if (state.m.empty()) {
        state.m.assign(x.size(), 0.0);
        state.v.assign(x.size(), 0.0);
    }
    if (state.m.size() != x.size()) throw ShapeMismatch("adam state size differs from parameter size");
    ++state.step;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < x.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
        double mhat = state.m[i] / c1;
        double vhat = state.v[i] / c2;
        x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// ===== fitting =====

struct FitResult {
    ParamSet params;
    std::map<std::string, std::vector<double>> u0_hat;  // transformed initial-state blocks
    std::vector<double> loss_curve;                     // best restart
    double best_loss = std::numeric_limits<double>::infinity();
    bool converged = false;
    int best_restart = -1;
    int restarts_used = 0;
    int failed_restarts = 0;
};

namespace detail {

inline std::vector<double> window_weights(int k, double exponent) {
    std::vector<double> w(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) w[static_cast<std::size_t>(t)] = std::pow(static_cast<double>(t), exponent);
    return w;
}

template <class Model>
ParamBlocks<double> init_raw_blocks(const Model& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ParamBlocks<double> raw;
    for (const ParamSpec& spec : model.param_specs()) {
        std::uniform_real_distribution<double> u(spec.init_lo, spec.init_hi);
        std::vector<double> block(static_cast<std::size_t>(spec.size()));
        for (double& x : block) x = spec.init_lo == spec.init_hi ? spec.init_lo : u(rng);
        raw.push_back(std::move(block));
    }
    return raw;
}

// Forward pass on the tape: transform raw leaves, build the initial state,
// integrate, project to observed columns, reduce to the configured loss.
template <class Model>
Var taped_loss(Tape& tape, const Model& model, const std::vector<ParamSpec>& specs, const Trajectory& obs,
               const FitConfig& cfg, const ParamBlocks<double>& raw, std::vector<Var>* leaves_out) {
    tape.reset();
    ParamBlocks<Var> raw_vars(raw.size());
    for (std::size_t s = 0; s < raw.size(); ++s) {
        raw_vars[s].reserve(raw[s].size());
        for (double x : raw[s]) {
            raw_vars[s].push_back(tape.leaf(x));
            if (leaves_out) leaves_out->push_back(raw_vars[s].back());
        }
    }
    ParamBlocks<Var> p = transform_blocks(specs, raw_vars);

    auto lift = [&tape](double v) { return tape.leaf(v); };
    std::vector<Var> y0 = model.template initial_state<Var>(obs.states.row(0), p, lift);
    if (static_cast<int>(y0.size()) != model.state_dim())
        throw ShapeMismatch("initial state size differs from the model state dimension");

    auto rhs = model.template make_rhs<Var>(p);
    TimeGrid grid{obs.grid.t0, obs.grid.h, obs.states.rows() - 1};
    auto rows = integrate_sampled<Var>(rhs, std::move(y0), grid, model.substeps(), cfg.method);

    const std::vector<int> idx = model.observed_indices();
    std::vector<std::vector<Var>> pred(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        pred[t].reserve(idx.size());
        for (int j : idx) pred[t].push_back(rows[t][static_cast<std::size_t>(j)]);
    }

    Var loss = cfg.loss == LossKind::quantile
                   ? quantile_loss<Var>(std::vector<std::vector<std::vector<Var>>>(cfg.quantiles.size(), pred),
                                        obs.states, cfg.quantiles)
                   : weighted_mse<Var>(pred, obs.states, cfg.time_weight_exponent, cfg.feature_weights);
    check_finite(loss);
    return loss;
}

struct RestartOutcome {
    ParamBlocks<double> best_raw;
    std::vector<double> curve;
    double best_loss = std::numeric_limits<double>::infinity();
    bool converged = false;
    bool failed = true;
};

template <class Model>
RestartOutcome run_restart(const Model& model, const std::vector<ParamSpec>& specs, const Trajectory& obs,
                           const FitConfig& cfg, std::uint64_t restart_seed) {
    RestartOutcome out;
    ParamBlocks<double> raw = init_raw_blocks(model, restart_seed);

    std::size_t n_params = 0;
    for (const auto& block : raw) n_params += block.size();

    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(n_params);
    std::vector<double> flat(n_params), grad(n_params);
    AdamState adam;
    double lr = cfg.lr;
    int diverged_steps = 0;

    // A step can land in a region where the integration blows up. If the
    // restart never produced a finite loss its whole init region is bad and it
    // fails; otherwise back out to the best parameters seen and continue more
    // cautiously (bounded number of times).
    auto back_out = [&]() -> bool {
        if (out.curve.empty() || ++diverged_steps > 16) return false;
        raw = out.best_raw;
        adam = AdamState{};
        lr *= 0.5;
        return true;
    };

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        leaves.clear();
        double loss;
        try {
            Var l = taped_loss(tape, model, specs, obs, cfg, raw, &leaves);
            loss = l.value();
            tape.backward(l);
        } catch (const DivergedError&) {
            if (!back_out()) {
                out.failed = true;
                return out;
            }
            continue;
        } catch (const NonFiniteError&) {
            if (!back_out()) {
                out.failed = true;
                return out;
            }
            continue;
        }
        out.curve.push_back(loss);
        if (loss < out.best_loss) {
            out.best_loss = loss;
            out.best_raw = raw;
            out.failed = false;
        }

        // relative plateau over a patience window
        int lag = iter - cfg.patience;
        if (lag >= 0) {
            double then = out.curve[static_cast<std::size_t>(lag)];
            if (std::abs(loss - then) / std::max(std::abs(then), 1e-12) < cfg.tol) {
                out.converged = true;
                break;
            }
        }

        std::size_t off = 0;
        for (const auto& block : raw) {
            for (std::size_t i = 0; i < block.size(); ++i) grad[off + i] = tape.adjoint(leaves[off + i]);
            off += block.size();
        }
        off = 0;
        for (auto& block : raw) {
            for (double x : block) flat[off++] = x;
        }
        try {
            adam_step(flat, grad, adam, lr);
        } catch (const NonFiniteError&) {
            return out;
        }
        off = 0;
        for (auto& block : raw) {
            for (double& x : block) x = flat[off++];
        }
    }
    return out;
}

}  // namespace detail

// Estimate model parameters (and unobserved initial state) from an observed
// trajectory prefix by gradient descent through the integrator. Restarts are
// independent (seed + restart index) and the best final loss wins; a restart
// whose integration diverges is dropped rather than aborting the fit.
template <class Model>
FitResult fit(const Model& model, const Trajectory& obs, const FitConfig& cfg) {
    if (obs.states.rows() < 2) throw BadSpec("fit needs at least two observed steps");
    const std::vector<ParamSpec> specs = model.param_specs();
    const std::vector<int> idx = model.observed_indices();
    if (obs.states.cols() != static_cast<int>(idx.size()))
        throw ShapeMismatch("observed trajectory columns differ from the model's observed indices");
    if (!cfg.feature_weights.empty() && cfg.feature_weights.size() != idx.size())
        throw ShapeMismatch("feature weight count differs from observed columns");
    if (cfg.restarts < 1) throw BadSpec("fit needs at least one restart");
    if (cfg.max_iters < 1) throw BadSpec("fit needs at least one iteration");

    auto outcomes = parallel_map(
        cfg.restarts,
        [&](int r) { return detail::run_restart(model, specs, obs, cfg, cfg.seed + static_cast<std::uint64_t>(r)); },
        cfg.threads);

    FitResult result;
    result.restarts_used = cfg.restarts;
    for (int r = 0; r < cfg.restarts; ++r) {
        const auto& o = outcomes[static_cast<std::size_t>(r)];
        if (o.failed) {
            ++result.failed_restarts;
            continue;
        }
        if (o.best_loss < result.best_loss) {
            result.best_loss = o.best_loss;
            result.best_restart = r;
        }
    }
    if (result.best_restart < 0) throw AllRestartsFailed("every restart diverged or went non-finite");

    const auto& best = outcomes[static_cast<std::size_t>(result.best_restart)];
    result.params.specs = specs;
    result.params.raw = best.best_raw;
    result.loss_curve = best.curve;
    result.converged = best.converged;

    ParamBlocks<double> transformed = result.params.transformed();
    for (std::size_t s = 0; s < specs.size(); ++s)
        if (specs[s].is_initial_state) result.u0_hat[specs[s].name] = transformed[s];
    return result;
}

// Roll the fitted model forward `horizon` steps past the observation window.
// The rollout starts from the *observed* values at the last training step,
// joined with the model's own estimate of unobserved components there.
template <class Model>
Trajectory forecast(const Model& model, const Trajectory& obs, const FitResult& fitted, int horizon) {
    if (horizon < 0) throw BadSpec("forecast horizon must be >= 0");
    const int k = obs.states.rows();
    if (k < 2) throw BadSpec("forecast needs at least two observed steps");
    Trajectory out;
    out.grid = TimeGrid{obs.grid.time(k - 1) + obs.grid.h, obs.grid.h, horizon > 1 ? horizon - 1 : 1};
    out.states = Matrix(horizon, model.state_dim());
    if (horizon == 0) return out;

    ParamBlocks<double> p = transform_blocks(fitted.params.specs, fitted.params.raw);
    auto lift = [](double v) { return v; };
    std::vector<double> y0 = model.template initial_state<double>(obs.states.row(0), p, lift);
    auto rhs = model.template make_rhs<double>(p);

    TimeGrid window{obs.grid.t0, obs.grid.h, k - 1};
    auto fitted_rows = integrate_sampled<double>(rhs, std::move(y0), window, model.substeps());

    // anchor: observed columns pinned to the data, the rest from the fit
    std::vector<double> anchor = fitted_rows.back();
    const std::vector<int> idx = model.observed_indices();
    std::span<const double> last_obs = obs.states.row(k - 1);
    for (std::size_t f = 0; f < idx.size(); ++f) anchor[static_cast<std::size_t>(idx[f])] = last_obs[f];

    TimeGrid ahead{obs.grid.time(k - 1), obs.grid.h, horizon};
    auto rows = integrate_sampled<double>(rhs, std::move(anchor), ahead, model.substeps());
    for (int i = 0; i < horizon; ++i)
        for (int j = 0; j < model.state_dim(); ++j)
            out.states(i, j) = rows[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(j)];
    return out;
}

// The fit's training loss as a checkable scalar function of the flattened raw
// parameter vector, for gradient verification.
template <class Model>
ScalarFn make_loss_fn(const Model& model, const Trajectory& obs, const FitConfig& cfg) {
    return [&model, obs, cfg](Tape& tape, std::span<const Var> x) {
        const std::vector<ParamSpec> specs = model.param_specs();
        ParamBlocks<Var> raw_vars;
        std::size_t off = 0;
        for (const ParamSpec& spec : specs) {
            auto n = static_cast<std::size_t>(spec.size());
            if (off + n > x.size()) throw ShapeMismatch("flat parameter vector is too short");
            raw_vars.emplace_back(x.begin() + off, x.begin() + off + n);
            off += n;
        }
        if (off != x.size()) throw ShapeMismatch("flat parameter vector is too long");
        ParamBlocks<Var> p = transform_blocks(specs, raw_vars);
        auto lift = [&tape](double v) { return tape.leaf(v); };
        std::vector<Var> y0 = model.template initial_state<Var>(obs.states.row(0), p, lift);
        auto rhs = model.template make_rhs<Var>(p);
        TimeGrid grid{obs.grid.t0, obs.grid.h, obs.states.rows() - 1};
        auto rows = integrate_sampled<Var>(rhs, std::move(y0), grid, model.substeps(), cfg.method);
        const std::vector<int> idx = model.observed_indices();
        std::vector<std::vector<Var>> pred(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t)
            for (int j : idx) pred[t].push_back(rows[t][static_cast<std::size_t>(j)]);
        return weighted_mse<Var>(pred, obs.states, cfg.time_weight_exponent, cfg.feature_weights);
    };
}

// Flatten raw parameter blocks in spec order (the layout make_loss_fn expects).
inline std::vector<double> flatten_blocks(const ParamBlocks<double>& blocks) {
    std::vector<double> flat;
    for (const auto& b : blocks) flat.insert(flat.end(), b.begin(), b.end());
    return flat;
}

}  // namespace autoode
