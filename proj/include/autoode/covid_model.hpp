#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "autoode/dynamics.hpp"
#include "autoode/params.hpp"

namespace autoode {

// Multi-region compartmental model with an unreported compartment. Per
// region i, with state layout [S, E, U, I, R, D] and N_i = S+E+U+I+R (the
// death column is excluded from the force of infection):
//
//   dS_i = -beta_i(t) * S_i/N_i * sum_j A_ij (I_j + E_j)
//   dE_i = -dS_i - sigma_i E_i
//   dU_i = (1 - mu_i) sigma_i E_i
//   dI_i = mu_i sigma_i E_i - gamma_i I_i
//   dR_i = gamma_i I_i
//   dD_i = r_i(t) * dR_i,   r_i(t) = clamp(a_i t + b_i, 0, 1)
//
// A = (B^T D) restricted to the adjacency mask (unit diagonal forced), with
// B, D of shape k_rank x n. beta_i(t) is piecewise linear in t, clamped to be
// nonnegative; its breakpoints are built from positive increments so they
// stay strictly increasing no matter what the optimizer does.
//
// Observations are fractions of population in feature-major blocks
// [I_0..I_{n-1}, R_0.., D_0..]. Unobserved initial mass is parameterized as
// nested shares of the headroom 1 - I0 - R0, which keeps S0 nonnegative.
struct CovidModel {
    AdjacencyMask mask;
    int n = 0;
    int k_rank = 5;
    int n_breakpoints = 1;
    double window_len = 14.0;  // scales breakpoint initialization
    int n_substeps = 1;
    // Raw init range for the hidden-seed shares e0_frac/u0_frac (before the
    // sigmoid). The default spans roughly 1e-4..2e-2, the scale of hidden
    // compartments in reported epidemic data; fits against data whose hidden
    // mass is a sizable share of the population should widen it upward.
    double seed_init_lo = -9.0;
    double seed_init_hi = -4.0;

    explicit CovidModel(AdjacencyMask mask_, int k_rank_ = 5, int n_breakpoints_ = 1, double window_len_ = 14.0,
                        double seed_init_lo_ = -9.0, double seed_init_hi_ = -4.0)
        : mask(std::move(mask_)), n(mask.n), k_rank(k_rank_), n_breakpoints(n_breakpoints_),
          window_len(window_len_), seed_init_lo(seed_init_lo_), seed_init_hi(seed_init_hi_) {
        if (n < 1) throw BadSpec("covid model needs at least one region");
        if (k_rank < 1) throw BadSpec("covid model needs k_rank >= 1");
        if (n_breakpoints < 0 || n_breakpoints > 3) throw BadSpec("covid model supports 0 to 3 breakpoints");
        row_edges_.resize(static_cast<std::size_t>(n));
        for (std::size_t e = 0; e < mask.edges.size(); ++e)
            row_edges_[static_cast<std::size_t>(mask.edges[e].first)].emplace_back(mask.edges[e].second,
                                                                                   static_cast<int>(e));
        for (const auto& row : row_edges_)
            if (row.empty()) throw BadSpec("adjacency mask has a region with no incoming edges");
    }

    std::vector<ParamSpec> param_specs() const {
        // raw value whose softplus is y
        auto inv_softplus = [](double y) { return std::log(std::expm1(y)); };
        std::vector<ParamSpec> specs;
        // Coupling factors start nonnegative: a zero-mean init makes random
        // rows of (B^T D) strongly negative, which lets compartments leave the
        // simplex and blow up before the optimizer has taken a step. The
        // optimizer is free to push entries negative later.
        specs.push_back({"b_factor", {k_rank, n}, Transform::free, 0.0, 0.5, 1.0, false});
        specs.push_back({"d_factor", {k_rank, n}, Transform::free, 0.0, 0.5, 1.0, false});
        if (n_breakpoints > 0) {
            double gap = window_len / (n_breakpoints + 1);
            specs.push_back({"beta_bp_gap", {n, n_breakpoints}, Transform::positive, inv_softplus(0.7 * gap),
                             inv_softplus(1.2 * gap), 1.0, false});
        }
        specs.push_back({"beta_slope", {n, n_breakpoints + 1}, Transform::free, -0.01, 0.01, 1.0, false});
        specs.push_back({"beta_intercept", {n}, Transform::free, 0.05, 0.5, 1.0, false});
        // Rates start in epidemiologically plausible bands rather than the
        // generic (-2, 2): incubation ~2-5 days, a 30-70% discovery share,
        // recovery ~4-12 days. The data pulls gamma hard (it is pinned by the
        // observed recovery flow) but sigma and mu only weakly, so a fit that
        // starts at implausible rates tends to stay there.
        specs.push_back({"sigma", {n}, Transform::unit_interval, -1.4, 0.0, 1.0, false});
        specs.push_back({"mu", {n}, Transform::unit_interval, -0.85, 0.85, 1.0, false});
        specs.push_back({"gamma", {n}, Transform::unit_interval, -2.4, -1.2, 1.0, false});
        specs.push_back({"death_a", {n}, Transform::free, -0.005, 0.005, 1.0, false});
        specs.push_back({"death_b", {n}, Transform::free, 0.005, 0.1, 1.0, false});
        // Hidden-compartment seeds are capped at a twentieth of the headroom:
        // an uncapped seed lets the optimizer park most of the population in
        // an inert exposed reservoir with a near-zero incubation rate, which
        // matches any observed inflow while destroying every rate estimate.
        // Seeds also start small by default; a seed init far from the data's
        // true hidden mass puts the optimizer in a basin where the seed trades
        // off against the transmission rate.
        specs.push_back({"e0_frac", {n}, Transform::unit_interval, seed_init_lo, seed_init_hi, 0.05, true});
        specs.push_back({"u0_frac", {n}, Transform::unit_interval, seed_init_lo, seed_init_hi, 0.05, true});
        return specs;
    }

    int state_dim() const { return 6 * n; }

    std::vector<int> observed_indices() const {
        std::vector<int> idx;
        idx.reserve(static_cast<std::size_t>(3 * n));
        for (int i = 0; i < n; ++i) idx.push_back(6 * i + 3);  // I
        for (int i = 0; i < n; ++i) idx.push_back(6 * i + 4);  // R
        for (int i = 0; i < n; ++i) idx.push_back(6 * i + 5);  // D
        return idx;
    }

    int substeps() const { return n_substeps; }

    // spec order indices
    int idx_b() const { return 0; }
    int idx_d() const { return 1; }
    int idx_bp() const { return n_breakpoints > 0 ? 2 : -1; }
    int idx_slope() const { return n_breakpoints > 0 ? 3 : 2; }
    int idx_icpt() const { return idx_slope() + 1; }
    int idx_sigma() const { return idx_icpt() + 1; }
    int idx_mu() const { return idx_sigma() + 1; }
    int idx_gamma() const { return idx_mu() + 1; }
    int idx_death_a() const { return idx_gamma() + 1; }
    int idx_death_b() const { return idx_death_a() + 1; }
    int idx_e0() const { return idx_death_b() + 1; }
    int idx_u0() const { return idx_e0() + 1; }

    template <class T, class Lift>
    std::vector<T> initial_state(std::span<const double> obs0, const ParamBlocks<T>& p, Lift&& lift) const {
        if (static_cast<int>(obs0.size()) != 3 * n) throw ShapeMismatch("observed row must have 3n columns");
        std::vector<T> y;
        y.reserve(static_cast<std::size_t>(6 * n));
        const auto& e0 = p[static_cast<std::size_t>(idx_e0())];
        const auto& u0 = p[static_cast<std::size_t>(idx_u0())];
        for (int i = 0; i < n; ++i) {
            double i0 = obs0[static_cast<std::size_t>(i)];
            double r0 = obs0[static_cast<std::size_t>(n + i)];
            double d0 = obs0[static_cast<std::size_t>(2 * n + i)];
            double headroom = std::max(1.0 - i0 - r0, 0.0);
            T e = e0[static_cast<std::size_t>(i)] * headroom;
            T u = u0[static_cast<std::size_t>(i)] * (headroom - e);
            T s = (headroom - e) - u;
            y.push_back(std::move(s));
            y.push_back(std::move(e));
            y.push_back(std::move(u));
            y.push_back(lift(i0));
            y.push_back(lift(r0));
            y.push_back(lift(d0));
        }
        return y;
    }

    template <class T>
    auto make_rhs(const ParamBlocks<T>& p) const {
        // per-evaluation precomputation: transmission entries and beta curves
        std::vector<T> a_values = masked_low_rank<T>(p[static_cast<std::size_t>(idx_b())],
                                                     p[static_cast<std::size_t>(idx_d())], k_rank, mask);
        std::vector<PiecewiseLinear<T>> beta;
        beta.reserve(static_cast<std::size_t>(n));
        const auto& slopes = p[static_cast<std::size_t>(idx_slope())];
        const auto& icpt = p[static_cast<std::size_t>(idx_icpt())];
        for (int i = 0; i < n; ++i) {
            PiecewiseLinear<T> f;
            f.intercept = icpt[static_cast<std::size_t>(i)];
            for (int s = 0; s <= n_breakpoints; ++s)
                f.slopes.push_back(slopes[static_cast<std::size_t>(i * (n_breakpoints + 1) + s)]);
            if (n_breakpoints > 0) {
                const auto& gaps = p[static_cast<std::size_t>(idx_bp())];
                T acc = gaps[static_cast<std::size_t>(i * n_breakpoints)];
                f.breakpoints.push_back(acc);
                for (int s = 1; s < n_breakpoints; ++s) {
                    acc = acc + gaps[static_cast<std::size_t>(i * n_breakpoints + s)];
                    f.breakpoints.push_back(acc);
                }
            }
            beta.push_back(std::move(f));
        }

        return [this, a_values = std::move(a_values), beta = std::move(beta), &p](double t,
                                                                                  const std::vector<T>& y) {
            const auto& sigma = p[static_cast<std::size_t>(idx_sigma())];
            const auto& mu = p[static_cast<std::size_t>(idx_mu())];
            const auto& gamma = p[static_cast<std::size_t>(idx_gamma())];
            const auto& da = p[static_cast<std::size_t>(idx_death_a())];
            const auto& db = p[static_cast<std::size_t>(idx_death_b())];
            std::vector<T> out;
            out.reserve(y.size());
            for (int i = 0; i < n; ++i) {
                auto s6 = static_cast<std::size_t>(6 * i);
                const T& s = y[s6 + 0];
                const T& e = y[s6 + 1];
                const T& u_ = y[s6 + 2];
                const T& inf = y[s6 + 3];
                const T& rec = y[s6 + 4];

                T exposed_pressure = [&] {
                    const auto& row = row_edges_[static_cast<std::size_t>(i)];
                    auto j0 = static_cast<std::size_t>(6 * row[0].first);
                    T acc = a_values[static_cast<std::size_t>(row[0].second)] * (y[j0 + 3] + y[j0 + 1]);
                    for (std::size_t r = 1; r < row.size(); ++r) {
                        auto j6 = static_cast<std::size_t>(6 * row[r].first);
                        acc = acc + a_values[static_cast<std::size_t>(row[r].second)] * (y[j6 + 3] + y[j6 + 1]);
                    }
                    return acc;
                }();

                T n_i = s + e + u_ + inf + rec;
                T beta_i = piecewise_beta(beta[static_cast<std::size_t>(i)], t);
                T force = beta_i * s / n_i * exposed_pressure;
                T incubation = sigma[static_cast<std::size_t>(i)] * e;
                T recovery = gamma[static_cast<std::size_t>(i)] * inf;
                T reported = mu[static_cast<std::size_t>(i)] * incubation;
                T death_rate = min(max(da[static_cast<std::size_t>(i)] * t + db[static_cast<std::size_t>(i)], 0.0), 1.0);

                out.push_back(-force);                         // dS
                out.push_back(force - incubation);             // dE
                out.push_back(incubation - reported);          // dU = (1-mu) sigma E
                out.push_back(reported - recovery);            // dI
                out.push_back(recovery);                       // dR
                out.push_back(death_rate * recovery);          // dD
            }
            return out;
        };
    }

private:
    std::vector<std::vector<std::pair<int, int>>> row_edges_;  // per row: (neighbor, edge index)
};

}  // namespace autoode
