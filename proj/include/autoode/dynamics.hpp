#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "autoode/errors.hpp"
#include "autoode/matrix.hpp"
#include "autoode/params.hpp"
#include "autoode/tape.hpp"

namespace autoode {

// ===== right-hand sides, written once over a generic scalar =====

// Competitive Lotka-Volterra:
//   dp_i/dt = r_i p_i (1 - sum_j A_ij p_j / k_i)
// a is the d x d interaction matrix in row-major order.
template <class T>
std::vector<T> lv_rhs(std::span<const T> p, std::span<const T> r, std::span<const T> k, std::span<const T> a) {
    const std::size_t d = p.size();
    if (r.size() != d || k.size() != d || a.size() != d * d)
        throw ShapeMismatch("lv_rhs parameter sizes do not match the state dimension");
    std::vector<T> out;
    out.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
        T crowd = a[i * d] * p[0];
        for (std::size_t j = 1; j < d; ++j) crowd = crowd + a[i * d + j] * p[j];
        out.push_back(r[i] * p[i] * (1.0 - crowd / k[i]));
    }
    return out;
}

// FitzHugh-Nagumo:
//   dx/dt = c (x + y - x^3/3),   dy/dt = -(1/c) (x + b y - a)
template <class T>
std::vector<T> fhn_rhs(std::span<const T> xy, const T& a, const T& b, const T& c) {
    if (xy.size() != 2) throw ShapeMismatch("fhn_rhs expects a 2-dimensional state");
    const T& x = xy[0];
    const T& y = xy[1];
    std::vector<T> out;
    out.reserve(2);
    out.push_back(c * (x + y - x * x * x / 3.0));
    out.push_back((x + b * y - a) / c * -1.0);
    return out;
}

// SEIR with N = S + E + I + R read off the state:
//   dS = -beta S I / N,  dE = beta S I / N - sigma E,
//   dI = sigma E - gamma I,  dR = gamma I
template <class T>
std::vector<T> seir_rhs(std::span<const T> y, const T& beta, const T& sigma, const T& gamma) {
    if (y.size() != 4) throw ShapeMismatch("seir_rhs expects a 4-dimensional state");
    const T& s = y[0];
    const T& e = y[1];
    const T& i = y[2];
    T n = s + e + i + y[3];
    T infection = beta * s * i / n;
    T incubation = sigma * e;
    T recovery = gamma * i;
    std::vector<T> out;
    out.reserve(4);
    out.push_back(-infection);
    out.push_back(infection - incubation);
    out.push_back(incubation - recovery);
    out.push_back(recovery);
    return out;
}

// Samples y_i = sin(w * i * h + b) for i in [0, n).
std::vector<double> sine_sample(double w, double b, int n, double h = 0.2);

// ===== piecewise-linear rate =====

// Continuous piecewise-linear function of time:
//   value(t) = intercept + sum_seg slope_seg * overlap(t, segment)
// where segment s spans [b_s, b_{s+1}) with b_0 = 0 and the last segment
// unbounded above. Differentiable in slopes and intercept everywhere and in
// breakpoints away from t == breakpoint.
template <class T>
struct PiecewiseLinear {
    std::vector<T> breakpoints;  // strictly increasing, may be empty
    std::vector<T> slopes;       // breakpoints.size() + 1 entries
    T intercept;
};

template <class T>
void validate_piecewise(const PiecewiseLinear<T>& f) {
    if (f.slopes.size() != f.breakpoints.size() + 1)
        throw BadSpec("piecewise-linear rate needs one more slope than breakpoints");
    for (std::size_t i = 0; i + 1 < f.breakpoints.size(); ++i)
        if (!(value_of(f.breakpoints[i]) < value_of(f.breakpoints[i + 1])))
            throw BadSpec("piecewise-linear breakpoints must be strictly increasing");
}

template <class T>
T piecewise_value(const PiecewiseLinear<T>& f, double t) {
    const std::size_t m = f.breakpoints.size();
    T acc = f.intercept;
    for (std::size_t s = 0; s <= m; ++s) {
        if (s == 0 && m == 0) {
            acc = acc + f.slopes[0] * t;
        } else if (s == 0) {
            acc = acc + f.slopes[0] * min(f.breakpoints[0], t);
        } else if (s == m) {
            acc = acc + f.slopes[s] * max(t - f.breakpoints[s - 1], 0.0);
        } else {
            acc = acc + f.slopes[s] * max(min(t, f.breakpoints[s]) - f.breakpoints[s - 1], 0.0);
        }
    }
    return acc;
}

// Transmission rate: the piecewise-linear value clamped to be nonnegative.
template <class T>
T piecewise_beta(const PiecewiseLinear<T>& f, double t) {
    return max(piecewise_value(f, t), 0.0);
}

// ===== masked low-rank transmission =====

// 0/1 adjacency kept both as an edge list (in row-major order, the canonical
// flattening) and as per-row neighbor lists. Region models force the diagonal
// (a region always couples to itself); pass force_diagonal = false for plain
// masking semantics.
struct AdjacencyMask {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::vector<int>> neighbors;

    static AdjacencyMask from_matrix(const Matrix& m, bool force_diagonal = true);
    static AdjacencyMask self_only(int n);
    bool symmetric() const;
};

// A = (B^T D) masked: returns A_ij = sum_r B[r,i] * D[r,j] for every edge
// (i, j) of the mask, aligned with mask.edges. B and D are k_rank x n
// row-major. Entries outside the mask are identically zero by construction.
template <class T>
std::vector<T> masked_low_rank(std::span<const T> b, std::span<const T> d, int k_rank, const AdjacencyMask& mask) {
    const std::size_t n = static_cast<std::size_t>(mask.n);
    if (k_rank < 1) throw BadSpec("low-rank factor needs k_rank >= 1");
    if (b.size() != n * static_cast<std::size_t>(k_rank) || d.size() != b.size())
        throw ShapeMismatch("low-rank factors must both be k_rank x n");
    std::vector<T> values;
    values.reserve(mask.edges.size());
    for (auto [i, j] : mask.edges) {
        T acc = b[static_cast<std::size_t>(i)] * d[static_cast<std::size_t>(j)];
        for (int r = 1; r < k_rank; ++r)
            acc = acc + b[static_cast<std::size_t>(r) * n + i] * d[static_cast<std::size_t>(r) * n + j];
        values.push_back(std::move(acc));
    }
    return values;
}

// Dense double variant for inspection and tests.
Matrix masked_low_rank_dense(const Matrix& b, const Matrix& d, const AdjacencyMask& mask);

// ===== fit-facing models =====
// A model provides, duck-typed:
//   param_specs(), state_dim(), observed_indices(), substeps(),
//   initial_state<T>(obs_row0, params, lift), make_rhs<T>(params)
// where lift(double) -> T embeds observed constants into the scalar type.

struct SeirModel {
    double n_total = 1000.0;
    bool full_observation = true;
    int n_substeps = 1;

    std::vector<ParamSpec> param_specs() const {
        std::vector<ParamSpec> specs{
            {"beta", {}, Transform::unit_interval, -2.0, 2.0, 1.0, false},
            {"sigma", {}, Transform::unit_interval, -2.0, 2.0, 1.0, false},
            {"gamma", {}, Transform::unit_interval, -2.0, 2.0, 1.0, false},
        };
        if (!full_observation)
            specs.push_back({"e0_frac", {}, Transform::unit_interval, -2.0, 2.0, 1.0, true});
        return specs;
    }

    int state_dim() const { return 4; }

    std::vector<int> observed_indices() const {
        if (full_observation) return {0, 1, 2, 3};
        return {2, 3};  // I, R
    }

    int substeps() const { return n_substeps; }

    template <class T, class Lift>
    std::vector<T> initial_state(std::span<const double> obs0, const ParamBlocks<T>& p, Lift&& lift) const {
        if (full_observation) {
            return {lift(obs0[0]), lift(obs0[1]), lift(obs0[2]), lift(obs0[3])};
        }
        // observed (I0, R0); E0 takes a learned share of the remaining mass
        double headroom = n_total - obs0[0] - obs0[1];
        T e0 = p[3][0] * headroom;
        T s0 = headroom - e0;
        std::vector<T> y;
        y.push_back(std::move(s0));
        y.push_back(std::move(e0));
        y.push_back(lift(obs0[0]));
        y.push_back(lift(obs0[1]));
        return y;
    }

    template <class T>
    auto make_rhs(const ParamBlocks<T>& p) const {
        return [&p](double, const std::vector<T>& y) {
            return seir_rhs<T>(y, p[0][0], p[1][0], p[2][0]);
        };
    }
};

struct LvModel {
    int d = 4;
    int n_substeps = 10;
    double k_raw_lo = 1.0, k_raw_hi = 260.0;

    std::vector<ParamSpec> param_specs() const {
        return {
            {"r", {d}, Transform::positive, -1.0, 1.0, 1.0, false},
            {"k", {d}, Transform::positive, k_raw_lo, k_raw_hi, 1.0, false},
            {"a", {d, d}, Transform::free, -0.5, 0.5, 1.0, false},
        };
    }

    int state_dim() const { return d; }

    std::vector<int> observed_indices() const {
        std::vector<int> idx(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = i;
        return idx;
    }

    int substeps() const { return n_substeps; }

    template <class T, class Lift>
    std::vector<T> initial_state(std::span<const double> obs0, const ParamBlocks<T>&, Lift&& lift) const {
        std::vector<T> y;
        y.reserve(obs0.size());
        for (double v : obs0) y.push_back(lift(v));
        return y;
    }

    template <class T>
    auto make_rhs(const ParamBlocks<T>& p) const {
        return [&p](double, const std::vector<T>& y) {
            return lv_rhs<T>(y, p[0], p[1], p[2]);
        };
    }
};

struct FhnModel {
    int n_substeps = 4;

    std::vector<ParamSpec> param_specs() const {
        return {
            {"a", {}, Transform::positive, -1.5, 0.5, 1.0, false},
            {"b", {}, Transform::positive, -1.5, 0.5, 1.0, false},
            {"c", {}, Transform::positive, -0.5, 4.5, 1.0, false},
        };
    }

    int state_dim() const { return 2; }
    std::vector<int> observed_indices() const { return {0, 1}; }
    int substeps() const { return n_substeps; }

    template <class T, class Lift>
    std::vector<T> initial_state(std::span<const double> obs0, const ParamBlocks<T>&, Lift&& lift) const {
        return {lift(obs0[0]), lift(obs0[1])};
    }

    template <class T>
    auto make_rhs(const ParamBlocks<T>& p) const {
        return [&p](double, const std::vector<T>& y) {
            return fhn_rhs<T>(y, p[0][0], p[1][0], p[2][0]);
        };
    }
};

}  // namespace autoode
