#pragma once

#include <utility>
#include <vector>

#include "autoode/errors.hpp"
#include "autoode/matrix.hpp"
#include "autoode/tape.hpp"

namespace autoode {

// Uniform time grid: points t0 + i*h for i in [0, n_steps].
struct TimeGrid {
    double t0 = 0.0;
    double h = 1.0;
    int n_steps = 1;

    void validate() const {
        if (!(h > 0.0)) throw BadSpec("time grid needs h > 0");
        if (n_steps < 1) throw BadSpec("time grid needs n_steps >= 1");
    }
    double time(int i) const { return t0 + i * h; }
};

// States sampled on a grid: row i is the state at time(i), so there are
// n_steps + 1 rows and row 0 is the initial condition.
struct Trajectory {
    TimeGrid grid;
    Matrix states;
};

enum class Method { euler, rk4 };

namespace detail {

template <class T>
std::vector<T> axpy(const std::vector<T>& y, double a, const std::vector<T>& k) {
    std::vector<T> out;
    out.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out.push_back(y[i] + a * k[i]);
    return out;
}

}  // namespace detail

// One forward Euler step: y + h*f(t, y).
template <class T, class Rhs>
std::vector<T> euler_step(Rhs&& f, double t, const std::vector<T>& y, double h) {
    std::vector<T> k = f(t, y);
    if (k.size() != y.size()) throw ShapeMismatch("rhs dimension differs from state dimension");
    return detail::axpy(y, h, k);
}

// One classic fourth-order Runge-Kutta step with stage weights 1,2,2,1.
template <class T, class Rhs>
std::vector<T> rk4_step(Rhs&& f, double t, const std::vector<T>& y, double h) {
    std::vector<T> k1 = f(t, y);
    if (k1.size() != y.size()) throw ShapeMismatch("rhs dimension differs from state dimension");
    std::vector<T> k2 = f(t + h / 2.0, detail::axpy(y, h / 2.0, k1));
    std::vector<T> k3 = f(t + h / 2.0, detail::axpy(y, h / 2.0, k2));
    std::vector<T> k4 = f(t + h, detail::axpy(y, h, k3));
    std::vector<T> out;
    out.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        out.push_back(y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    return out;
}

// Integrate over the whole grid. Works identically over plain doubles and
// tape variables; throws DivergedError with the offending step index the
// first time any state component goes non-finite.
template <class T, class Rhs>
std::vector<std::vector<T>> integrate_states(Rhs&& f, std::vector<T> y0, const TimeGrid& grid,
                                             Method method = Method::rk4) {
    grid.validate();
    for (const T& c : y0)
        if (!is_finite(c)) throw DivergedError(0);
    std::vector<std::vector<T>> rows;
    rows.reserve(static_cast<std::size_t>(grid.n_steps) + 1);
    rows.push_back(std::move(y0));
    for (int i = 0; i < grid.n_steps; ++i) {
        const std::vector<T>& y = rows.back();
        std::vector<T> next = method == Method::euler ? euler_step<T>(f, grid.time(i), y, grid.h)
                                                      : rk4_step<T>(f, grid.time(i), y, grid.h);
        for (const T& c : next)
            if (!is_finite(c)) throw DivergedError(i + 1);
        rows.push_back(std::move(next));
    }
    return rows;
}

// Integrate with `substeps` internal steps per grid interval, returning only
// the states at the grid points (n_steps + 1 rows). Internal refinement buys
// accuracy without changing the sampling the caller sees.
template <class T, class Rhs>
std::vector<std::vector<T>> integrate_sampled(Rhs&& f, std::vector<T> y0, const TimeGrid& grid, int substeps,
                                              Method method = Method::rk4) {
    grid.validate();
    if (substeps < 1) throw BadSpec("substeps must be >= 1");
    if (substeps == 1) return integrate_states<T>(std::forward<Rhs>(f), std::move(y0), grid, method);
    TimeGrid fine{grid.t0, grid.h / substeps, grid.n_steps * substeps};
    auto rows = integrate_states<T>(std::forward<Rhs>(f), std::move(y0), fine, method);
    std::vector<std::vector<T>> out;
    out.reserve(static_cast<std::size_t>(grid.n_steps) + 1);
    for (int i = 0; i <= grid.n_steps; ++i) out.push_back(std::move(rows[static_cast<std::size_t>(i) * substeps]));
    return out;
}

// Plain-double convenience wrapper returning a Trajectory.
template <class Rhs>
Trajectory integrate(Rhs&& f, const std::vector<double>& y0, const TimeGrid& grid, Method method = Method::rk4) {
    auto rows = integrate_states<double>(std::forward<Rhs>(f), y0, grid, method);
    Trajectory traj;
    traj.grid = grid;
    traj.states = Matrix(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            traj.states(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    return traj;
}

}  // namespace autoode
