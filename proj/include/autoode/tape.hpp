#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "autoode/errors.hpp"

namespace autoode {

// Primitive operations a tape node can record.
enum class Op : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    div,
    neg,
    exp,
    log,
    pow,
    sqrt,
    tanh,
    sigmoid,
    softplus,
    relu,
    max,
    min,
    abs,
};

class Tape;

// Scalar variable: a node id on a tape plus the forward value. Cheap to copy;
// all arithmetic goes through free operators that append nodes to the tape.
class Var {
public:
    Var() = default;

    double value() const { return v_; }
    std::int32_t node_id() const { return id_; }
    Tape* tape() const { return tape_; }

private:
    friend class Tape;
    Var(Tape* t, std::int32_t id, double v) : tape_(t), id_(id), v_(v) {}

    Tape* tape_ = nullptr;
    std::int32_t id_ = -1;
    double v_ = 0.0;
};

// Append-only record of primitive applications. Each node keeps its parents
// and the local partial derivatives of its value with respect to them; the
// backward sweep only ever needs those. Reset between optimizer iterations
// to reuse capacity.
class Tape {
public:
    struct Node {
        std::int32_t a;  // parent ids, -1 when absent
        std::int32_t b;
        double pa;  // d(value)/d(parent)
        double pb;
    };

    Var leaf(double value) {
        ++n_leaves_;
        return {this, emit(Op::leaf, -1, 0.0, -1, 0.0), value};
    }

    std::size_t size() const { return nodes_.size(); }
    int n_leaves() const { return n_leaves_; }
    Op op_at(std::int32_t id) const { return ops_[static_cast<std::size_t>(id)]; }
    const Node& node_at(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }

    // Drops all nodes but keeps the allocated capacity.
    void reset() {
        nodes_.clear();
        ops_.clear();
        adjoints_.clear();
        n_leaves_ = 0;
    }

    // Reverse sweep from root: every node is visited at most once, in
    // decreasing id order (ids are a topological order by construction).
    void backward(const Var& root) {
        require_mine(root);
        adjoints_.assign(nodes_.size(), 0.0);
        adjoints_[static_cast<std::size_t>(root.node_id())] = 1.0;
        for (std::int32_t i = root.node_id(); i >= 0; --i) {
            double adj = adjoints_[static_cast<std::size_t>(i)];
            if (adj == 0.0) continue;
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.a >= 0) adjoints_[static_cast<std::size_t>(n.a)] += n.pa * adj;
            if (n.b >= 0) adjoints_[static_cast<std::size_t>(n.b)] += n.pb * adj;
        }
    }

    // Adjoint of v after a backward() call. Nodes the sweep never reached
    // (created after the root, or not ancestors of it) report 0.
    double adjoint(const Var& v) const {
        require_mine(v);
        auto id = static_cast<std::size_t>(v.node_id());
        return id < adjoints_.size() ? adjoints_[id] : 0.0;
    }

    // backward() plus collection: gradient of root restricted to leaf nodes,
    // keyed by node id.
    std::unordered_map<std::int32_t, double> gradient(const Var& root) {
        backward(root);
        std::unordered_map<std::int32_t, double> g;
        g.reserve(static_cast<std::size_t>(n_leaves_));
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (ops_[i] == Op::leaf) g.emplace(static_cast<std::int32_t>(i), adjoints_.empty() ? 0.0 : adjoints_[i]);
        }
        return g;
    }

    Var unary(Op op, double value, const Var& a, double pa) {
        require_mine(a);
        return {this, emit(op, a.node_id(), pa, -1, 0.0), value};
    }

    Var binary(Op op, double value, const Var& a, double pa, const Var& b, double pb) {
        require_mine(a);
        require_mine(b);
        return {this, emit(op, a.node_id(), pa, b.node_id(), pb), value};
    }

private:
    void require_mine(const Var& v) const {
        if (v.tape() != this || v.node_id() < 0)
            throw TapeMismatch("variable does not belong to this tape");
    }

    std::int32_t emit(Op op, std::int32_t a, double pa, std::int32_t b, double pb) {
        nodes_.push_back({a, b, pa, pb});
        ops_.push_back(op);
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::vector<Op> ops_;
    std::vector<double> adjoints_;
    int n_leaves_ = 0;
};

namespace detail {
inline Tape& same_tape(const Var& a, const Var& b) {
    if (a.tape() == nullptr || a.tape() != b.tape())
        throw TapeMismatch("operands live on different tapes");
    return *a.tape();
}
inline Tape& tape_of(const Var& a) {
    if (a.tape() == nullptr) throw TapeMismatch("operand has no tape");
    return *a.tape();
}
}  // namespace detail

// ===== arithmetic =====

inline Var operator+(const Var& a, const Var& b) {
    return detail::same_tape(a, b).binary(Op::add, a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator+(const Var& a, double c) {
    return detail::tape_of(a).unary(Op::add, a.value() + c, a, 1.0);
}
inline Var operator+(double c, const Var& a) { return a + c; }

inline Var operator-(const Var& a, const Var& b) {
    return detail::same_tape(a, b).binary(Op::sub, a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator-(const Var& a, double c) {
    return detail::tape_of(a).unary(Op::sub, a.value() - c, a, 1.0);
}
inline Var operator-(double c, const Var& a) {
    return detail::tape_of(a).unary(Op::sub, c - a.value(), a, -1.0);
}
inline Var operator-(const Var& a) {
    return detail::tape_of(a).unary(Op::neg, -a.value(), a, -1.0);
}

inline Var operator*(const Var& a, const Var& b) {
    return detail::same_tape(a, b).binary(Op::mul, a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator*(const Var& a, double c) {
    return detail::tape_of(a).unary(Op::mul, a.value() * c, a, c);
}
inline Var operator*(double c, const Var& a) { return a * c; }

inline Var operator/(const Var& a, const Var& b) {
    if (b.value() == 0.0) throw DomainError("division by zero");
    double inv = 1.0 / b.value();
    return detail::same_tape(a, b).binary(Op::div, a.value() * inv, a, inv, b, -a.value() * inv * inv);
}
inline Var operator/(const Var& a, double c) {
    if (c == 0.0) throw DomainError("division by zero");
    return detail::tape_of(a).unary(Op::div, a.value() / c, a, 1.0 / c);
}
inline Var operator/(double c, const Var& a) {
    if (a.value() == 0.0) throw DomainError("division by zero");
    double inv = 1.0 / a.value();
    return detail::tape_of(a).unary(Op::div, c * inv, a, -c * inv * inv);
}

// ===== transcendental and piecewise primitives =====

inline Var exp(const Var& a) {
    double v = std::exp(a.value());
    return detail::tape_of(a).unary(Op::exp, v, a, v);
}

inline Var log(const Var& a) {
    if (!(a.value() > 0.0)) throw DomainError("log of a nonpositive value");
    return detail::tape_of(a).unary(Op::log, std::log(a.value()), a, 1.0 / a.value());
}

inline Var pow(const Var& a, double c) {
    double v = std::pow(a.value(), c);
    return detail::tape_of(a).unary(Op::pow, v, a, c * std::pow(a.value(), c - 1.0));
}
inline Var pow(const Var& a, const Var& b) {
    if (!(a.value() > 0.0)) throw DomainError("pow needs a positive base for a variable exponent");
    double v = std::pow(a.value(), b.value());
    return detail::same_tape(a, b).binary(Op::pow, v, a, b.value() * v / a.value(), b, v * std::log(a.value()));
}
inline Var pow(double c, const Var& b) {
    if (!(c > 0.0)) throw DomainError("pow needs a positive base for a variable exponent");
    double v = std::pow(c, b.value());
    return detail::tape_of(b).unary(Op::pow, v, b, v * std::log(c));
}

inline Var sqrt(const Var& a) {
    if (a.value() < 0.0) throw DomainError("sqrt of a negative value");
    double v = std::sqrt(a.value());
    // derivative is unbounded at 0; use subgradient 0 there to keep sweeps finite
    return detail::tape_of(a).unary(Op::sqrt, v, a, a.value() == 0.0 ? 0.0 : 0.5 / v);
}

inline Var tanh(const Var& a) {
    double v = std::tanh(a.value());
    return detail::tape_of(a).unary(Op::tanh, v, a, 1.0 - v * v);
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}
inline Var sigmoid(const Var& a) {
    double v = sigmoid(a.value());
    return detail::tape_of(a).unary(Op::sigmoid, v, a, v * (1.0 - v));
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline Var softplus(const Var& a) {
    return detail::tape_of(a).unary(Op::softplus, softplus(a.value()), a, sigmoid(a.value()));
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline Var relu(const Var& a) {
    // subgradient 0 at the kink
    return detail::tape_of(a).unary(Op::relu, relu(a.value()), a, a.value() > 0.0 ? 1.0 : 0.0);
}

// Ties route the gradient to the first argument.
inline Var max(const Var& a, const Var& b) {
    bool first = a.value() >= b.value();
    return detail::same_tape(a, b).binary(Op::max, first ? a.value() : b.value(), a, first ? 1.0 : 0.0, b,
                                          first ? 0.0 : 1.0);
}
inline Var max(const Var& a, double c) {
    bool first = a.value() >= c;
    return detail::tape_of(a).unary(Op::max, first ? a.value() : c, a, first ? 1.0 : 0.0);
}
inline Var max(double c, const Var& b) {
    bool first = c >= b.value();
    return detail::tape_of(b).unary(Op::max, first ? c : b.value(), b, first ? 0.0 : 1.0);
}

inline Var min(const Var& a, const Var& b) {
    bool first = a.value() <= b.value();
    return detail::same_tape(a, b).binary(Op::min, first ? a.value() : b.value(), a, first ? 1.0 : 0.0, b,
                                          first ? 0.0 : 1.0);
}
inline Var min(const Var& a, double c) {
    bool first = a.value() <= c;
    return detail::tape_of(a).unary(Op::min, first ? a.value() : c, a, first ? 1.0 : 0.0);
}
inline Var min(double c, const Var& b) {
    bool first = c <= b.value();
    return detail::tape_of(b).unary(Op::min, first ? c : b.value(), b, first ? 0.0 : 1.0);
}

inline Var abs(const Var& a) {
    // subgradient 0 at 0
    double p = a.value() > 0.0 ? 1.0 : (a.value() < 0.0 ? -1.0 : 0.0);
    return detail::tape_of(a).unary(Op::abs, std::abs(a.value()), a, p);
}

// double overloads so templated code works unchanged on plain reals
inline double max(double a, double b) { return a >= b ? a : b; }
inline double min(double a, double b) { return a <= b ? a : b; }
inline double abs(double a) { return std::abs(a); }

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const Var& x) { return std::isfinite(x.value()); }

inline void check_finite(const Var& x) {
    if (!is_finite(x)) throw NonFiniteError("variable value is not finite");
}
inline void check_finite(double x) {
    if (!std::isfinite(x)) throw NonFiniteError("value is not finite");
}

// A scalar function of n inputs, expressed over tape variables.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

// Max relative disagreement between tape gradients and central finite
// differences of f at x:  max_i |g_ad - g_fd| / (|g_fd| + 1e-8).
double grad_check(const ScalarFn& f, std::span<const double> x, double eps = 1e-4);

}  // namespace autoode
