#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "autoode/errors.hpp"
#include "autoode/tape.hpp"

namespace autoode {

enum class Transform {
    free,           // identity
    positive,       // softplus
    unit_interval,  // sigmoid
};

// Declaration of one named parameter block of a dynamics model: shape, the
// transform that maps raw optimizer values into the valid domain, the raw
// initialization range, and whether the block estimates unobserved initial
// state rather than an equation coefficient.
struct ParamSpec {
    std::string name;
    std::vector<int> shape;  // empty = scalar
    Transform transform = Transform::free;
    double init_lo = -0.5;
    double init_hi = 0.5;
    double scale = 1.0;  // applied after the transform
    bool is_initial_state = false;

    int size() const {
        int n = 1;
        for (int d : shape) {
            if (d <= 0) throw BadSpec("parameter shape entries must be positive");
            n *= d;
        }
        return n;
    }
};

template <class T>
T apply_transform(Transform tr, const T& raw, double scale) {
    switch (tr) {
        case Transform::positive:
            return scale * softplus(raw);
        case Transform::unit_interval:
            return scale * sigmoid(raw);
        case Transform::free:
        default:
            return scale * raw;
    }
}

// One flat vector per spec, in spec order.
template <class T>
using ParamBlocks = std::vector<std::vector<T>>;

template <class T>
ParamBlocks<T> transform_blocks(const std::vector<ParamSpec>& specs, const ParamBlocks<T>& raw) {
    if (specs.size() != raw.size()) throw ShapeMismatch("raw parameter block count differs from specs");
    ParamBlocks<T> out(specs.size());
    for (std::size_t s = 0; s < specs.size(); ++s) {
        if (static_cast<int>(raw[s].size()) != specs[s].size())
            throw ShapeMismatch("raw parameter block '" + specs[s].name + "' has the wrong size");
        out[s].reserve(raw[s].size());
        for (const T& r : raw[s]) out[s].push_back(apply_transform(specs[s].transform, r, specs[s].scale));
    }
    return out;
}

// Named fitted parameters: raw optimizer values plus their transformed,
// domain-valid counterparts.
struct ParamSet {
    std::vector<ParamSpec> specs;
    ParamBlocks<double> raw;

    ParamBlocks<double> transformed() const { return transform_blocks(specs, raw); }

    int block_index(const std::string& name) const {
        for (std::size_t i = 0; i < specs.size(); ++i)
            if (specs[i].name == name) return static_cast<int>(i);
        throw BadSpec("no parameter block named '" + name + "'");
    }
};

}  // namespace autoode
