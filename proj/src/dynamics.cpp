#include "autoode/dynamics.hpp"

#include <cmath>

namespace autoode {

std::vector<double> sine_sample(double w, double b, int n, double h) {
    if (n < 0) throw BadSpec("sine_sample needs n >= 0");
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = std::sin(w * i * h + b);
    return y;
}

AdjacencyMask AdjacencyMask::from_matrix(const Matrix& m, bool force_diagonal) {
    if (m.rows() != m.cols()) throw ShapeMismatch("adjacency mask must be square");
    AdjacencyMask mask;
    mask.n = m.rows();
    mask.neighbors.resize(static_cast<std::size_t>(mask.n));
    for (int i = 0; i < mask.n; ++i) {
        for (int j = 0; j < mask.n; ++j) {
            double v = m(i, j);
            if (v != 0.0 && v != 1.0) throw BadSpec("adjacency mask entries must be 0 or 1");
            if (v == 1.0 || (force_diagonal && i == j)) {
                mask.edges.emplace_back(i, j);
                mask.neighbors[static_cast<std::size_t>(i)].push_back(j);
            }
        }
    }
    return mask;
}

AdjacencyMask AdjacencyMask::self_only(int n) {
    Matrix m(n, n, 0.0);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return from_matrix(m);
}

bool AdjacencyMask::symmetric() const {
    Matrix m(n, n, 0.0);
    for (auto [i, j] : edges) m(i, j) = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (m(i, j) != m(j, i)) return false;
    return true;
}

Matrix masked_low_rank_dense(const Matrix& b, const Matrix& d, const AdjacencyMask& mask) {
    if (b.rows() != d.rows() || b.cols() != d.cols() || b.cols() != mask.n)
        throw ShapeMismatch("low-rank factors must both be k_rank x n");
    std::span<const double> bs(b.data());
    std::span<const double> ds(d.data());
    auto values = masked_low_rank<double>(bs, ds, b.rows(), mask);
    Matrix a(mask.n, mask.n, 0.0);
    for (std::size_t e = 0; e < mask.edges.size(); ++e) a(mask.edges[e].first, mask.edges[e].second) = values[e];
    return a;
}

}  // namespace autoode
