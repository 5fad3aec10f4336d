#include "autoode/fc_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <utility>

#include "autoode/tape.hpp"

namespace autoode {

std::vector<int> FcBaseline::layer_dims() const {
    std::vector<int> dims{input_len * feature_dim};
    for (int h : hidden) dims.push_back(h);
    dims.push_back(feature_dim);
    return dims;
}

int FcBaseline::n_weights() const {
    auto dims = layer_dims();
    int n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        n += dims[l] * dims[l + 1] + dims[l + 1];
    return n;
}

FcBaseline FcBaseline::make(int input_len, int feature_dim, std::vector<int> hidden, std::uint64_t seed) {
    if (input_len < 1 || feature_dim < 1) throw BadSpec("fc baseline needs positive input length and feature dim");
    for (int h : hidden)
        if (h < 1) throw BadSpec("fc hidden widths must be positive");
    FcBaseline fc;
    fc.input_len = input_len;
    fc.feature_dim = feature_dim;
    fc.hidden = std::move(hidden);
    auto dims = fc.layer_dims();
    fc.weights.reserve(static_cast<std::size_t>(fc.n_weights()));
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        double limit = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (int i = 0; i < dims[l] * dims[l + 1]; ++i) fc.weights.push_back(u(rng));
        for (int i = 0; i < dims[l + 1]; ++i) fc.weights.push_back(0.0);
    }
    return fc;
}

namespace {

// One next-row prediction from a flattened window. Layout per layer:
// W (out x in, row-major) then bias. Hidden rows pass through tanh unless
// the baseline is flagged linear; the output row is always affine.
template <class T>
std::vector<T> forward_step(const FcBaseline& fc, const std::vector<int>& dims, std::span<const T> w,
                            const std::vector<T>& x) {
    using std::tanh;
    std::vector<T> cur = x;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l];
        const int out = dims[l + 1];
        const bool last = l + 2 == dims.size();
        std::vector<T> next;
        next.reserve(static_cast<std::size_t>(out));
        for (int r = 0; r < out; ++r) {
            const std::size_t row = off + static_cast<std::size_t>(r) * in;
            T acc = w[row] * cur[0];
            for (int c = 1; c < in; ++c) acc = acc + w[row + static_cast<std::size_t>(c)] * cur[static_cast<std::size_t>(c)];
            acc = acc + w[off + static_cast<std::size_t>(in) * out + static_cast<std::size_t>(r)];
            next.push_back(last || fc.linear ? acc : tanh(acc));
        }
        off += static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
        cur = std::move(next);
    }
    return cur;
}

// q single-step predictions, each fed back into the window.
template <class T>
std::vector<std::vector<T>> rollout(const FcBaseline& fc, std::span<const T> w, std::vector<T> window, int q) {
    const auto dims = fc.layer_dims();
    std::vector<std::vector<T>> preds;
    preds.reserve(static_cast<std::size_t>(q));
    for (int step = 0; step < q; ++step) {
        auto next = forward_step<T>(fc, dims, w, window);
        window.erase(window.begin(), window.begin() + fc.feature_dim);
        window.insert(window.end(), next.begin(), next.end());
        preds.push_back(std::move(next));
    }
    return preds;
}

void check_window(const FcBaseline& fc, const Matrix& input) {
    if (input.rows() != fc.input_len || input.cols() != fc.feature_dim)
        throw ShapeMismatch("input window does not match the fc baseline's layout");
}

// Global RMSE of the autoregressive rollout against each sample's target,
// in stored space.
double rollout_rmse(const FcBaseline& fc, const std::vector<Sample>& set) {
    double sum_sq = 0.0;
    long count = 0;
    for (const Sample& s : set) {
        Matrix pred = predict_fc(fc, s.input, s.target.rows());
        for (int i = 0; i < pred.rows(); ++i)
            for (int j = 0; j < pred.cols(); ++j) {
                double e = pred(i, j) - s.target(i, j);
                sum_sq += e * e;
                ++count;
            }
    }
    if (count == 0) throw BadSpec("cannot score an empty sample set");
    return std::sqrt(sum_sq / static_cast<double>(count));
}

}  // namespace

Matrix predict_fc(const FcBaseline& fc, const Matrix& input, int q) {
    check_window(fc, input);
    if (q < 0) throw BadSpec("rollout length must be >= 0");
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(fc.input_len) * fc.feature_dim);
    for (int i = 0; i < input.rows(); ++i)
        for (int j = 0; j < input.cols(); ++j) window.push_back(input(i, j) / fc.input_scale);
    auto preds = rollout<double>(fc, fc.weights, std::move(window), q);
    Matrix out(q, fc.feature_dim);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < fc.feature_dim; ++j)
            out(i, j) = preds[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * fc.input_scale;
    return out;
}

FcTrainReport train_fc(FcBaseline& fc, const std::vector<Sample>& train, const std::vector<Sample>& val,
                       const FitConfig& cfg, int batch_size, int val_every) {
    FcTrainReport report;
    if (cfg.max_iters == 0) return report;  // leave the baseline untouched by contract
    if (cfg.max_iters < 0) throw BadSpec("fc training needs max_iters >= 0");
    if (batch_size < 1 || val_every < 1) throw BadSpec("batch size and validation cadence must be positive");
    if (train.empty() || val.empty()) throw BadSpec("fc training needs nonempty train and validation sets");
    for (const Sample& s : train) check_window(fc, s.input);
    for (const Sample& s : val) check_window(fc, s.input);

    // Scale from the training distribution only, so tanh layers see O(1)
    // values even on raw-count datasets. Never below 1: small data stays put.
    double max_abs = 1.0;
    for (const Sample& s : train) {
        for (double v : s.input.data()) max_abs = std::max(max_abs, std::abs(v));
        for (double v : s.target.data()) max_abs = std::max(max_abs, std::abs(v));
    }
    fc.input_scale = max_abs;

    const int d = fc.feature_dim;
    const auto dims = fc.layer_dims();
    const std::size_t n_w = fc.weights.size();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);

    std::vector<double> best_weights = fc.weights;
    double best_val = rollout_rmse(fc, val);
    report.val_curve.push_back(best_val);
    int evals_since_best = 0;

    AdamState adam;
    std::vector<double> grad(n_w);
    Tape tape;  // reset per sample: reusing capacity avoids churning the allocator
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        for (int b = 0; b < batch_size; ++b) {
            const Sample& s = train[pick(rng)];
            const int q = s.target.rows();
            tape.reset();
            std::vector<Var> w;
            w.reserve(n_w);
            for (double v : fc.weights) w.push_back(tape.leaf(v));
            std::vector<Var> window;
            window.reserve(static_cast<std::size_t>(fc.input_len) * d);
            for (int i = 0; i < s.input.rows(); ++i)
                for (int j = 0; j < d; ++j) window.push_back(tape.leaf(s.input(i, j) / fc.input_scale));
            auto preds = rollout<Var>(fc, w, std::move(window), q);
            Var loss = (preds[0][0] - preds[0][0]) * 0.0;
            for (int i = 0; i < q; ++i)
                for (int j = 0; j < d; ++j) {
                    Var e = preds[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                            s.target(i, j) / fc.input_scale;
                    loss = loss + e * e;
                }
            loss = loss * (1.0 / (static_cast<double>(q) * d));
            if (!std::isfinite(loss.value())) throw NonFiniteError("fc training loss went non-finite");
            batch_loss += loss.value();
            tape.backward(loss);
            for (std::size_t i = 0; i < n_w; ++i) grad[i] += tape.adjoint(w[i]);
        }
        for (double& g : grad) g /= batch_size;
        adam_step(fc.weights, grad, adam, cfg.lr);
        report.train_curve.push_back(batch_loss / batch_size);
        report.iters_run = iter;

        if (iter % val_every == 0) {
            double v = rollout_rmse(fc, val);
            report.val_curve.push_back(v);
            if (v < best_val) {
                best_val = v;
                best_weights = fc.weights;
                report.best_iter = iter;
                evals_since_best = 0;
            } else if (++evals_since_best >= cfg.patience) {
                break;  // patience is counted in validation evaluations
            }
        }
    }
    fc.weights = std::move(best_weights);
    report.best_val_rmse = best_val;
    return report;
}

EvalResult evaluate_split(const FcBaseline& fc, const SplitResult& split) {
    EvalResult out;
    out.interp_rmse = rollout_rmse(fc, split.interp_test);
    out.extrap_rmse = rollout_rmse(fc, split.extrap_test);
    return out;
}

}  // namespace autoode
