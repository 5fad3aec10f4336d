#pragma once

#include <cstdint>
#include <vector>

#include "autoode/benchmark.hpp"
#include "autoode/estimation.hpp"
#include "autoode/matrix.hpp"

// Autoregressive fully connected baseline: a plain MLP mapping the last
// input_len observed rows (flattened) to the next row, rolled out by
// feeding its own predictions back in.

namespace autoode {

struct FcBaseline {
    int input_len = 0;
    int feature_dim = 0;
    std::vector<int> hidden{128, 128};
    bool linear = false;  // identity activation instead of tanh (tests)
    // Features are divided by this inside the net so tanh layers see O(1)
    // values; predictions are scaled back, so callers never see it.
    double input_scale = 1.0;
    // Layer-by-layer [W row-major | bias]; see layer_dims().
    std::vector<double> weights;

    // Xavier-uniform weights, zero biases. hidden may be empty (one linear map).
    static FcBaseline make(int input_len, int feature_dim, std::vector<int> hidden = {128, 128},
                           std::uint64_t seed = 0);

    std::vector<int> layer_dims() const;  // {input_len * feature_dim, hidden..., feature_dim}
    int n_weights() const;
};

// Roll the net forward q steps from the given input window (stored space).
// Prediction j depends only on the window and predictions before j.
Matrix predict_fc(const FcBaseline& fc, const Matrix& input, int q);

struct FcTrainReport {
    std::vector<double> train_curve;  // minibatch loss per iteration
    std::vector<double> val_curve;    // validation RMSE per evaluation
    double best_val_rmse = 0.0;
    int best_iter = 0;
    int iters_run = 0;
};

// Adam on the full rollout L2 loss, minibatched; the weights with the best
// validation RMSE seen are the ones kept. cfg.max_iters == 0 leaves the
// baseline untouched. Single-threaded by design.
FcTrainReport train_fc(FcBaseline& fc, const std::vector<Sample>& train, const std::vector<Sample>& val,
                       const FitConfig& cfg, int batch_size = 16, int val_every = 10);

// RMSE of the trained net on both test sets, in stored space.
EvalResult evaluate_split(const FcBaseline& fc, const SplitResult& split);

}  // namespace autoode
