#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "autoode/estimation.hpp"
#include "autoode/matrix.hpp"

// Synthetic forecasting benchmark with a controlled distribution shift
// between the training distribution and the extrapolation test set. Each
// dataset is a family of short trajectories from one dynamical system;
// the shift moves either the data domain (a constant offset), one system
// parameter, or one initial value into a range never seen in training.

namespace autoode {

enum class SystemKind { sine, lv, fhn, seir };
enum class ShiftKind { data_domain, param, init };
enum class Normalization { per_sample_minmax, none };
enum class Detrend { difference, none };

std::string to_string(SystemKind k);
std::string to_string(ShiftKind k);
std::string to_string(Normalization k);
std::string to_string(Detrend k);
SystemKind system_from_string(const std::string& s);
ShiftKind shift_from_string(const std::string& s);
Normalization normalization_from_string(const std::string& s);
Detrend detrend_from_string(const std::string& s);

// Closed uniform sampling range.
struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct BenchmarkSpec {
    SystemKind system = SystemKind::sine;
    // Samples drawn from the interpolation ranges; split into train/val/
    // interp_test by the fractions below. The extrapolation test set is
    // extra: same size as interp_test, drawn with the extrap overrides
    // (param/init shift) or derived by shifting interp_test (data_domain).
    int n_samples = 2000;
    int length = 60;  // modeled series length; always input_len + output_len
    double h = 0.2;   // time between consecutive series points
    int input_len = 30;
    int output_len = 30;
    ShiftKind shift_kind = ShiftKind::data_domain;
    // interp_range holds every sampled quantity; extrap_range holds only the
    // shifted quantity's override and must be disjoint from its counterpart.
    std::map<std::string, Range> interp_range;
    std::map<std::string, Range> extrap_range;
    Normalization normalization = Normalization::none;
    Detrend detrend = Detrend::none;
    double train_frac = 0.6;
    double val_frac = 0.2;  // remainder of n_samples is interp_test
    double domain_offset = 1.0;  // shift size for data_domain
    // Relative observation noise: every stored value (and the kept base row
    // under differencing) is scaled by 1 + N(0, noise_sd), i.i.d. Applied
    // identically to every split, it puts the same irreducible error floor
    // under both test sets, which keeps error ratios between them meaningful
    // even for estimators that would fit noiseless data exactly.
    double noise_sd = 0.0;
    std::uint64_t seed = 0;

    // The seven stock datasets. Shift presets differ only in which quantity
    // the extrapolation set moves out of range.
    static BenchmarkSpec sine();
    static BenchmarkSpec lv_k_shift();
    static BenchmarkSpec lv_p0_shift();
    static BenchmarkSpec fhn_c_shift();
    static BenchmarkSpec fhn_x0_shift();
    static BenchmarkSpec seir_beta_shift();
    static BenchmarkSpec seir_i0_shift();

    int feature_dim() const;  // state dimension of the system
    void validate() const;    // throws BadSpec on any violated invariant
};

// One (input window, forecast target) pair in stored space, i.e. after
// detrending and normalization. The bookkeeping fields are exactly enough
// to undo the per-sample transform.
struct Sample {
    Matrix input;   // input_len x d
    Matrix target;  // output_len x d
    std::map<std::string, std::vector<double>> gen_params;  // audit trail
    double norm_lo = 0.0;
    double norm_scale = 1.0;         // stored = (value - norm_lo) / norm_scale
    std::vector<double> raw_first;   // first raw row when differenced, else empty
};

struct SplitResult {
    BenchmarkSpec spec;
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> interp_test;
    std::vector<Sample> extrap_test;
};

// Deterministic under spec.seed: every sample has its own RNG stream keyed
// by (seed, split, index), so thread count cannot change the data. Samples
// whose integration diverges are redrawn from the same stream (bounded
// retries), which skews the realized distribution away from the stiffest
// parameter corners but treats every split identically.
SplitResult generate(const BenchmarkSpec& spec, int threads = 0);

// Add a constant to every stored value, inputs and targets alike.
std::vector<Sample> shift_data_domain(std::vector<Sample> set, double offset);

// Undo the sample's stored-space transform on its input window. When the
// sample was differenced the result has input_len + 1 rows (the retained
// base row plus the cumulative sums); otherwise input_len rows.
Matrix raw_input_series(const Sample& s);

// Map a raw forecast (output_len x d rows that continue the raw input
// series) into the sample's stored space for comparison against target.
Matrix to_stored_space(const Sample& s, const Matrix& raw_forecast);

struct EvalResult {
    double interp_rmse = 0.0;
    double extrap_rmse = 0.0;
    // Per-sample ODE fits that failed outright; such samples enter the RMSE
    // at a persistence forecast instead of being dropped.
    int interp_failed = 0;
    int extrap_failed = 0;
};

// Fit the generating ODE family to each test sample's input window
// individually and score the rollout against the target. max_samples > 0
// caps how many samples of each test set are evaluated (deterministic
// prefix); 0 evaluates everything.
EvalResult evaluate_split_autoode(const SplitResult& split, const FitConfig& fit, int max_samples = 0,
                                  int threads = 0);

// Dataset archive: one CSV per split with columns
// sample_id, step, feature_0..d-1 (input rows first, then target rows),
// params.csv with the flattened generating parameters, spec.json.
void write_benchmark_archive(const std::string& dir, const SplitResult& split);
SplitResult read_benchmark_archive(const std::string& dir);

}  // namespace autoode
