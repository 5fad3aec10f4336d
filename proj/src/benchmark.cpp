#include "autoode/benchmark.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>

#include "autoode/dynamics.hpp"
#include "autoode/integrate.hpp"
#include "autoode/io.hpp"
#include "autoode/parallel.hpp"

namespace autoode {

std::string to_string(SystemKind k) {
    switch (k) {
        case SystemKind::sine: return "sine";
        case SystemKind::lv: return "lv";
        case SystemKind::fhn: return "fhn";
        case SystemKind::seir: return "seir";
    }
    throw BadSpec("unknown system kind");
}

std::string to_string(ShiftKind k) {
    switch (k) {
        case ShiftKind::data_domain: return "data_domain";
        case ShiftKind::param: return "param";
        case ShiftKind::init: return "init";
    }
    throw BadSpec("unknown shift kind");
}

std::string to_string(Normalization k) {
    return k == Normalization::per_sample_minmax ? "per_sample_minmax" : "none";
}

std::string to_string(Detrend k) { return k == Detrend::difference ? "difference" : "none"; }

SystemKind system_from_string(const std::string& s) {
    if (s == "sine") return SystemKind::sine;
    if (s == "lv") return SystemKind::lv;
    if (s == "fhn") return SystemKind::fhn;
    if (s == "seir") return SystemKind::seir;
    throw BadSpec("unknown system kind: " + s);
}

ShiftKind shift_from_string(const std::string& s) {
    if (s == "data_domain") return ShiftKind::data_domain;
    if (s == "param") return ShiftKind::param;
    if (s == "init") return ShiftKind::init;
    throw BadSpec("unknown shift kind: " + s);
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "per_sample_minmax") return Normalization::per_sample_minmax;
    if (s == "none") return Normalization::none;
    throw BadSpec("unknown normalization: " + s);
}

Detrend detrend_from_string(const std::string& s) {
    if (s == "difference") return Detrend::difference;
    if (s == "none") return Detrend::none;
    throw BadSpec("unknown detrend: " + s);
}

// ===== stock datasets =====

namespace {

// Generation substeps per observed step. Deliberately finer than the fit
// models' defaults: the data should not be an artifact of the estimator's own
// discretization, and the residual mismatch gives per-sample fits a small
// stable error floor on both test sets (as with any real-world data source).
constexpr int lv_substeps = 100;  // carrying capacities near zero make the decay stiff
constexpr int fhn_substeps = 8;
constexpr int seir_substeps = 4;
constexpr int max_redraws = 64;

BenchmarkSpec lv_base() {
    BenchmarkSpec spec;
    spec.noise_sd = 0.02;
    spec.system = SystemKind::lv;
    spec.n_samples = 6000;
    spec.length = 20;
    spec.h = 0.1;
    spec.input_len = 15;
    spec.output_len = 5;
    spec.interp_range = {{"r", {0.5, 1.5}}, {"k", {0.0, 250.0}}, {"a", {0.0, 0.5}}, {"p0", {30.0, 200.0}}};
    spec.normalization = Normalization::per_sample_minmax;
    return spec;
}

BenchmarkSpec fhn_base() {
    BenchmarkSpec spec;
    spec.noise_sd = 0.02;
    spec.system = SystemKind::fhn;
    spec.n_samples = 6000;
    spec.length = 50;
    spec.h = 0.5;
    spec.input_len = 25;
    spec.output_len = 25;
    spec.interp_range = {{"a", {0.2, 0.8}}, {"b", {0.2, 0.8}}, {"c", {1.5, 5.0}}, {"x0", {2.0, 10.0}}};
    spec.normalization = Normalization::per_sample_minmax;
    return spec;
}

BenchmarkSpec seir_base() {
    BenchmarkSpec spec;
    spec.noise_sd = 0.02;
    spec.system = SystemKind::seir;
    spec.n_samples = 6000;
    spec.length = 60;
    spec.h = 1.0;
    spec.input_len = 20;
    spec.output_len = 40;
    spec.interp_range = {
        {"beta", {0.45, 0.9}}, {"sigma", {0.1, 0.5}}, {"gamma", {0.05, 0.3}}, {"i0", {30.0, 100.0}}};
    spec.detrend = Detrend::difference;
    spec.normalization = Normalization::per_sample_minmax;
    return spec;
}

}  // namespace

BenchmarkSpec BenchmarkSpec::sine() {
    BenchmarkSpec spec;  // defaults already describe the sine dataset
    spec.interp_range = {{"w", {0.5, 1.5}}, {"b", {0.0, 5.0}}};
    return spec;
}

BenchmarkSpec BenchmarkSpec::lv_k_shift() {
    BenchmarkSpec spec = lv_base();
    spec.shift_kind = ShiftKind::param;
    spec.extrap_range = {{"k", {250.0, 300.0}}};
    return spec;
}

BenchmarkSpec BenchmarkSpec::lv_p0_shift() {
    BenchmarkSpec spec = lv_base();
    spec.shift_kind = ShiftKind::init;
    spec.extrap_range = {{"p0", {0.0, 30.0}}};
    return spec;
}

BenchmarkSpec BenchmarkSpec::fhn_c_shift() {
    BenchmarkSpec spec = fhn_base();
    spec.shift_kind = ShiftKind::param;
    spec.extrap_range = {{"c", {0.5, 1.5}}};
    return spec;
}

BenchmarkSpec BenchmarkSpec::fhn_x0_shift() {
    BenchmarkSpec spec = fhn_base();
    spec.shift_kind = ShiftKind::init;
    spec.extrap_range = {{"x0", {0.0, 2.0}}};
    return spec;
}

BenchmarkSpec BenchmarkSpec::seir_beta_shift() {
    BenchmarkSpec spec = seir_base();
    spec.shift_kind = ShiftKind::param;
    spec.extrap_range = {{"beta", {0.3, 0.45}}};
    return spec;
}

BenchmarkSpec BenchmarkSpec::seir_i0_shift() {
    BenchmarkSpec spec = seir_base();
    spec.shift_kind = ShiftKind::init;
    spec.extrap_range = {{"i0", {10.0, 30.0}}};
    return spec;
}

int BenchmarkSpec::feature_dim() const {
    switch (system) {
        case SystemKind::sine: return 1;
        case SystemKind::lv: return 4;
        case SystemKind::fhn: return 2;
        case SystemKind::seir: return 4;
    }
    throw BadSpec("unknown system kind");
}

void BenchmarkSpec::validate() const {
    if (n_samples < 3) throw BadSpec("benchmark needs at least one sample per split");
    if (input_len < 1 || output_len < 1) throw BadSpec("input and output lengths must be positive");
    if (length != input_len + output_len) throw BadSpec("length must equal input_len + output_len");
    if (!(h > 0.0)) throw BadSpec("step size must be positive");
    if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(train_frac + val_frac < 1.0))
        throw BadSpec("split fractions must be positive and leave room for the test split");
    if (!(noise_sd >= 0.0) || noise_sd >= 0.5) throw BadSpec("noise_sd must lie in [0, 0.5)");
    for (const auto& [name, r] : interp_range)
        if (!(r.lo < r.hi)) throw BadSpec("interp range for " + name + " is not well ordered");
    if (shift_kind == ShiftKind::data_domain) {
        if (!extrap_range.empty()) throw BadSpec("data_domain shift takes an offset, not extrap ranges");
        return;
    }
    if (extrap_range.empty()) throw BadSpec("param/init shift needs an extrap range override");
    for (const auto& [name, r] : extrap_range) {
        if (!(r.lo < r.hi)) throw BadSpec("extrap range for " + name + " is not well ordered");
        auto it = interp_range.find(name);
        if (it == interp_range.end()) throw BadSpec("extrap override " + name + " has no interp counterpart");
        // the whole point of the extrapolation set is a range never trained on
        if (r.lo < it->second.hi && it->second.lo < r.hi)
            throw BadSpec("extrap range for " + name + " overlaps the interp range");
    }
}

// ===== generation =====

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double draw_param(std::mt19937_64& rng, const BenchmarkSpec& spec, const std::string& name, bool extrap) {
    const Range* r = nullptr;
    if (extrap) {
        auto it = spec.extrap_range.find(name);
        if (it != spec.extrap_range.end()) r = &it->second;
    }
    if (!r) r = &spec.interp_range.at(name);
    return std::uniform_real_distribution<double>(r->lo, r->hi)(rng);
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

// One simulation attempt; DivergedError propagates to the redraw loop.
Matrix simulate(const BenchmarkSpec& spec, std::mt19937_64& rng, bool extrap,
                std::map<std::string, std::vector<double>>& params) {
    const int raw_len = spec.length + (spec.detrend == Detrend::difference ? 1 : 0);
    switch (spec.system) {
        case SystemKind::sine: {
            double w = draw_param(rng, spec, "w", extrap);
            double b = draw_param(rng, spec, "b", extrap);
            params = {{"w", {w}}, {"b", {b}}};
            auto y = sine_sample(w, b, raw_len, spec.h);
            Matrix m(raw_len, 1);
            for (int i = 0; i < raw_len; ++i) m(i, 0) = y[static_cast<std::size_t>(i)];
            return m;
        }
        case SystemKind::lv: {
            std::vector<double> r(4), k(4), a(16, 1.0), p0(4);
            for (double& v : r) v = draw_param(rng, spec, "r", extrap);
            for (double& v : k) v = draw_param(rng, spec, "k", extrap);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    if (i != j) a[static_cast<std::size_t>(4 * i + j)] = draw_param(rng, spec, "a", extrap);
            for (double& v : p0) v = draw_param(rng, spec, "p0", extrap);
            params = {{"r", r}, {"k", k}, {"a", a}, {"p0", p0}};
            auto rhs = [&](double, const std::vector<double>& y) { return lv_rhs<double>(y, r, k, a); };
            return rows_to_matrix(integrate_sampled<double>(rhs, p0, TimeGrid{0.0, spec.h, raw_len - 1}, lv_substeps));
        }
        case SystemKind::fhn: {
            double a = draw_param(rng, spec, "a", extrap);
            double b = draw_param(rng, spec, "b", extrap);
            double c = draw_param(rng, spec, "c", extrap);
            double x0 = draw_param(rng, spec, "x0", extrap);
            params = {{"a", {a}}, {"b", {b}}, {"c", {c}}, {"x0", {x0}}};
            auto rhs = [&](double, const std::vector<double>& y) { return fhn_rhs<double>(y, a, b, c); };
            std::vector<double> y0{x0, 0.0};
            return rows_to_matrix(integrate_sampled<double>(rhs, y0, TimeGrid{0.0, spec.h, raw_len - 1}, fhn_substeps));
        }
        case SystemKind::seir: {
            double beta = draw_param(rng, spec, "beta", extrap);
            double sigma = draw_param(rng, spec, "sigma", extrap);
            double gamma = draw_param(rng, spec, "gamma", extrap);
            double i0 = draw_param(rng, spec, "i0", extrap);
            params = {{"beta", {beta}}, {"sigma", {sigma}}, {"gamma", {gamma}}, {"i0", {i0}}};
            auto rhs = [&](double, const std::vector<double>& y) { return seir_rhs<double>(y, beta, sigma, gamma); };
            std::vector<double> y0{1000.0 - i0, 0.0, i0, 0.0};
            return rows_to_matrix(integrate_sampled<double>(rhs, y0, TimeGrid{0.0, spec.h, raw_len - 1}, seir_substeps));
        }
    }
    throw BadSpec("unknown system kind");
}

// Finite is not enough: a trajectory that shot far outside the system's
// plausible envelope came from a step-size failure, not the dynamics.
bool plausible(SystemKind system, const Matrix& raw) {
    double lo = raw.data().front(), hi = lo;
    for (double v : raw.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    switch (system) {
        case SystemKind::sine: return true;
        case SystemKind::lv: return lo > -1.0 && hi < 2000.0;  // populations live in [0, ~max k]
        case SystemKind::fhn: return lo > -50.0 && hi < 50.0;
        case SystemKind::seir: return true;  // conserved mass keeps it in [0, N]
    }
    return false;
}

Sample finalize_sample(const BenchmarkSpec& spec, const Matrix& raw,
                       std::map<std::string, std::vector<double>> params, std::mt19937_64& rng) {
    Sample s;
    s.gen_params = std::move(params);
    Matrix stored;
    if (spec.detrend == Detrend::difference) {
        s.raw_first.assign(raw.row(0).begin(), raw.row(0).end());
        stored = Matrix(raw.rows() - 1, raw.cols());
        for (int i = 0; i + 1 < raw.rows(); ++i)
            for (int j = 0; j < raw.cols(); ++j) stored(i, j) = raw(i + 1, j) - raw(i, j);
    } else {
        stored = raw;
    }
    if (spec.noise_sd > 0.0) {
        // Relative (multiplicative) observation noise; drawn after the
        // parameter draws so those stay untouched by the knob.
        std::normal_distribution<double> gauss(0.0, spec.noise_sd);
        for (double& v : stored.data()) v *= 1.0 + gauss(rng);
        for (double& v : s.raw_first) v *= 1.0 + gauss(rng);
    }
    if (spec.normalization == Normalization::per_sample_minmax) {
        double lo = stored.data().front(), hi = lo;
        for (double v : stored.data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        // a constant sample has no range to map; store it as all zeros
        s.norm_lo = lo;
        s.norm_scale = hi - lo > 1e-12 ? hi - lo : 1.0;
        for (double& v : stored.data()) v = (v - s.norm_lo) / s.norm_scale;
    }
    s.input = Matrix(spec.input_len, stored.cols());
    s.target = Matrix(spec.output_len, stored.cols());
    for (int i = 0; i < spec.input_len; ++i)
        for (int j = 0; j < stored.cols(); ++j) s.input(i, j) = stored(i, j);
    for (int i = 0; i < spec.output_len; ++i)
        for (int j = 0; j < stored.cols(); ++j) s.target(i, j) = stored(spec.input_len + i, j);
    return s;
}

Sample make_sample(const BenchmarkSpec& spec, int split_tag, int index) {
    std::mt19937_64 rng(
        mix64(mix64(spec.seed) ^ ((static_cast<std::uint64_t>(split_tag) << 32) | static_cast<std::uint64_t>(index))));
    const bool extrap = split_tag == 3;
    for (int attempt = 0; attempt < max_redraws; ++attempt) {
        std::map<std::string, std::vector<double>> params;
        Matrix raw;
        try {
            raw = simulate(spec, rng, extrap, params);
        } catch (const DivergedError&) {
            continue;  // redraw fresh parameters from the same stream
        }
        if (!plausible(spec.system, raw)) continue;
        return finalize_sample(spec, raw, std::move(params), rng);
    }
    throw DivergedError(max_redraws);
}

}  // namespace

SplitResult generate(const BenchmarkSpec& spec, int threads) {
    spec.validate();
    const int n_train = static_cast<int>(std::llround(spec.n_samples * spec.train_frac));
    const int n_val = static_cast<int>(std::llround(spec.n_samples * spec.val_frac));
    const int n_interp = spec.n_samples - n_train - n_val;
    if (n_train < 1 || n_val < 1 || n_interp < 1) throw BadSpec("split fractions leave an empty split");

    SplitResult out;
    out.spec = spec;
    out.train = parallel_map(n_train, [&](int i) { return make_sample(spec, 0, i); }, threads);
    out.val = parallel_map(n_val, [&](int i) { return make_sample(spec, 1, i); }, threads);
    out.interp_test = parallel_map(n_interp, [&](int i) { return make_sample(spec, 2, i); }, threads);
    if (spec.shift_kind == ShiftKind::data_domain)
        out.extrap_test = shift_data_domain(out.interp_test, spec.domain_offset);
    else
        out.extrap_test = parallel_map(n_interp, [&](int i) { return make_sample(spec, 3, i); }, threads);
    return out;
}

std::vector<Sample> shift_data_domain(std::vector<Sample> set, double offset) {
    for (Sample& s : set) {
        for (double& v : s.input.data()) v += offset;
        for (double& v : s.target.data()) v += offset;
    }
    return set;
}

Matrix raw_input_series(const Sample& s) {
    const int k = s.input.rows();
    const int d = s.input.cols();
    if (s.raw_first.empty()) {
        Matrix raw(k, d);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j) raw(i, j) = s.input(i, j) * s.norm_scale + s.norm_lo;
        return raw;
    }
    if (static_cast<int>(s.raw_first.size()) != d) throw ShapeMismatch("raw_first width differs from the input");
    Matrix raw(k + 1, d);
    for (int j = 0; j < d; ++j) raw(0, j) = s.raw_first[static_cast<std::size_t>(j)];
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < d; ++j) raw(i + 1, j) = raw(i, j) + s.input(i, j) * s.norm_scale + s.norm_lo;
    return raw;
}

Matrix to_stored_space(const Sample& s, const Matrix& raw_forecast) {
    const int q = raw_forecast.rows();
    const int d = raw_forecast.cols();
    if (d != s.input.cols()) throw ShapeMismatch("forecast width differs from the sample");
    Matrix stored(q, d);
    if (s.raw_first.empty()) {
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < d; ++j) stored(i, j) = (raw_forecast(i, j) - s.norm_lo) / s.norm_scale;
        return stored;
    }
    Matrix raw_in = raw_input_series(s);
    for (int j = 0; j < d; ++j) {
        double prev = raw_in(raw_in.rows() - 1, j);
        for (int i = 0; i < q; ++i) {
            stored(i, j) = (raw_forecast(i, j) - prev - s.norm_lo) / s.norm_scale;
            prev = raw_forecast(i, j);
        }
    }
    return stored;
}

// ===== per-sample ODE evaluation =====

namespace {

struct SampleScore {
    double sum_sq = 0.0;
    long count = 0;
    bool failed = false;
};

Matrix persistence_forecast(const Matrix& raw_input, int q) {
    Matrix out(q, raw_input.cols());
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < raw_input.cols(); ++j) out(i, j) = raw_input(raw_input.rows() - 1, j);
    return out;
}

template <class Model>
Matrix fit_and_roll(const Model& model, const Trajectory& obs, const FitConfig& cfg, int q) {
    FitResult res = fit(model, obs, cfg);
    return forecast(model, obs, res, q).states;
}

SampleScore score_sample(const SplitResult& split, const Sample& s, const FitConfig& base_cfg,
                         std::uint64_t sample_key) {
    const BenchmarkSpec& spec = split.spec;
    const int q = spec.output_len;
    Matrix raw = raw_input_series(s);
    Trajectory obs;
    obs.grid = TimeGrid{0.0, spec.h, raw.rows() - 1};
    obs.states = raw;

    FitConfig cfg = base_cfg;
    cfg.seed = base_cfg.seed + mix64(sample_key);

    SampleScore score;
    Matrix pred_raw;
    try {
        switch (spec.system) {
            case SystemKind::lv: {
                LvModel model;
                pred_raw = fit_and_roll(model, obs, cfg, q);
                break;
            }
            case SystemKind::fhn: {
                FhnModel model;
                // integrate as finely as the generator: samples that survived
                // generation are only guaranteed stable on that grid
                model.n_substeps = fhn_substeps;
                pred_raw = fit_and_roll(model, obs, cfg, q);
                break;
            }
            case SystemKind::seir: {
                SeirModel model;
                model.n_total = 1000.0;
                pred_raw = fit_and_roll(model, obs, cfg, q);
                break;
            }
            case SystemKind::sine:
                throw BadSpec("sine has no ODE family to fit per sample");
        }
    } catch (const AllRestartsFailed&) {
        score.failed = true;
    } catch (const DivergedError&) {
        score.failed = true;
    } catch (const NonFiniteError&) {
        score.failed = true;
    }
    if (score.failed) pred_raw = persistence_forecast(raw, q);

    Matrix pred = to_stored_space(s, pred_raw);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < pred.cols(); ++j) {
            double e = pred(i, j) - s.target(i, j);
            score.sum_sq += e * e;
            ++score.count;
        }
    return score;
}

}  // namespace

EvalResult evaluate_split_autoode(const SplitResult& split, const FitConfig& fit, int max_samples, int threads) {
    const FitConfig& base_cfg = fit;
    auto eval_set = [&](const std::vector<Sample>& set, std::uint64_t set_tag, int& failed) {
        const int n = max_samples > 0 ? std::min<int>(max_samples, static_cast<int>(set.size()))
                                      : static_cast<int>(set.size());
        if (n == 0) throw BadSpec("cannot evaluate an empty test set");
        auto scores = parallel_map(
            n,
            [&](int i) {
                return score_sample(split, set[static_cast<std::size_t>(i)], base_cfg,
                                    (set_tag << 32) | static_cast<std::uint64_t>(i));
            },
            threads);
        double sum_sq = 0.0;
        long count = 0;
        for (const SampleScore& sc : scores) {
            sum_sq += sc.sum_sq;
            count += sc.count;
            failed += sc.failed ? 1 : 0;
        }
        return std::sqrt(sum_sq / static_cast<double>(count));
    };
    EvalResult out;
    out.interp_rmse = eval_set(split.interp_test, 2, out.interp_failed);
    out.extrap_rmse = eval_set(split.extrap_test, 3, out.extrap_failed);
    return out;
}

// ===== archives =====

namespace {

const char* split_names[4] = {"train", "val", "interp_test", "extrap_test"};

std::array<const std::vector<Sample>*, 4> split_sets(const SplitResult& s) {
    return {&s.train, &s.val, &s.interp_test, &s.extrap_test};
}

std::array<std::vector<Sample>*, 4> split_sets(SplitResult& s) {
    return {&s.train, &s.val, &s.interp_test, &s.extrap_test};
}

nlohmann::json spec_to_json(const BenchmarkSpec& spec) {
    nlohmann::json ranges_i, ranges_e;
    for (const auto& [name, r] : spec.interp_range) ranges_i[name] = {r.lo, r.hi};
    for (const auto& [name, r] : spec.extrap_range) ranges_e[name] = {r.lo, r.hi};
    return {
        {"system", to_string(spec.system)},
        {"n_samples", spec.n_samples},
        {"length", spec.length},
        {"h", spec.h},
        {"input_len", spec.input_len},
        {"output_len", spec.output_len},
        {"shift_kind", to_string(spec.shift_kind)},
        {"interp_range", ranges_i},
        {"extrap_range", ranges_e},
        {"normalization", to_string(spec.normalization)},
        {"detrend", to_string(spec.detrend)},
        {"train_frac", spec.train_frac},
        {"val_frac", spec.val_frac},
        {"domain_offset", spec.domain_offset},
        {"noise_sd", spec.noise_sd},
        {"seed", spec.seed},
    };
}

BenchmarkSpec spec_from_json(const nlohmann::json& j) {
    BenchmarkSpec spec;
    spec.system = system_from_string(j.at("system").get<std::string>());
    spec.n_samples = j.at("n_samples").get<int>();
    spec.length = j.at("length").get<int>();
    spec.h = j.at("h").get<double>();
    spec.input_len = j.at("input_len").get<int>();
    spec.output_len = j.at("output_len").get<int>();
    spec.shift_kind = shift_from_string(j.at("shift_kind").get<std::string>());
    for (const auto& [name, r] : j.at("interp_range").items())
        spec.interp_range[name] = {r.at(0).get<double>(), r.at(1).get<double>()};
    for (const auto& [name, r] : j.at("extrap_range").items())
        spec.extrap_range[name] = {r.at(0).get<double>(), r.at(1).get<double>()};
    spec.normalization = normalization_from_string(j.at("normalization").get<std::string>());
    spec.detrend = detrend_from_string(j.at("detrend").get<std::string>());
    spec.train_frac = j.at("train_frac").get<double>();
    spec.val_frac = j.at("val_frac").get<double>();
    spec.domain_offset = j.at("domain_offset").get<double>();
    spec.noise_sd = j.at("noise_sd").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
}

}  // namespace

void write_benchmark_archive(const std::string& dir, const SplitResult& split) {
    if (split.train.empty()) throw BadSpec("cannot archive a split with no training samples");
    std::filesystem::create_directories(dir);
    const int d = split.spec.feature_dim();
    const auto sets = split_sets(split);

    for (int si = 0; si < 4; ++si) {
        const auto& set = *sets[static_cast<std::size_t>(si)];
        CsvTable table;
        table.header = {"sample_id", "step"};
        for (int j = 0; j < d; ++j) table.header.push_back("feature_" + std::to_string(j));
        for (std::size_t i = 0; i < set.size(); ++i) {
            const Sample& s = set[i];
            auto push_rows = [&](const Matrix& m, int step0) {
                for (int r = 0; r < m.rows(); ++r) {
                    std::vector<std::string> row{std::to_string(i), std::to_string(step0 + r)};
                    for (int j = 0; j < d; ++j) row.push_back(format_double(m(r, j)));
                    table.rows.push_back(std::move(row));
                }
            };
            push_rows(s.input, 0);
            push_rows(s.target, s.input.rows());
        }
        write_csv(dir + "/" + split_names[si] + ".csv", table);
    }

    // gen params plus the per-sample transform state, one wide row per sample
    CsvTable params;
    params.header = {"split", "sample_id", "norm_lo", "norm_scale"};
    const Sample& probe = split.train.front();
    for (std::size_t j = 0; j < probe.raw_first.size(); ++j)
        params.header.push_back("raw_first_" + std::to_string(j));
    for (const auto& [name, values] : probe.gen_params) {
        if (values.size() == 1)
            params.header.push_back(name);
        else
            for (std::size_t j = 0; j < values.size(); ++j)
                params.header.push_back(name + "_" + std::to_string(j));
    }
    for (int si = 0; si < 4; ++si) {
        for (std::size_t i = 0; i < sets[static_cast<std::size_t>(si)]->size(); ++i) {
            const Sample& s = (*sets[static_cast<std::size_t>(si)])[i];
            std::vector<std::string> row{split_names[si], std::to_string(i), format_double(s.norm_lo),
                                         format_double(s.norm_scale)};
            for (double v : s.raw_first) row.push_back(format_double(v));
            for (const auto& [name, values] : s.gen_params)
                for (double v : values) row.push_back(format_double(v));
            if (row.size() != params.header.size()) throw ShapeMismatch("inconsistent gen params across samples");
            params.rows.push_back(std::move(row));
        }
    }
    write_csv(dir + "/params.csv", params);
    write_json(dir + "/spec.json", spec_to_json(split.spec));
}

SplitResult read_benchmark_archive(const std::string& dir) {
    SplitResult out;
    out.spec = spec_from_json(read_json(dir + "/spec.json"));
    const int d = out.spec.feature_dim();
    const int k = out.spec.input_len;
    const int q = out.spec.output_len;

    // params.csv first: it defines how many samples each split has
    auto sets = split_sets(out);
    CsvTable params = read_csv(dir + "/params.csv");
    const std::size_t n_raw_first = out.spec.detrend == Detrend::difference ? static_cast<std::size_t>(d) : 0;
    for (const auto& row : params.rows) {
        int si = -1;
        for (int c = 0; c < 4; ++c)
            if (row[0] == split_names[c]) si = c;
        if (si < 0) throw ParseError(dir + "/params.csv", 0, "unknown split name " + row[0]);
        Sample s;
        s.norm_lo = std::stod(row[2]);
        s.norm_scale = std::stod(row[3]);
        std::size_t col = 4;
        for (std::size_t j = 0; j < n_raw_first; ++j) s.raw_first.push_back(std::stod(row[col++]));
        // header names like "w" or "k_2" map back onto vector-valued params
        while (col < row.size()) {
            std::string name = params.header[col];
            if (auto pos = name.find_last_of('_');
                pos != std::string::npos && name.find_first_not_of("0123456789", pos + 1) == std::string::npos)
                name = name.substr(0, pos);
            s.gen_params[name].push_back(std::stod(row[col++]));
        }
        sets[static_cast<std::size_t>(si)]->push_back(std::move(s));
    }

    for (int si = 0; si < 4; ++si) {
        auto& set = *sets[static_cast<std::size_t>(si)];
        CsvTable table = read_csv(dir + "/" + std::string(split_names[si]) + ".csv");
        if (table.rows.size() != set.size() * static_cast<std::size_t>(k + q))
            throw ParseError(dir, 0, std::string(split_names[si]) + ".csv row count disagrees with params.csv");
        for (auto& s : set) {
            s.input = Matrix(k, d);
            s.target = Matrix(q, d);
        }
        for (const auto& row : table.rows) {
            std::size_t id = static_cast<std::size_t>(std::stol(row[0]));
            int step = std::stoi(row[1]);
            if (id >= set.size() || step < 0 || step >= k + q) throw ParseError(dir, 0, "sample row out of range");
            Matrix& m = step < k ? set[id].input : set[id].target;
            int r = step < k ? step : step - k;
            for (int j = 0; j < d; ++j) m(r, j) = std::stod(row[static_cast<std::size_t>(2 + j)]);
        }
    }
    return out;
}

}  // namespace autoode
