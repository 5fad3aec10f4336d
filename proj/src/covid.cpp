#include "autoode/covid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "autoode/io.hpp"

namespace autoode {

namespace {

double parse_count(const std::string& text, const std::string& path, int line) {
    const char* begin = text.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + text.size() || text.empty() || !std::isfinite(v))
        throw ParseError(path, line, "bad numeric value '" + text + "'");
    if (v < 0.0) throw ParseError(path, line, "negative count '" + text + "'");
    return v;
}

struct WideSeries {
    std::vector<int> dates;
    std::map<std::string, std::vector<double>> by_state;  // aggregated over county rows
};

WideSeries read_wide_counts(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.size() < 2 || t.header[0] != "state")
        throw ParseError(path, 1, "want header 'state,<ISO dates...>'");
    WideSeries out;
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        try {
            out.dates.push_back(parse_date(t.header[c]));
        } catch (const DomainError& e) {
            throw ParseError(path, 1, e.what());
        }
    }
    std::vector<std::string> missing;
    for (std::size_t c = 1; c < out.dates.size(); ++c) {
        if (out.dates[c] <= out.dates[c - 1])
            throw ParseError(path, 1, "date columns must be strictly increasing");
        for (int s = out.dates[c - 1] + 1; s < out.dates[c]; ++s) missing.push_back(format_date(s));
    }
    if (!missing.empty()) {
        std::string list = missing[0];
        for (std::size_t i = 1; i < std::min<std::size_t>(missing.size(), 5); ++i) list += ", " + missing[i];
        if (missing.size() > 5) list += ", ...";
        throw DateGap(path + " is missing dates: " + list);
    }

    int line = 2;
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size())
            throw ParseError(path, line, "row has " + std::to_string(row.size()) + " fields, want " +
                                             std::to_string(t.header.size()));
        if (row[0].empty()) throw ParseError(path, line, "empty state code");
        auto& acc = out.by_state[row[0]];
        if (acc.empty()) acc.assign(out.dates.size(), 0.0);
        double prev = 0.0;  // forward fill within the row
        for (std::size_t c = 1; c < row.size(); ++c) {
            double v = row[c].empty() ? prev : parse_count(row[c], path, line);
            acc[c - 1] += v;
            prev = v;
        }
        ++line;
    }
    if (out.by_state.empty()) throw ParseError(path, 0, "no data rows");
    return out;
}

void clean_cumulative(std::vector<double>& series) {
    // increments come from the raw series, so one downward revision does not
    // swallow the next day's rebound: (100, 98, 105) -> (100, 100, 107)
    double raw_prev = series.empty() ? 0.0 : series[0];
    for (std::size_t t = 1; t < series.size(); ++t) {
        double inc = std::max(series[t] - raw_prev, 0.0);
        raw_prev = series[t];
        series[t] = series[t - 1] + inc;
    }
}

Matrix slice_to_panel(const WideSeries& s, const std::vector<std::string>& states, int first, int last,
                      const std::string& path) {
    int offset = first - s.dates.front();
    int n_dates = last - first + 1;
    Matrix m(n_dates, static_cast<int>(states.size()));
    for (std::size_t j = 0; j < states.size(); ++j) {
        auto it = s.by_state.find(states[j]);
        if (it == s.by_state.end()) throw UnknownState("state " + states[j] + " missing from " + path);
        std::vector<double> col(it->second.begin() + offset, it->second.begin() + offset + n_dates);
        clean_cumulative(col);
        for (int t = 0; t < n_dates; ++t) m(t, static_cast<int>(j)) = col[static_cast<std::size_t>(t)];
    }
    return m;
}

int median_index(const std::vector<double>& quantiles) {
    if (quantiles.empty()) throw BadSpec("need at least one quantile");
    int best = 0;
    for (std::size_t i = 1; i < quantiles.size(); ++i)
        if (std::abs(quantiles[i] - 0.5) < std::abs(quantiles[static_cast<std::size_t>(best)] - 0.5))
            best = static_cast<int>(i);
    return best;
}

// type-7 empirical quantile of a pre-sorted sample
double sorted_quantile(const std::vector<double>& sorted, double tau) {
    if (sorted.empty()) throw BadSpec("quantile of an empty sample");
    double h = (static_cast<double>(sorted.size()) - 1.0) * tau;
    auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

}  // namespace

CovidPanel load_jhu_csv(const std::string& path_confirmed, const std::string& path_recovered,
                        const std::string& path_deaths, const std::string& path_population,
                        const std::string& path_adjacency) {
    WideSeries confirmed = read_wide_counts(path_confirmed);
    WideSeries recovered = read_wide_counts(path_recovered);
    WideSeries deaths = read_wide_counts(path_deaths);

    CovidPanel panel;
    for (const auto& [code, _] : confirmed.by_state) panel.states.push_back(code);

    int first = std::max({confirmed.dates.front(), recovered.dates.front(), deaths.dates.front()});
    int last = std::min({confirmed.dates.back(), recovered.dates.back(), deaths.dates.back()});
    if (first > last) throw DateGap("input files have no dates in common");
    bool aligned = confirmed.dates.front() == recovered.dates.front() &&
                   confirmed.dates.front() == deaths.dates.front() &&
                   confirmed.dates.back() == recovered.dates.back() &&
                   confirmed.dates.back() == deaths.dates.back();
    if (!aligned)
        panel.warnings.push_back("date ranges differ across input files; using " + format_date(first) +
                                 " to " + format_date(last));
    for (int s = first; s <= last; ++s) panel.dates.push_back(s);

    panel.infected = slice_to_panel(confirmed, panel.states, first, last, path_confirmed);
    panel.recovered = slice_to_panel(recovered, panel.states, first, last, path_recovered);
    panel.deaths = slice_to_panel(deaths, panel.states, first, last, path_deaths);
    for (const auto& [code, _] : recovered.by_state)
        if (!confirmed.by_state.count(code))
            throw UnknownState("state " + code + " in " + path_recovered + " is absent from " + path_confirmed);
    for (const auto& [code, _] : deaths.by_state)
        if (!confirmed.by_state.count(code))
            throw UnknownState("state " + code + " in " + path_deaths + " is absent from " + path_confirmed);

    CsvTable pop = read_csv(path_population);
    if (pop.header.size() != 2 || pop.header[0] != "state" || pop.header[1] != "population")
        throw ParseError(path_population, 1, "want header 'state,population'");
    std::map<std::string, double> pop_by_state;
    int line = 2;
    for (const auto& row : pop.rows) {
        if (row.size() != 2) throw ParseError(path_population, line, "want two fields per row");
        double v = parse_count(row[1], path_population, line);
        if (v <= 0.0) throw ParseError(path_population, line, "population must be positive");
        pop_by_state[row[0]] = v;
        ++line;
    }
    for (const auto& code : panel.states) {
        auto it = pop_by_state.find(code);
        if (it == pop_by_state.end())
            throw UnknownState("state " + code + " missing from " + path_population);
        panel.population.push_back(it->second);
    }

    CsvTable adj = read_csv(path_adjacency);
    if (adj.header.size() < 2) throw ParseError(path_adjacency, 1, "want header '<label>,<codes...>'");
    std::map<std::string, int> col_of;
    for (std::size_t c = 1; c < adj.header.size(); ++c) col_of[adj.header[c]] = static_cast<int>(c);
    std::map<std::string, const std::vector<std::string>*> row_of;
    for (const auto& row : adj.rows) {
        if (row.size() != adj.header.size())
            throw ParseError(path_adjacency, 0, "adjacency rows must match the header width");
        row_of[row[0]] = &row;
    }
    int n = static_cast<int>(panel.states.size());
    panel.adjacency = Matrix(n, n, 0.0);
    for (int i = 0; i < n; ++i) {
        auto rit = row_of.find(panel.states[static_cast<std::size_t>(i)]);
        if (rit == row_of.end())
            throw UnknownState("state " + panel.states[static_cast<std::size_t>(i)] + " missing from " +
                               path_adjacency);
        for (int j = 0; j < n; ++j) {
            auto cit = col_of.find(panel.states[static_cast<std::size_t>(j)]);
            if (cit == col_of.end())
                throw UnknownState("state " + panel.states[static_cast<std::size_t>(j)] +
                                   " missing from " + path_adjacency + " columns");
            const std::string& cell = (*rit->second)[static_cast<std::size_t>(cit->second)];
            if (cell != "0" && cell != "1")
                throw ParseError(path_adjacency, 0, "adjacency entries must be 0 or 1, got '" + cell + "'");
            panel.adjacency(i, j) = cell == "1" ? 1.0 : 0.0;
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (panel.adjacency(i, j) != panel.adjacency(j, i))
                throw BadSpec("adjacency must be symmetric (" + panel.states[static_cast<std::size_t>(i)] +
                              " vs " + panel.states[static_cast<std::size_t>(j)] + ")");
    return panel;
}

FitWindow prepare_fit_window(const CovidPanel& panel, int week_start, int k) {
    if (k < 2) throw BadSpec("fit window needs k >= 2 days");
    if (panel.dates.empty()) throw InsufficientHistory("panel has no dates");
    int first_needed = week_start - k;
    int last_needed = week_start - 1;
    if (first_needed < panel.dates.front() || last_needed > panel.dates.back())
        throw InsufficientHistory("need " + format_date(first_needed) + " to " + format_date(last_needed) +
                                  ", panel covers " + format_date(panel.dates.front()) + " to " +
                                  format_date(panel.dates.back()));
    int n = static_cast<int>(panel.states.size());
    int offset = first_needed - panel.dates.front();
    FitWindow window;
    window.week_start = week_start;
    window.observations = Matrix(k, 3 * n);
    for (int t = 0; t < k; ++t) {
        window.dates.push_back(first_needed + t);
        for (int i = 0; i < n; ++i) {
            double p = panel.population[static_cast<std::size_t>(i)];
            window.observations(t, i) = panel.infected(offset + t, i) / p;
            window.observations(t, n + i) = panel.recovered(offset + t, i) / p;
            window.observations(t, 2 * n + i) = panel.deaths(offset + t, i) / p;
        }
    }
    return window;
}

CovidFit fit_covid(const CovidPanel& panel, const FitWindow& window, const CovidConfig& config) {
    int n = static_cast<int>(panel.states.size());
    if (window.observations.cols() != 3 * n) throw ShapeMismatch("window does not match the panel");
    int k = window.observations.rows();
    CovidModel model(AdjacencyMask::from_matrix(panel.adjacency), config.k_rank, config.n_breakpoints,
                     static_cast<double>(k), config.seed_init_lo, config.seed_init_hi);
    model.n_substeps = config.substeps;

    FitConfig fc = config.fit;
    if (fc.feature_weights.empty()) {
        fc.feature_weights.assign(static_cast<std::size_t>(3 * n), 1.0);
        for (int i = 0; i < n; ++i) {
            fc.feature_weights[static_cast<std::size_t>(n + i)] = fc.alpha1;
            fc.feature_weights[static_cast<std::size_t>(2 * n + i)] = fc.alpha2;
        }
    }
    Trajectory obs{TimeGrid{0.0, 1.0, k - 1}, window.observations};
    FitResult result = fit(model, obs, fc);
    return CovidFit{std::move(model), window, std::move(result), config};
}

CovidForecast forecast_covid(const CovidPanel& panel, const CovidFit& fit, int horizon,
                             std::vector<double> quantiles) {
    if (horizon < 1) throw BadSpec("forecast horizon must be >= 1");
    std::sort(quantiles.begin(), quantiles.end());
    for (double q : quantiles)
        if (!(q > 0.0 && q < 1.0)) throw BadSpec("quantiles must lie in (0, 1)");

    const int n = fit.model.n;
    const int k = fit.window.observations.rows();
    Trajectory obs{TimeGrid{0.0, 1.0, k - 1}, fit.window.observations};
    Trajectory ahead = forecast(fit.model, obs, fit.result, horizon);

    const std::vector<int> idx = fit.model.observed_indices();
    Matrix median_frac(horizon, 3 * n);
    for (int t = 0; t < horizon; ++t)
        for (int f = 0; f < 3 * n; ++f)
            median_frac(t, f) = ahead.states(t, idx[static_cast<std::size_t>(f)]);

    // in-window residuals of the fitted rollout, per observed column
    ParamBlocks<double> p = transform_blocks(fit.result.params.specs, fit.result.params.raw);
    auto lift = [](double v) { return v; };
    auto y0 = fit.model.initial_state<double>(fit.window.observations.row(0), p, lift);
    auto rhs = fit.model.make_rhs<double>(p);
    auto fitted = integrate_sampled<double>(rhs, std::move(y0), TimeGrid{0.0, 1.0, k - 1},
                                            fit.model.substeps());

    std::vector<std::vector<double>> offsets(quantiles.size(), std::vector<double>(static_cast<std::size_t>(3 * n)));
    std::vector<double> residuals(static_cast<std::size_t>(k));
    for (int f = 0; f < 3 * n; ++f) {
        for (int t = 0; t < k; ++t)
            residuals[static_cast<std::size_t>(t)] =
                fit.window.observations(t, f) -
                fitted[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx[static_cast<std::size_t>(f)])];
        std::sort(residuals.begin(), residuals.end());
        double center = sorted_quantile(residuals, 0.5);
        for (std::size_t q = 0; q < quantiles.size(); ++q)
            offsets[q][static_cast<std::size_t>(f)] = sorted_quantile(residuals, quantiles[q]) - center;
    }

    CovidForecast out;
    out.states = panel.states;
    out.quantiles = quantiles;
    for (int t = 0; t < horizon; ++t) out.dates.push_back(fit.window.week_start + t);
    out.values.assign(quantiles.size(), Matrix(horizon, 3 * n));
    std::vector<double> cell(quantiles.size());
    for (int t = 0; t < horizon; ++t) {
        for (int f = 0; f < 3 * n; ++f) {
            double pop = panel.population[static_cast<std::size_t>(f % n)];
            for (std::size_t q = 0; q < quantiles.size(); ++q)
                cell[q] = std::max(median_frac(t, f) + offsets[q][static_cast<std::size_t>(f)], 0.0) * pop;
            std::sort(cell.begin(), cell.end());  // quantile monotonicity per cell
            for (std::size_t q = 0; q < quantiles.size(); ++q) out.values[q](t, f) = cell[q];
        }
    }
    return out;
}

const Matrix& forecast_median(const CovidForecast& forecast) {
    return forecast.values[static_cast<std::size_t>(median_index(forecast.quantiles))];
}

MaeTable evaluate_mae(const CovidPanel& panel, const CovidForecast& forecast) {
    int n = static_cast<int>(panel.states.size());
    if (forecast.states != panel.states) throw ShapeMismatch("forecast states do not match the panel");
    const Matrix& median = forecast_median(forecast);
    if (median.cols() != 3 * n) throw ShapeMismatch("forecast width does not match the panel");

    MaeTable table;
    int horizon = static_cast<int>(forecast.dates.size());
    for (int t = 0; t < horizon; ++t) {
        int pos = forecast.dates[static_cast<std::size_t>(t)] - panel.dates.front();
        if (pos < 0 || pos >= static_cast<int>(panel.dates.size()))
            throw ShapeMismatch("forecast date " + format_date(forecast.dates[static_cast<std::size_t>(t)]) +
                                " is outside the panel");
        for (int i = 0; i < n; ++i) {
            table.infected += std::abs(median(t, i) - panel.infected(pos, i));
            table.recovered += std::abs(median(t, n + i) - panel.recovered(pos, i));
            table.deaths += std::abs(median(t, 2 * n + i) - panel.deaths(pos, i));
        }
    }
    double cells = static_cast<double>(horizon) * n;
    table.infected /= cells;
    table.recovered /= cells;
    table.deaths /= cells;
    return table;
}

void write_forecast_csv(const std::string& path, const CovidForecast& forecast) {
    const int n = static_cast<int>(forecast.states.size());
    static const char* features[3] = {"I", "R", "D"};
    CsvTable t;
    t.header = {"state", "date", "feature", "quantile", "value"};
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < static_cast<int>(forecast.dates.size()); ++d)
            for (int f = 0; f < 3; ++f)
                for (std::size_t q = 0; q < forecast.quantiles.size(); ++q)
                    t.rows.push_back({forecast.states[static_cast<std::size_t>(i)],
                                      format_date(forecast.dates[static_cast<std::size_t>(d)]), features[f],
                                      format_double(forecast.quantiles[q]),
                                      format_double(forecast.values[q](d, f * n + i))});
    write_csv(path, t);
}

namespace {

struct BorderEntry {
    const char* code;
    const char* neighbors;
};

// Land borders plus the two four-corner point pairs (AZ-CO, NM-UT). Michigan
// keeps only its land neighbors (IN, OH, WI); water-only contacts (MI-IL,
// MI-MN, RI-NY) are excluded. AK and HI have no entries: self-only.
constexpr BorderEntry kBorders[] = {
    {"AK", ""},
    {"AL", "FL,GA,MS,TN"},
    {"AR", "LA,MO,MS,OK,TN,TX"},
    {"AZ", "CA,CO,NM,NV,UT"},
    {"CA", "AZ,NV,OR"},
    {"CO", "AZ,KS,NE,NM,OK,UT,WY"},
    {"CT", "MA,NY,RI"},
    {"DE", "MD,NJ,PA"},
    {"FL", "AL,GA"},
    {"GA", "AL,FL,NC,SC,TN"},
    {"HI", ""},
    {"IA", "IL,MN,MO,NE,SD,WI"},
    {"ID", "MT,NV,OR,UT,WA,WY"},
    {"IL", "IA,IN,KY,MO,WI"},
    {"IN", "IL,KY,MI,OH"},
    {"KS", "CO,MO,NE,OK"},
    {"KY", "IL,IN,MO,OH,TN,VA,WV"},
    {"LA", "AR,MS,TX"},
    {"MA", "CT,NH,NY,RI,VT"},
    {"MD", "DE,PA,VA,WV"},
    {"ME", "NH"},
    {"MI", "IN,OH,WI"},
    {"MN", "IA,ND,SD,WI"},
    {"MO", "AR,IA,IL,KS,KY,NE,OK,TN"},
    {"MS", "AL,AR,LA,TN"},
    {"MT", "ID,ND,SD,WY"},
    {"NC", "GA,SC,TN,VA"},
    {"ND", "MN,MT,SD"},
    {"NE", "CO,IA,KS,MO,SD,WY"},
    {"NH", "MA,ME,VT"},
    {"NJ", "DE,NY,PA"},
    {"NM", "AZ,CO,OK,TX,UT"},
    {"NV", "AZ,CA,ID,OR,UT"},
    {"NY", "CT,MA,NJ,PA,VT"},
    {"OH", "IN,KY,MI,PA,WV"},
    {"OK", "AR,CO,KS,MO,NM,TX"},
    {"OR", "CA,ID,NV,WA"},
    {"PA", "DE,MD,NJ,NY,OH,WV"},
    {"RI", "CT,MA"},
    {"SC", "GA,NC"},
    {"SD", "IA,MN,MT,ND,NE,WY"},
    {"TN", "AL,AR,GA,KY,MO,MS,NC,VA"},
    {"TX", "AR,LA,NM,OK"},
    {"UT", "AZ,CO,ID,NM,NV,WY"},
    {"VA", "KY,MD,NC,TN,WV"},
    {"VT", "MA,NH,NY"},
    {"WA", "ID,OR"},
    {"WI", "IA,IL,MI,MN"},
    {"WV", "KY,MD,OH,PA,VA"},
    {"WY", "CO,ID,MT,NE,SD,UT"},
};

}  // namespace

const std::vector<std::string>& us_state_codes() {
    static const std::vector<std::string> codes = [] {
        std::vector<std::string> c;
        for (const auto& entry : kBorders) c.emplace_back(entry.code);
        return c;
    }();
    return codes;
}

Matrix us_state_adjacency() {
    const auto& codes = us_state_codes();
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < codes.size(); ++i) index[codes[i]] = static_cast<int>(i);
    Matrix m(static_cast<int>(codes.size()), static_cast<int>(codes.size()), 0.0);
    for (const auto& entry : kBorders) {
        int i = index.at(entry.code);
        m(i, i) = 1.0;
        std::string list = entry.neighbors;
        std::size_t pos = 0;
        while (pos < list.size()) {
            std::size_t comma = list.find(',', pos);
            std::string code = list.substr(pos, comma == std::string::npos ? comma : comma - pos);
            int j = index.at(code);
            m(i, j) = 1.0;
            m(j, i) = 1.0;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    return m;
}

void write_adjacency_csv(const std::string& path, const std::vector<std::string>& codes,
                         const Matrix& adjacency) {
    if (adjacency.rows() != static_cast<int>(codes.size()) || adjacency.cols() != adjacency.rows())
        throw ShapeMismatch("adjacency must be square over the given codes");
    CsvTable t;
    t.header.push_back("state");
    for (const auto& code : codes) t.header.push_back(code);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        std::vector<std::string> row{codes[i]};
        for (std::size_t j = 0; j < codes.size(); ++j)
            row.push_back(adjacency(static_cast<int>(i), static_cast<int>(j)) == 1.0 ? "1" : "0");
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

SyntheticPanel synthetic_panel(const SynthConfig& config) {
    if (config.n_days < 2) throw BadSpec("synthetic panel needs at least two days");
    const auto& all_codes = us_state_codes();
    int n = config.n_states == 0 ? static_cast<int>(all_codes.size()) : config.n_states;
    if (n < 1 || n > static_cast<int>(all_codes.size()))
        throw BadSpec("n_states must be between 1 and " + std::to_string(all_codes.size()));

    SyntheticPanel out;
    CovidPanel& panel = out.panel;
    panel.states.assign(all_codes.begin(), all_codes.begin() + n);
    Matrix full = us_state_adjacency();
    panel.adjacency = Matrix(n, n, 0.0);
    for (int i = 0; i < n; ++i) {
        panel.adjacency(i, i) = 1.0;
        for (int j = 0; j < n; ++j)
            if (full(i, j) == 1.0) panel.adjacency(i, j) = 1.0;
    }
    for (int d = 0; d < config.n_days; ++d) panel.dates.push_back(config.start_date + d);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

    for (int i = 0; i < n; ++i)
        panel.population.push_back(std::round(std::exp(uniform(std::log(7e5), std::log(3e7)))));

    const int k_rank = 5;
    const bool kinked = config.beta_kink_day > 0.0;
    CovidModel model(AdjacencyMask::from_matrix(panel.adjacency), k_rank, kinked ? 1 : 0,
                     static_cast<double>(config.n_days));
    model.n_substeps = 2;

    // Transformed parameter blocks, built directly in model units. Each
    // state's transmission row sum is normalized (a column rescale of the B
    // factor, so the matrix stays inside the masked low-rank family) and its
    // rate is set from gamma/sigma/mu to pin the linearized early growth rate
    // of the exposed-infected subsystem near `g`; daily growth then stays a
    // few percent and cumulative counts rise through the whole range.
    ParamBlocks<double> p(model.param_specs().size());
    auto fill = [&](int block, int count, double lo, double hi) {
        for (int i = 0; i < count; ++i) p[static_cast<std::size_t>(block)].push_back(uniform(lo, hi));
    };
    fill(model.idx_b(), k_rank * n, 0.12, 0.30);
    fill(model.idx_d(), k_rank * n, 0.12, 0.30);
    fill(model.idx_sigma(), n, 0.25, 0.45);
    fill(model.idx_mu(), n, 0.45, 0.70);
    fill(model.idx_gamma(), n, 0.08, 0.14);
    fill(model.idx_death_a(), n, 0.0, 0.0);
    fill(model.idx_death_b(), n, 0.01, 0.03);
    fill(model.idx_e0(), n, 0.0, 0.0);  // unused: the state below is explicit
    fill(model.idx_u0(), n, 0.0, 0.0);

    auto& b_block = p[static_cast<std::size_t>(model.idx_b())];
    const auto& d_block = p[static_cast<std::size_t>(model.idx_d())];
    std::vector<double> row_sum(static_cast<std::size_t>(n), 0.0);
    for (auto [i, j] : model.mask.edges) {
        double a_ij = 0.0;
        for (int r = 0; r < k_rank; ++r)
            a_ij += b_block[static_cast<std::size_t>(r * n + i)] * d_block[static_cast<std::size_t>(r * n + j)];
        row_sum[static_cast<std::size_t>(i)] += a_ij;
    }
    p[static_cast<std::size_t>(model.idx_slope())].assign(static_cast<std::size_t>(n) * (kinked ? 2 : 1), 0.0);
    if (kinked)
        p[static_cast<std::size_t>(model.idx_bp())].assign(static_cast<std::size_t>(n), config.beta_kink_day);
    auto& icpt = p[static_cast<std::size_t>(model.idx_icpt())];
    for (int i = 0; i < n; ++i) {
        double target_row = uniform(0.9, 1.3);
        double scale = target_row / row_sum[static_cast<std::size_t>(i)];
        for (int r = 0; r < k_rank; ++r) b_block[static_cast<std::size_t>(r * n + i)] *= scale;
        double sigma = p[static_cast<std::size_t>(model.idx_sigma())][static_cast<std::size_t>(i)];
        double mu = p[static_cast<std::size_t>(model.idx_mu())][static_cast<std::size_t>(i)];
        double gamma = p[static_cast<std::size_t>(model.idx_gamma())][static_cast<std::size_t>(i)];
        double g = uniform(config.growth_lo, config.growth_hi);
        icpt.push_back((gamma * sigma + g * (sigma + gamma)) / (gamma + mu * sigma + g) / target_row);
        if (kinked) {
            double tail = config.n_days - 1 - config.beta_kink_day;
            if (tail > 0.0)
                p[static_cast<std::size_t>(model.idx_slope())][static_cast<std::size_t>(2 * i + 1)] =
                    -config.beta_kink_drop * icpt.back() / tail;
        }
    }

    out.beta_intercept = icpt;
    out.sigma = p[static_cast<std::size_t>(model.idx_sigma())];
    out.mu = p[static_cast<std::size_t>(model.idx_mu())];
    out.gamma = p[static_cast<std::size_t>(model.idx_gamma())];
    out.death_b = p[static_cast<std::size_t>(model.idx_death_b())];
    {
        Matrix b(k_rank, n), d(k_rank, n);
        for (int r = 0; r < k_rank; ++r)
            for (int i = 0; i < n; ++i) {
                b(r, i) = b_block[static_cast<std::size_t>(r * n + i)];
                d(r, i) = d_block[static_cast<std::size_t>(r * n + i)];
            }
        out.a = masked_low_rank_dense(b, d, model.mask);
    }

    std::vector<double> y0;
    for (int i = 0; i < n; ++i) {
        double i0 = uniform(config.i0_lo, config.i0_hi);
        double r0 = i0 * uniform(0.5, 1.5);
        double d0 = r0 * uniform(0.01, 0.03);
        double e0 = i0 * uniform(1.0, 2.5);
        double uu0 = i0 * uniform(0.5, 1.5);
        y0.insert(y0.end(), {1.0 - e0 - uu0 - i0 - r0, e0, uu0, i0, r0, d0});
    }

    auto rhs = model.make_rhs<double>(p);
    auto rows = integrate_sampled<double>(rhs, y0, TimeGrid{0.0, 1.0, config.n_days - 1},
                                          model.substeps());

    std::normal_distribution<double> noise(0.0, config.noise);
    panel.infected = Matrix(config.n_days, n);
    panel.recovered = Matrix(config.n_days, n);
    panel.deaths = Matrix(config.n_days, n);
    auto emit = [&](Matrix& m, int i, int state_col) {
        double pop = panel.population[static_cast<std::size_t>(i)];
        double prev = std::round(rows[0][static_cast<std::size_t>(6 * i + state_col)] * pop);
        m(0, i) = prev;
        for (int t = 1; t < config.n_days; ++t) {
            double exact = std::round(rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(6 * i + state_col)] * pop);
            double inc = exact - std::round(rows[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(6 * i + state_col)] * pop);
            double jitter = config.noise > 0.0 ? noise(rng) : 0.0;
            double noisy = std::max(std::round(inc * (1.0 + jitter)), 0.0);
            prev += noisy;
            m(t, i) = prev;
        }
    };
    for (int i = 0; i < n; ++i) {
        emit(panel.infected, i, 3);
        emit(panel.recovered, i, 4);
        emit(panel.deaths, i, 5);
    }
    return out;
}

void write_panel_csvs(const CovidPanel& panel, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto wide = [&](const Matrix& counts, const std::string& name) {
        CsvTable t;
        t.header.push_back("state");
        for (int d : panel.dates) t.header.push_back(format_date(d));
        for (std::size_t i = 0; i < panel.states.size(); ++i) {
            std::vector<std::string> row{panel.states[i]};
            for (int tday = 0; tday < static_cast<int>(panel.dates.size()); ++tday)
                row.push_back(format_double(counts(tday, static_cast<int>(i))));
            t.rows.push_back(std::move(row));
        }
        write_csv(dir + "/" + name, t);
    };
    wide(panel.infected, "confirmed.csv");
    wide(panel.recovered, "recovered.csv");
    wide(panel.deaths, "deaths.csv");

    CsvTable pop;
    pop.header = {"state", "population"};
    for (std::size_t i = 0; i < panel.states.size(); ++i)
        pop.rows.push_back({panel.states[i], format_double(panel.population[i])});
    write_csv(dir + "/population.csv", pop);

    write_adjacency_csv(dir + "/adjacency.csv", panel.states, panel.adjacency);
}

}  // namespace autoode
