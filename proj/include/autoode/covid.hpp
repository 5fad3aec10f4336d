#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autoode/covid_model.hpp"
#include "autoode/estimation.hpp"
#include "autoode/matrix.hpp"

namespace autoode {

// Aligned per-region panel of cumulative counts. Dates are serial days and
// consecutive; count matrices are n_dates x n_states and nondecreasing down
// each column after cleaning.
struct CovidPanel {
    std::vector<std::string> states;  // two-letter codes, sorted
    std::vector<int> dates;
    Matrix infected;
    Matrix recovered;
    Matrix deaths;
    std::vector<double> population;
    Matrix adjacency;  // 0/1, symmetric
    std::vector<std::string> warnings;
};

// Wide CSVs (header `state,<ISO dates...>`, one row per region, county rows
// summed into their state), a `state,population` table, and a square 0/1
// adjacency table with state codes on both axes.
CovidPanel load_jhu_csv(const std::string& path_confirmed, const std::string& path_recovered,
                        const std::string& path_deaths, const std::string& path_population,
                        const std::string& path_adjacency);

// Population-scaled observations for the k days ending the day before
// `week_start`. Columns are feature-major: I fractions for every state, then
// R, then D.
struct FitWindow {
    int week_start = 0;
    std::vector<int> dates;
    Matrix observations;
};

FitWindow prepare_fit_window(const CovidPanel& panel, int week_start, int k);

struct CovidConfig {
    FitConfig fit;
    int k_rank = 5;
    int n_breakpoints = 1;
    int substeps = 1;
    // Raw init range for hidden-seed shares; see CovidModel::seed_init_lo.
    double seed_init_lo = -9.0;
    double seed_init_hi = -4.0;
    CovidConfig() { fit.time_weight_exponent = 0.5; }
};

struct CovidFit {
    CovidModel model;
    FitWindow window;
    FitResult result;
    CovidConfig config;
};

// Joint fit of all states through the shared masked transmission matrix.
// Feature weights default to [1]*n + [alpha1]*n + [alpha2]*n.
CovidFit fit_covid(const CovidPanel& panel, const FitWindow& window, const CovidConfig& config = {});

// Forecast counts per state x day x feature x quantile. The median row is the
// model rollout; other quantiles add empirical in-window residual offsets and
// are monotonized per cell.
struct CovidForecast {
    std::vector<std::string> states;
    std::vector<int> dates;
    std::vector<double> quantiles;  // ascending
    std::vector<Matrix> values;     // per quantile: horizon x 3n, persons
};

CovidForecast forecast_covid(const CovidPanel& panel, const CovidFit& fit, int horizon = 7,
                             std::vector<double> quantiles = {0.1, 0.5, 0.9});

const Matrix& forecast_median(const CovidForecast& forecast);

struct MaeTable {
    double infected = 0.0;
    double recovered = 0.0;
    double deaths = 0.0;
};

// Median-forecast MAE against the panel, per feature, in persons.
MaeTable evaluate_mae(const CovidPanel& panel, const CovidForecast& forecast);

// Wire format: `state,date,feature,quantile,value`.
void write_forecast_csv(const std::string& path, const CovidForecast& forecast);

// The fifty US states and their land-border adjacency (the two four-corner
// pairs count; Alaska and Hawaii are self-adjacent only).
const std::vector<std::string>& us_state_codes();
Matrix us_state_adjacency();
void write_adjacency_csv(const std::string& path, const std::vector<std::string>& codes,
                         const Matrix& adjacency);

// Synthetic panel drawn from the multi-region model itself: constant per-state
// transmission rates, populations log-uniform, reporting noise on daily
// increments. Parameters are kept in the slow-growth regime so cumulative
// counts rise through the whole date range.
struct SynthConfig {
    std::uint64_t seed = 1;
    int start_date = 18366;  // 2020-04-14
    int n_days = 152;        // through 2020-09-12
    double noise = 0.01;
    int n_states = 0;  // 0 = all fifty
    // Initial infected fraction and daily exponential growth rate ranges.
    // Defaults keep every state growing slowly through the full date range;
    // raise them to produce an epidemic that visibly depletes susceptibles,
    // which makes the incubation and reporting rates identifiable from counts.
    double i0_lo = 1e-4, i0_hi = 4e-4;
    double growth_lo = 0.015, growth_hi = 0.028;
    // Optional transmission-rate kink (a policy-change analogue): beta stays
    // constant until `beta_kink_day` (panel-relative), then declines linearly
    // to (1 - beta_kink_drop) of its initial value by the last day. Off when
    // the day is negative. The lagged response of infections to the kink is
    // what makes the incubation rate visible to a fit.
    double beta_kink_day = -1.0;
    double beta_kink_drop = 0.5;
};

struct SyntheticPanel {
    CovidPanel panel;
    std::vector<double> beta_intercept;
    std::vector<double> sigma;
    std::vector<double> mu;
    std::vector<double> gamma;
    std::vector<double> death_b;
    Matrix a;  // dense truth transmission matrix
};

SyntheticPanel synthetic_panel(const SynthConfig& config = {});

// confirmed.csv, recovered.csv, deaths.csv, population.csv, adjacency.csv
void write_panel_csvs(const CovidPanel& panel, const std::string& dir);

}  // namespace autoode
