#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "autoode/covid.hpp"
#include "autoode/io.hpp"
#include "doctest.h"

using namespace autoode;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(dir);
    return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// one-state input set; the series strings are comma-joined counts
struct TinyInputs {
    std::filesystem::path dir;
    std::string confirmed_path, recovered_path, deaths_path, population_path, adjacency_path;

    TinyInputs(const std::string& name, const std::string& dates, const std::string& confirmed,
               const std::string& recovered, const std::string& deaths, const std::string& extra_rows = "") {
        dir = temp_dir(name);
        confirmed_path = (dir / "confirmed.csv").string();
        recovered_path = (dir / "recovered.csv").string();
        deaths_path = (dir / "deaths.csv").string();
        population_path = (dir / "population.csv").string();
        adjacency_path = (dir / "adjacency.csv").string();
        write_text(confirmed_path, "state," + dates + "\nNY," + confirmed + "\n" + extra_rows);
        write_text(recovered_path, "state," + dates + "\nNY," + recovered + "\n");
        write_text(deaths_path, "state," + dates + "\nNY," + deaths + "\n");
        write_text(population_path, "state,population\nNY,1000000\n");
        write_text(adjacency_path, "state,NY\nNY,1\n");
    }
};

// window observations generated by the model itself, so the fitted rollout
// reproduces them exactly when the fit result holds the generating raws
struct SelfConsistentFit {
    CovidModel model;
    FitWindow window;
    FitResult result;

    CovidFit make_fit() const { return CovidFit{model, window, result, CovidConfig{}}; }

    static ParamBlocks<double> handcrafted_raw(const CovidModel& m) {
        ParamBlocks<double> raw;
        for (const auto& spec : m.param_specs()) {
            std::vector<double> block(static_cast<std::size_t>(spec.size()), 0.0);
            if (spec.name == "b_factor" || spec.name == "d_factor") block.assign(block.size(), 0.5);
            if (spec.name == "beta_bp_gap") block.assign(block.size(), 1.5);
            if (spec.name == "beta_intercept") block.assign(block.size(), 0.25);
            if (spec.name == "death_b") block.assign(block.size(), 0.02);
            if (spec.name == "e0_frac" || spec.name == "u0_frac") block.assign(block.size(), -2.0);
            raw.push_back(std::move(block));
        }
        return raw;
    }

    explicit SelfConsistentFit(int k = 10)
        : model([] {
              Matrix adj(2, 2, 1.0);
              return CovidModel(AdjacencyMask::from_matrix(adj), 2, 1, 10.0);
          }()) {
        ParamBlocks<double> raw = handcrafted_raw(model);
        ParamBlocks<double> p = transform_blocks(model.param_specs(), raw);
        std::vector<double> obs0 = {0.002, 0.003, 0.0005, 0.001, 0.0001, 0.0002};
        auto y0 = model.initial_state<double>(obs0, p, [](double v) { return v; });
        auto rows = integrate_sampled<double>(model.make_rhs<double>(p), y0, TimeGrid{0.0, 1.0, k - 1},
                                              model.substeps());
        window.week_start = 100;
        window.observations = Matrix(k, 6);
        auto idx = model.observed_indices();
        for (int t = 0; t < k; ++t) {
            window.dates.push_back(100 - k + t);
            for (int f = 0; f < 6; ++f)
                window.observations(t, f) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx[static_cast<std::size_t>(f)])];
        }
        result.params = ParamSet{model.param_specs(), raw};
        result.best_loss = 0.0;
    }

    CovidPanel panel() const {
        CovidPanel pnl;
        pnl.states = {"AA", "BB"};
        for (int d : window.dates) pnl.dates.push_back(d);
        int k = window.observations.rows();
        pnl.population = {1e6, 2e6};
        pnl.infected = Matrix(k, 2);
        pnl.recovered = Matrix(k, 2);
        pnl.deaths = Matrix(k, 2);
        for (int t = 0; t < k; ++t)
            for (int i = 0; i < 2; ++i) {
                pnl.infected(t, i) = window.observations(t, i) * pnl.population[static_cast<std::size_t>(i)];
                pnl.recovered(t, i) = window.observations(t, 2 + i) * pnl.population[static_cast<std::size_t>(i)];
                pnl.deaths(t, i) = window.observations(t, 4 + i) * pnl.population[static_cast<std::size_t>(i)];
            }
        pnl.adjacency = Matrix(2, 2, 1.0);
        return pnl;
    }
};

}  // namespace

TEST_CASE("loader cleans revisions, aggregates counties, and forward-fills") {
    SUBCASE("downward revision is zeroed and increments reapplied") {
        TinyInputs in("autoode_covid_clean", "2020-04-01,2020-04-02,2020-04-03", "100,98,105", "10,10,10",
                      "1,1,1");
        CovidPanel p = load_jhu_csv(in.confirmed_path, in.recovered_path, in.deaths_path,
                                    in.population_path, in.adjacency_path);
        REQUIRE(p.states == std::vector<std::string>{"NY"});
        CHECK(p.infected(0, 0) == 100.0);
        CHECK(p.infected(1, 0) == 100.0);
        CHECK(p.infected(2, 0) == 107.0);
        CHECK(p.warnings.empty());
    }

    SUBCASE("rows with the same code are summed before cleaning") {
        TinyInputs in("autoode_covid_agg", "2020-04-01,2020-04-02", "100,110", "10,10", "1,1",
                      "NY,50,60\n");
        CovidPanel p = load_jhu_csv(in.confirmed_path, in.recovered_path, in.deaths_path,
                                    in.population_path, in.adjacency_path);
        CHECK(p.infected(0, 0) == 150.0);
        CHECK(p.infected(1, 0) == 170.0);
    }

    SUBCASE("missing cells repeat the previous value in the row") {
        TinyInputs in("autoode_covid_ffill", "2020-04-01,2020-04-02,2020-04-03", "100,,105", "10,,",
                      "1,1,1");
        CovidPanel p = load_jhu_csv(in.confirmed_path, in.recovered_path, in.deaths_path,
                                    in.population_path, in.adjacency_path);
        CHECK(p.infected(1, 0) == 100.0);
        CHECK(p.recovered(1, 0) == 10.0);
        CHECK(p.recovered(2, 0) == 10.0);
    }

    SUBCASE("all-zero input stays an all-zero panel") {
        TinyInputs in("autoode_covid_zero", "2020-04-01,2020-04-02", "0,0", "0,0", "0,0");
        CovidPanel p = load_jhu_csv(in.confirmed_path, in.recovered_path, in.deaths_path,
                                    in.population_path, in.adjacency_path);
        CHECK(p.infected(0, 0) == 0.0);
        CHECK(p.infected(1, 0) == 0.0);
        CHECK(p.deaths(1, 0) == 0.0);
    }
}

TEST_CASE("loader aligns dates and reports gaps and unknown states") {
    SUBCASE("misaligned ranges intersect with a warning") {
        auto dir = temp_dir("autoode_covid_align");
        write_text(dir / "confirmed.csv", "state,2020-04-01,2020-04-02,2020-04-03\nNY,1,2,3\n");
        write_text(dir / "recovered.csv", "state,2020-04-02,2020-04-03,2020-04-04\nNY,1,1,1\n");
        write_text(dir / "deaths.csv", "state,2020-04-01,2020-04-02,2020-04-03,2020-04-04\nNY,0,0,0,0\n");
        write_text(dir / "population.csv", "state,population\nNY,1000\n");
        write_text(dir / "adjacency.csv", "state,NY\nNY,1\n");
        CovidPanel p = load_jhu_csv((dir / "confirmed.csv").string(), (dir / "recovered.csv").string(),
                                    (dir / "deaths.csv").string(), (dir / "population.csv").string(),
                                    (dir / "adjacency.csv").string());
        REQUIRE(p.dates.size() == 2);
        CHECK(format_date(p.dates.front()) == "2020-04-02");
        CHECK(format_date(p.dates.back()) == "2020-04-03");
        CHECK(p.infected(0, 0) == 2.0);
        REQUIRE(p.warnings.size() == 1);
        CHECK(p.warnings[0].find("2020-04-02") != std::string::npos);
    }

    SUBCASE("a hole in the date columns raises the gap error") {
        TinyInputs in("autoode_covid_gap", "2020-04-01,2020-04-03", "1,2", "0,0", "0,0");
        CHECK_THROWS_AS(load_jhu_csv(in.confirmed_path, in.recovered_path, in.deaths_path,
                                     in.population_path, in.adjacency_path),
                        DateGap);
    }

    SUBCASE("state absent from the population table") {
        TinyInputs in("autoode_covid_unkpop", "2020-04-01,2020-04-02", "1,2", "0,0", "0,0");
        write_text(in.population_path, "state,population\nCA,100\n");
        CHECK_THROWS_AS(load_jhu_csv(in.confirmed_path, in.recovered_path, in.deaths_path,
                                     in.population_path, in.adjacency_path),
                        UnknownState);
    }

    SUBCASE("state absent from one of the series files") {
        TinyInputs in("autoode_covid_unkseries", "2020-04-01,2020-04-02", "1,2", "0,0", "0,0");
        write_text(in.recovered_path, "state,2020-04-01,2020-04-02\nCA,0,0\n");
        CHECK_THROWS_AS(load_jhu_csv(in.confirmed_path, in.recovered_path, in.deaths_path,
                                     in.population_path, in.adjacency_path),
                        UnknownState);
    }

    SUBCASE("asymmetric adjacency is rejected") {
        auto dir = temp_dir("autoode_covid_asym");
        std::string dates = "2020-04-01,2020-04-02";
        write_text(dir / "confirmed.csv", "state," + dates + "\nCA,1,2\nNY,1,2\n");
        write_text(dir / "recovered.csv", "state," + dates + "\nCA,0,0\nNY,0,0\n");
        write_text(dir / "deaths.csv", "state," + dates + "\nCA,0,0\nNY,0,0\n");
        write_text(dir / "population.csv", "state,population\nCA,100\nNY,100\n");
        write_text(dir / "adjacency.csv", "state,CA,NY\nCA,1,1\nNY,0,1\n");
        CHECK_THROWS_AS(load_jhu_csv((dir / "confirmed.csv").string(), (dir / "recovered.csv").string(),
                                     (dir / "deaths.csv").string(), (dir / "population.csv").string(),
                                     (dir / "adjacency.csv").string()),
                        BadSpec);
    }
}

TEST_CASE("fit window scales by population and ends the day before the target week") {
    TinyInputs in("autoode_covid_window", "2020-04-01,2020-04-02,2020-04-03,2020-04-04",
                  "10000,11000,12000,13000", "100,200,300,400", "1,2,3,4");
    CovidPanel p = load_jhu_csv(in.confirmed_path, in.recovered_path, in.deaths_path, in.population_path,
                                in.adjacency_path);

    FitWindow w = prepare_fit_window(p, parse_date("2020-04-04"), 3);
    REQUIRE(w.observations.rows() == 3);
    REQUIRE(w.observations.cols() == 3);
    CHECK(format_date(w.dates.front()) == "2020-04-01");
    CHECK(format_date(w.dates.back()) == "2020-04-03");
    CHECK(w.observations(0, 0) == 0.01);
    CHECK(w.observations(2, 0) == 0.012);
    CHECK(w.observations(1, 1) == 0.0002);
    CHECK(w.observations(2, 2) == 3e-6);

    CHECK_THROWS_AS(prepare_fit_window(p, parse_date("2020-04-04"), 4), InsufficientHistory);
    CHECK_THROWS_AS(prepare_fit_window(p, parse_date("2020-04-06"), 2), InsufficientHistory);
    CHECK_THROWS_AS(prepare_fit_window(p, parse_date("2020-04-04"), 1), BadSpec);
}

TEST_CASE("builtin state adjacency matches the shipped asset") {
    const auto& codes = us_state_codes();
    Matrix a = us_state_adjacency();
    REQUIRE(codes.size() == 50);
    REQUIRE(a.rows() == 50);

    SUBCASE("symmetric with a full diagonal") {
        for (int i = 0; i < 50; ++i) {
            CHECK(a(i, i) == 1.0);
            for (int j = 0; j < i; ++j) CHECK(a(i, j) == a(j, i));
        }
    }

    SUBCASE("known borders, corner touches, and isolations") {
        auto index = [&](const std::string& code) {
            return static_cast<int>(std::find(codes.begin(), codes.end(), code) - codes.begin());
        };
        auto neighbors = [&](const std::string& code) {
            std::set<std::string> out;
            int i = index(code);
            for (int j = 0; j < 50; ++j)
                if (j != i && a(i, j) == 1.0) out.insert(codes[static_cast<std::size_t>(j)]);
            return out;
        };
        CHECK(neighbors("MI") == std::set<std::string>{"IN", "OH", "WI"});
        CHECK(neighbors("AK").empty());
        CHECK(neighbors("HI").empty());
        CHECK(a(index("AZ"), index("CO")) == 1.0);
        CHECK(a(index("NM"), index("UT")) == 1.0);
        CHECK(a(index("RI"), index("NY")) == 0.0);
        CHECK(neighbors("MO").size() == 8);
        CHECK(neighbors("TN").size() == 8);
        CHECK(neighbors("ME") == std::set<std::string>{"NH"});
    }

    SUBCASE("shipped csv asset is exactly the builtin matrix") {
        CsvTable t = read_csv(std::string(AUTOODE_DATA_DIR) + "/us_state_adjacency.csv");
        REQUIRE(t.header.size() == 51);
        REQUIRE(t.rows.size() == 50);
        for (int i = 0; i < 50; ++i) {
            CHECK(t.header[static_cast<std::size_t>(i) + 1] == codes[static_cast<std::size_t>(i)]);
            CHECK(t.rows[static_cast<std::size_t>(i)][0] == codes[static_cast<std::size_t>(i)]);
            for (int j = 0; j < 50; ++j)
                CHECK(t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + 1] ==
                      (a(i, j) == 1.0 ? "1" : "0"));
        }
    }
}

TEST_CASE("synthetic panels are deterministic, monotone, and integer-valued") {
    SynthConfig cfg;
    cfg.n_states = 4;
    cfg.n_days = 40;
    auto sp1 = synthetic_panel(cfg);
    auto sp2 = synthetic_panel(cfg);

    CHECK(sp1.panel.infected == sp2.panel.infected);
    CHECK(sp1.panel.deaths == sp2.panel.deaths);
    CHECK(sp1.panel.population == sp2.panel.population);
    CHECK(sp1.gamma == sp2.gamma);

    cfg.seed = 2;
    auto sp3 = synthetic_panel(cfg);
    CHECK(sp3.panel.infected.rows() == sp1.panel.infected.rows());
    CHECK_FALSE(sp3.panel.infected == sp1.panel.infected);

    for (int i = 0; i < 4; ++i) {
        CHECK(sp1.panel.population[static_cast<std::size_t>(i)] >= 7e5);
        CHECK(sp1.panel.population[static_cast<std::size_t>(i)] <= 3e7);
        for (int t = 0; t < 40; ++t) {
            for (const Matrix* m : {&sp1.panel.infected, &sp1.panel.recovered, &sp1.panel.deaths}) {
                double v = (*m)(t, i);
                CHECK(v == std::floor(v));
                if (t > 0) CHECK(v >= (*m)(t - 1, i));
            }
        }
        CHECK(sp1.gamma[static_cast<std::size_t>(i)] >= 0.08);
        CHECK(sp1.gamma[static_cast<std::size_t>(i)] <= 0.14);
    }

    SUBCASE("written csvs load back into the identical panel") {
        auto dir = temp_dir("autoode_covid_synth_io");
        write_panel_csvs(sp1.panel, dir.string());
        CovidPanel back = load_jhu_csv((dir / "confirmed.csv").string(), (dir / "recovered.csv").string(),
                                       (dir / "deaths.csv").string(), (dir / "population.csv").string(),
                                       (dir / "adjacency.csv").string());
        CHECK(back.states == sp1.panel.states);
        CHECK(back.dates == sp1.panel.dates);
        CHECK(back.infected == sp1.panel.infected);
        CHECK(back.recovered == sp1.panel.recovered);
        CHECK(back.deaths == sp1.panel.deaths);
        CHECK(back.population == sp1.panel.population);
        CHECK(back.adjacency == sp1.panel.adjacency);
    }
}

TEST_CASE("quantile bands collapse on zero residuals and stay sorted otherwise") {
    SelfConsistentFit sc;
    CovidPanel panel = sc.panel();

    SUBCASE("exactly reproduced window gives identical quantile rows") {
        CovidForecast fc = forecast_covid(panel, sc.make_fit(), 7, {0.1, 0.5, 0.9});
        REQUIRE(fc.values.size() == 3);
        REQUIRE(fc.dates.size() == 7);
        CHECK(fc.dates.front() == 100);
        CHECK(fc.values[0] == fc.values[1]);
        CHECK(fc.values[1] == fc.values[2]);
    }

    SUBCASE("median cumulative recovered and deaths never decrease") {
        CovidForecast fc = forecast_covid(panel, sc.make_fit(), 7, {0.1, 0.5, 0.9});
        const Matrix& med = forecast_median(fc);
        for (int t = 1; t < 7; ++t)
            for (int col = 2; col < 6; ++col)  // R block then D block
                CHECK(med(t, col) >= med(t - 1, col) - 1e-9);
    }

    SUBCASE("perturbed window produces sorted, non-collapsed bands") {
        SelfConsistentFit bumpy;
        for (int t = 0; t < bumpy.window.observations.rows(); ++t)
            bumpy.window.observations(t, 0) += (t % 2 == 0 ? 1.0 : -1.0) * 2e-5;
        CovidForecast fc = forecast_covid(panel, bumpy.make_fit(), 5, {0.1, 0.5, 0.9});
        bool widened = false;
        for (int t = 0; t < 5; ++t)
            for (int f = 0; f < 6; ++f) {
                CHECK(fc.values[0](t, f) <= fc.values[1](t, f));
                CHECK(fc.values[1](t, f) <= fc.values[2](t, f));
                if (fc.values[2](t, f) > fc.values[0](t, f) + 1e-9) widened = true;
            }
        CHECK(widened);
    }

    SUBCASE("forecast csv has one row per state, day, feature, and quantile") {
        CovidForecast fc = forecast_covid(panel, sc.make_fit(), 2, {0.1, 0.5, 0.9});
        auto path = temp_dir("autoode_covid_fccsv") / "forecast.csv";
        write_forecast_csv(path.string(), fc);
        CsvTable t = read_csv(path.string());
        CHECK(t.header == std::vector<std::string>{"state", "date", "feature", "quantile", "value"});
        CHECK(t.rows.size() == 2u * 2u * 3u * 3u);
        CHECK(t.rows[0][0] == "AA");
        CHECK(t.rows[0][2] == "I");
        CHECK(t.rows[0][3] == "0.1");
    }
}

TEST_CASE("median mae is zero on equality and tracks a constant bias") {
    SelfConsistentFit sc;
    CovidPanel panel = sc.panel();
    CovidForecast fc = forecast_covid(panel, sc.make_fit(), 3, {0.5});

    // extend the panel so the forecast dates exist, with truth = forecast
    int k = panel.infected.rows();
    CovidPanel longer = panel;
    longer.infected = Matrix(k + 3, 2);
    longer.recovered = Matrix(k + 3, 2);
    longer.deaths = Matrix(k + 3, 2);
    for (int t = 0; t < k; ++t)
        for (int i = 0; i < 2; ++i) {
            longer.infected(t, i) = panel.infected(t, i);
            longer.recovered(t, i) = panel.recovered(t, i);
            longer.deaths(t, i) = panel.deaths(t, i);
        }
    for (int t = 0; t < 3; ++t)
        for (int i = 0; i < 2; ++i) {
            longer.infected(k + t, i) = fc.values[0](t, i);
            longer.recovered(k + t, i) = fc.values[0](t, 2 + i);
            longer.deaths(k + t, i) = fc.values[0](t, 4 + i);
            longer.dates.push_back(panel.dates.back() + t + 1);
        }

    MaeTable zero = evaluate_mae(longer, fc);
    CHECK(zero.infected == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(zero.recovered == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(zero.deaths == doctest::Approx(0.0).epsilon(1e-12));

    for (int t = 0; t < 3; ++t)
        for (int i = 0; i < 2; ++i) longer.infected(k + t, i) += 10.0;
    MaeTable biased = evaluate_mae(longer, fc);
    CHECK(biased.infected == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(biased.recovered == doctest::Approx(0.0).epsilon(1e-12));

    SUBCASE("forecast dates outside the panel are rejected") {
        CHECK_THROWS_AS(evaluate_mae(panel, fc), ShapeMismatch);
    }
}

TEST_CASE("fitting is scale-equivariant and isolated states are independent") {
    SynthConfig cfg;
    cfg.n_states = 3;  // the first three codes are mutually non-adjacent
    cfg.n_days = 30;
    cfg.noise = 0.0;
    auto sp = synthetic_panel(cfg);

    CovidConfig cc;
    cc.k_rank = 2;
    cc.n_breakpoints = 0;
    cc.fit.max_iters = 40;
    cc.fit.restarts = 1;
    cc.fit.tol = 0.0;  // fixed iteration count
    int week = sp.panel.dates.front() + 20;

    SUBCASE("scaling one state's population and counts changes nothing fractional") {
        CovidPanel scaled = sp.panel;
        scaled.population[0] *= 4.0;
        for (int t = 0; t < scaled.infected.rows(); ++t) {
            scaled.infected(t, 0) *= 4.0;
            scaled.recovered(t, 0) *= 4.0;
            scaled.deaths(t, 0) *= 4.0;
        }
        FitWindow w1 = prepare_fit_window(sp.panel, week, 8);
        FitWindow w2 = prepare_fit_window(scaled, week, 8);
        CHECK(w1.observations == w2.observations);

        CovidFit f1 = fit_covid(sp.panel, w1, cc);
        CovidFit f2 = fit_covid(scaled, w2, cc);
        REQUIRE(f1.result.params.raw.size() == f2.result.params.raw.size());
        for (std::size_t b = 0; b < f1.result.params.raw.size(); ++b)
            CHECK(f1.result.params.raw[b] == f2.result.params.raw[b]);

        CovidForecast fc1 = forecast_covid(sp.panel, f1, 3, {0.1, 0.5, 0.9});
        CovidForecast fc2 = forecast_covid(scaled, f2, 3, {0.1, 0.5, 0.9});
        for (std::size_t q = 0; q < fc1.values.size(); ++q)
            for (int t = 0; t < 3; ++t)
                for (int f = 0; f < 9; ++f) {
                    double frac1 = fc1.values[q](t, f) / sp.panel.population[static_cast<std::size_t>(f % 3)];
                    double frac2 = fc2.values[q](t, f) / scaled.population[static_cast<std::size_t>(f % 3)];
                    CHECK(frac1 == frac2);
                }
    }

    SUBCASE("perturbing a non-neighbor's data leaves a state's parameters bit-identical") {
        CovidPanel bumped = sp.panel;
        for (int t = 0; t < bumped.infected.rows(); ++t) bumped.infected(t, 1) += 1000.0;

        FitWindow w1 = prepare_fit_window(sp.panel, week, 8);
        FitWindow w2 = prepare_fit_window(bumped, week, 8);
        CovidFit f1 = fit_covid(sp.panel, w1, cc);
        CovidFit f2 = fit_covid(bumped, w2, cc);

        const auto& specs = f1.result.params.specs;
        int n = 3;
        for (std::size_t b = 0; b < specs.size(); ++b) {
            const auto& r1 = f1.result.params.raw[b];
            const auto& r2 = f2.result.params.raw[b];
            if (specs[b].name == "b_factor" || specs[b].name == "d_factor") {
                for (int r = 0; r < f1.model.k_rank; ++r)
                    CHECK(std::memcmp(&r1[static_cast<std::size_t>(r * n)], &r2[static_cast<std::size_t>(r * n)],
                                      sizeof(double)) == 0);
            } else {
                CHECK(std::memcmp(&r1[0], &r2[0], sizeof(double)) == 0);  // state 0's entry
                CHECK(r1[1] != r2[1]);                                    // the perturbed state's moved
            }
        }
    }
}

TEST_CASE("short-window fit on a clean synthetic panel recovers the recovery rate") {
    SynthConfig cfg;
    cfg.n_states = 3;
    cfg.n_days = 52;
    cfg.noise = 0.0;
    auto sp = synthetic_panel(cfg);

    CovidConfig cc;
    cc.k_rank = 2;
    cc.n_breakpoints = 1;
    cc.fit.seed = 3;
    int week = sp.panel.dates.front() + 45;
    FitWindow w = prepare_fit_window(sp.panel, week, 10);
    CovidFit fit = fit_covid(sp.panel, w, cc);

    ParamBlocks<double> learned = transform_blocks(fit.result.params.specs, fit.result.params.raw);
    const auto& gamma = learned[static_cast<std::size_t>(fit.model.idx_gamma())];
    double gamma_mae = 0.0;
    for (int i = 0; i < 3; ++i)
        gamma_mae += std::abs(gamma[static_cast<std::size_t>(i)] - sp.gamma[static_cast<std::size_t>(i)]) / 3.0;
    CHECK(gamma_mae <= 0.01);

    const auto& e0 = fit.result.u0_hat.at("e0_frac");
    double e0_mae = 0.0;
    for (int i = 0; i < 3; ++i) e0_mae += std::abs(e0[static_cast<std::size_t>(i)]) / 3.0;  // truth ~1e-3
    CHECK(e0_mae <= 0.25);
}

// A ten-day window is too short to pin the extrapolation (many parameter sets
// match it), so the forecast claim gets the full thirty days and a deeper fit.
TEST_CASE("thirty-day fit on a clean synthetic panel forecasts the held-out week") {
    SynthConfig cfg;
    cfg.n_states = 3;
    cfg.n_days = 52;
    cfg.noise = 0.0;
    auto sp = synthetic_panel(cfg);

    CovidConfig cc;
    cc.k_rank = 2;
    cc.n_breakpoints = 1;
    cc.fit.seed = 3;
    cc.fit.lr = 0.02;
    cc.fit.max_iters = 8000;
    int week = sp.panel.dates.front() + 45;
    FitWindow w = prepare_fit_window(sp.panel, week, 30);
    CovidFit fit = fit_covid(sp.panel, w, cc);

    CovidForecast fc = forecast_covid(sp.panel, fit, 7, {0.5});
    const Matrix& med = forecast_median(fc);
    for (int t = 0; t < 7; ++t) {
        int pos = fc.dates[static_cast<std::size_t>(t)] - sp.panel.dates.front();
        REQUIRE(pos < static_cast<int>(sp.panel.dates.size()));
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(med(t, i) - sp.panel.infected(pos, i)) <=
                  0.08 * std::max(sp.panel.infected(pos, i), 1.0));
            CHECK(std::abs(med(t, 3 + i) - sp.panel.recovered(pos, i)) <=
                  0.08 * std::max(sp.panel.recovered(pos, i), 1.0));
        }
    }
}
