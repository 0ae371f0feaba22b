// pegfx: pricing, calibration, surface building, hedging experiments,
// synthetic quote generation and timing benchmarks.
//
// Exit codes: 0 success, 2 argument error, 3 data error, 4 numerical error.

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pegfx/calibration.hpp"
#include "pegfx/conventions.hpp"
#include "pegfx/core_bs.hpp"
#include "pegfx/errors.hpp"
#include "pegfx/fourier.hpp"
#include "pegfx/mv_hedge.hpp"
#include "pegfx/rs_model.hpp"
#include "pegfx/sabr.hpp"
#include "pegfx/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pegfx;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240607;
constexpr const char* kDefaultTheta = "0.005,0.10,0.2,-0.01,0";

std::string num(double x) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

std::vector<std::string> split(const std::string& text, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

double parse_number(const std::string& text, const std::string& flag) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) {
        throw DomainError(flag + ": '" + text + "' is not a number");
    }
    return v;
}

RsParams parse_theta(const std::string& text) {
    const auto parts = split(text);
    if (parts.size() != 5) throw DomainError("--theta: expected five comma-separated values sl,sh,lambda,u,delta");
    RsParams p{parse_number(parts[0], "--theta"), parse_number(parts[1], "--theta"),
               parse_number(parts[2], "--theta"), parse_number(parts[3], "--theta"),
               parse_number(parts[4], "--theta")};
    p.validate();
    return p;
}

json theta_json(const RsParams& p) {
    return {{"sigma_low", p.sigma_low}, {"sigma_high", p.sigma_high}, {"lambda", p.lambda},
            {"u", p.u}, {"delta", p.delta}};
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

fs::path tenor_file(const fs::path& dir, Tenor tenor) { return dir / (to_string(tenor) + ".csv"); }

// Quote files found in `dir`, grouped by date.
std::map<std::string, QuoteDay> load_quote_days(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("quote directory " + dir.string() + " does not exist");
    std::map<std::string, QuoteDay> days;
    for (Tenor tenor : kAllTenors) {
        const auto path = tenor_file(dir, tenor);
        if (!fs::exists(path)) continue;
        for (auto& row : read_quotes(path, tenor)) {
            auto& day = days[row.date];
            day.date = row.date;
            day.rows.push_back(std::move(row));
        }
    }
    if (days.empty()) throw DataError("no quote files (1D.csv ... 1Y.csv) in " + dir.string());
    return days;
}

std::array<SmilePoint, 5> smile_points(const SmilePillars& pillars) {
    std::array<SmilePoint, 5> smile{};
    for (std::size_t i = 0; i < 5; ++i) smile[i] = {pillars.points[i].strike, pillars.points[i].vol};
    return smile;
}

double elapsed_s(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

template <class F>
double min_time(int repeats, F&& body) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        best = std::min(best, elapsed_s(t0));
    }
    return best;
}

// ---------------------------------------------------------------- price

struct PriceArgs {
    double spot = 0, strike = 0, maturity = 0, rd = 0, rf = 0;
    std::string theta;
    bool as_json = false;
};

int cmd_price(const PriceArgs& a) {
    const MarketContext mkt{a.spot, a.rd, a.rf};
    const OptionSpec opt{a.strike, a.maturity};
    mkt.validate();
    opt.validate();
    const RsParams theta = parse_theta(a.theta);

    const auto exact = rs_price_delta(mkt, opt, theta);
    const double fourier = fourier_price(mkt, opt, theta);
    FourierOptions fine;
    fine.price_tol = 1e-13;
    const double h = 1e-6 * a.spot;
    const double fourier_delta = (fourier_price({a.spot + h, a.rd, a.rf}, opt, theta, fine) -
                                  fourier_price({a.spot - h, a.rd, a.rf}, opt, theta, fine)) /
                                 (2.0 * h);
    const auto approx = approx_price_delta(mkt, opt, theta);
    const double bs_low = bs_price(mkt, opt, theta.sigma_low);
    const double bound = approx_error_bound(mkt, opt, theta);
    const double weak = approx_error_bound_weak(mkt, opt, theta);
    const double spot_err = std::abs(exact.price - approx.price) / a.spot;
    const double price_rel = (approx.price - exact.price) / a.spot * 100.0;
    const double delta_rel = (approx.delta - exact.delta) / a.spot * 100.0;

    if (a.as_json) {
        const json out{{"theta", theta_json(theta)},
                       {"exact", {{"price", exact.price}, {"delta", exact.delta}}},
                       {"fourier", {{"price", fourier}, {"delta", fourier_delta}}},
                       {"approx", {{"price", approx.price}, {"delta", approx.delta}}},
                       {"bs_sigma_low", bs_low},
                       {"rs_implied_vol", rs_implied_vol(mkt, opt, theta)},
                       {"approx_bound", bound},
                       {"approx_bound_weak", weak},
                       {"spot_adjusted_error", spot_err},
                       {"within_bound", spot_err <= bound},
                       {"price_rel_error_pct", price_rel},
                       {"delta_rel_error_pct", delta_rel}};
        std::cout << out.dump(2) << '\n';
        return 0;
    }
    std::printf("%-10s %18s %18s\n", "method", "price", "delta");
    std::printf("%-10s %18.12f %18.12f\n", "exact", exact.price, exact.delta);
    std::printf("%-10s %18.12f %18.12f\n", "fourier", fourier, fourier_delta);
    std::printf("%-10s %18.12f %18.12f\n", "approx", approx.price, approx.delta);
    std::printf("BS(sigma_low) price        %.12f\n", bs_low);
    std::printf("RS implied vol             %.10f\n", rs_implied_vol(mkt, opt, theta));
    std::printf("|exact - approx| / S0      %.6e  (bound %.6e, weak bound %.6e, %s)\n", spot_err, bound, weak,
                spot_err <= bound ? "within" : "violated");
    std::printf("price rel. error %%         %.6e\n", price_rel);
    std::printf("delta rel. error %%         %.6e\n", delta_rel);
    return 0;
}

// ------------------------------------------------------------ calibrate

struct CalibrateArgs {
    std::string quotes, tenor, pricer = "fourier", out = "out";
    bool free_delta = false, sabr = false;
};

int cmd_calibrate(const CalibrateArgs& a) {
    const Tenor tenor = parse_tenor(a.tenor);
    const Pricer pricer = parse_pricer(a.pricer);
    const auto rows = read_quotes(a.quotes, tenor);
    CalibrationOptions opts;
    opts.free_delta = a.free_delta;

    const fs::path path = fs::path(a.out) / ("calibration_" + to_string(tenor) + "_" + to_string(pricer) + ".csv");
    auto out = open_out(path);
    out << "date,tenor,pricer,sigma_low,sigma_high,lambda,u,delta,me_pct,rmse_pct,iterations,converged";
    if (a.sabr) out << ",sabr_a,sabr_b,sabr_rho,sabr_me_pct,sabr_rmse_pct";
    out << '\n';

    std::printf("%-12s %12s %12s", "date", "ME %", "RMSE %");
    if (a.sabr) std::printf(" %12s", "SABR RMSE %");
    std::printf("\n");
    std::optional<RsParams> seed;
    for (const auto& row : rows) {
        const auto pillars = build_pillars(row);
        CalibrationResult r;
        try {
            r = calibrate_single(pillars, pricer, seed, opts);
        } catch (const CalibrationError& e) {
            throw CalibrationError(row.date + ": " + e.what(), e.best(), e.residual());
        }
        seed = r.theta_star;
        const auto& t = r.theta_star;
        out << row.date << ',' << to_string(tenor) << ',' << to_string(pricer) << ',' << num(t.sigma_low) << ','
            << num(t.sigma_high) << ',' << num(t.lambda) << ',' << num(t.u) << ',' << num(t.delta) << ','
            << num(r.me) << ',' << num(r.rmse) << ',' << r.iterations << ',' << (r.converged ? 1 : 0);
        std::printf("%-12s %12.6f %12.6f", row.date.c_str(), r.me, r.rmse);
        if (a.sabr) {
            const auto smile = smile_points(pillars);
            const double F = pillars.market.forward(pillars.maturity);
            const auto fit = sabr_calibrate(smile, F, pillars.maturity);
            std::array<double, 5> model{}, quoted{};
            for (std::size_t i = 0; i < 5; ++i) {
                model[i] = sabr_vol(smile[i].strike, F, pillars.maturity, fit.params);
                quoted[i] = smile[i].vol;
            }
            const auto [me, rmse] = me_rmse(model, quoted);
            out << ',' << num(fit.params.a) << ',' << num(fit.params.b) << ',' << num(fit.params.rho) << ','
                << num(me) << ',' << num(rmse);
            std::printf(" %12.6f", rmse);
        }
        out << '\n';
        std::printf("\n");
    }
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

// -------------------------------------------------------------- surface

struct SurfaceArgs {
    std::string quotes_dir, pricer = "fourier", out = "out/surfaces";
    std::vector<std::string> dates;
    std::size_t grid = 131;
    bool free_delta = false;
};

int cmd_surface(const SurfaceArgs& a) {
    const Pricer pricer = parse_pricer(a.pricer);
    if (a.grid < 2) throw DomainError("--grid must be at least 2");
    const auto days = load_quote_days(a.quotes_dir);
    std::vector<std::string> dates = a.dates;
    if (dates.empty()) {
        for (const auto& [d, day] : days) dates.push_back(d);
    }
    SurfaceOptions opts;
    opts.grid_points = a.grid;
    opts.calibration.free_delta = a.free_delta;
    ensure_dir(a.out);

    bool partial = false;
    std::printf("%-12s %8s %8s %12s %10s\n", "date", "points", "failed", "max RMSE %", "seconds");
    for (const auto& date : dates) {
        const auto it = days.find(date);
        if (it == days.end()) throw DataError("no quotes for date " + date);
        const auto t0 = std::chrono::steady_clock::now();
        const auto surface = build_surface(it->second, pricer, opts);
        const double secs = elapsed_s(t0);
        write_surface(fs::path(a.out) / (date + ".csv"), surface);
        double worst = 0.0;
        for (const auto& p : surface.points) worst = std::max(worst, p.result.rmse);
        std::printf("%-12s %8zu %8zu %12.6f %10.2f\n", date.c_str(), surface.points.size(), surface.failures.size(),
                    worst, secs);
        for (const auto& f : surface.failures) {
            std::fprintf(stderr, "%s t=%.6f: %s\n", date.c_str(), f.t, f.message.c_str());
        }
        partial = partial || surface.partial();
    }
    if (partial) {
        std::fprintf(stderr, "error: some maturities failed to calibrate; partial surfaces were written\n");
        return 4;
    }
    return 0;
}

// ------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string scenario = "no-jump", strategies = "all", theta = kDefaultTheta, out = "out", stem;
    std::uint64_t seed = kDefaultSeed;
    std::size_t paths = 10000;
    int steps = 130;
    double spot = 7.8, strike = 7.8, maturity = 0.5, rd = 0.01, rf = 0.015;
    std::size_t bins = 40;
};

void print_summary(const std::vector<StrategySummary>& stats) {
    std::printf("%-16s %8s %14s %12s %14s\n", "strategy", "paths", "mean error %", "std %", "mean MTE %");
    for (const auto& s : stats) {
        std::printf("%-16s %8zu %14.6f %12.6f %14.6f\n", to_string(s.strategy).c_str(), s.count, s.terminal.mean,
                    s.terminal.std, s.mte.mean);
    }
}

int cmd_simulate(const SimulateArgs& a) {
    ExperimentConfig cfg;
    cfg.market = {a.spot, a.rd, a.rf};
    cfg.option = {a.strike, a.maturity};
    cfg.params = parse_theta(a.theta);
    cfg.n_steps = a.steps;
    cfg.n_paths = a.paths;
    cfg.scenario = parse_scenario(a.scenario);
    cfg.strategies = parse_strategies(a.strategies);
    cfg.seed = a.seed;
    cfg.market.validate();
    cfg.option.validate();
    if (a.paths == 0) throw DomainError("--paths must be positive");
    if (a.steps < 1) throw DomainError("--steps must be positive");

    const auto runs = run_experiment(cfg);
    const std::string stem = a.stem.empty() ? to_string(cfg.scenario) : a.stem;
    write_experiment(a.out, stem, cfg, runs, a.bins);
    const auto flat = flatten(runs);
    print_summary(experiment_stats(flat));
    std::printf("wrote %s/%s.csv, %s_summary.json, %s_hist.csv\n", a.out.c_str(), stem.c_str(), stem.c_str(),
                stem.c_str());
    return 0;
}

// ---------------------------------------------------------------- hedge

struct HedgeArgs {
    std::string quotes, surfaces, strategies = "bs_delta,rs_delta,approx_rs_delta", out = "out";
    std::size_t stride = 1;
    int horizon = 130;
};

int cmd_hedge(const HedgeArgs& a) {
    const auto strategies = parse_strategies(a.strategies);
    if (a.stride == 0) throw DomainError("--stride must be positive");
    if (a.horizon < 1) throw DomainError("--horizon must be positive");
    RealHistory history{read_quotes(a.quotes, Tenor::m6)};
    if (history.rows.size() < 2) throw DataError("spot history needs at least two rows");

    if (!fs::is_directory(a.surfaces)) throw DataError("surface directory " + a.surfaces + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(a.surfaces)) {
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    SurfaceStore store;
    for (const auto& f : files) {
        auto s = read_surface(f);
        if (s.date.empty()) s.date = f.stem().string();
        store.emplace(s.date, std::move(s));
    }

    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i + 1 < history.rows.size(); i += a.stride) starts.push_back(i);
    const auto reports = backtest_real(history, store, starts, strategies, a.horizon);

    ensure_dir(a.out);
    auto csv = open_out(fs::path(a.out) / "real_hedge.csv");
    csv << "start_date,strike,steps,strategy,terminal_error_pct,mte_pct\n";
    std::vector<HedgeReport> flat;
    for (const auto& r : reports) {
        csv << r.start_date << ',' << num(r.strike) << ',' << r.steps << ',' << to_string(r.report.strategy) << ','
            << num(r.report.terminal_error_pct) << ',' << num(r.report.mte_pct) << '\n';
        flat.push_back(r.report);
    }
    const auto stats = experiment_stats(flat);
    json summary{{"options", starts.size()}, {"horizon", a.horizon}, {"strategies", json::array()}};
    for (const auto& s : stats) {
        auto block = [](const ErrorStats& e) {
            return json{{"mean", e.mean}, {"std", e.std},       {"min", e.min}, {"q25", e.q25},
                        {"median", e.median}, {"q75", e.q75}, {"max", e.max}};
        };
        summary["strategies"].push_back(
            {{"strategy", to_string(s.strategy)}, {"count", s.count}, {"terminal", block(s.terminal)}, {"mte", block(s.mte)}});
    }
    open_out(fs::path(a.out) / "real_hedge_summary.json") << summary.dump(2) << '\n';
    print_summary(stats);
    return 0;
}

// -------------------------------------------------------- gen-synthetic

struct GenArgs {
    std::string theta = kDefaultTheta, start = "2015-01-02", tenors = "1D,1W,1M,3M,6M,1Y", out = "data";
    std::size_t days = 260;
    double spot = 7.8, rd = 0.01, rf = 0.015;
    std::uint64_t seed = kDefaultSeed;
    bool flat_spot = false;
};

std::chrono::sys_days parse_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
        throw DomainError("--start: expected YYYY-MM-DD, got '" + text + "'");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw DomainError("--start: invalid date '" + text + "'");
    return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::vector<std::string> business_days(std::chrono::sys_days from, std::size_t n) {
    std::vector<std::string> out;
    for (auto day = from; out.size() < n; day += std::chrono::days{1}) {
        const std::chrono::weekday wd{day};
        if (wd == std::chrono::Saturday || wd == std::chrono::Sunday) continue;
        out.push_back(format_date(day));
    }
    return out;
}

int cmd_gen_synthetic(const GenArgs& a) {
    const RsParams theta = parse_theta(a.theta);
    if (a.days == 0) throw DomainError("--days must be positive");
    const MarketContext base{a.spot, a.rd, a.rf};
    base.validate();
    std::vector<Tenor> tenors;
    for (const auto& t : split(a.tenors)) tenors.push_back(parse_tenor(t));
    const auto dates = business_days(parse_date(a.start), a.days);

    // Spot history: a pre-switch path of the model itself, one step per day.
    std::vector<double> spots(a.days, a.spot);
    if (!a.flat_spot && a.days > 1) {
        const double dt = 1.0 / 260.0;
        const auto path = simulate_path(base, theta, dt * static_cast<double>(a.days - 1),
                                        static_cast<int>(a.days - 1), Scenario::no_jump, a.seed);
        spots = path.spot;
    }

    ensure_dir(a.out);
    for (Tenor tenor : tenors) {
        std::vector<QuoteRow> rows(a.days);
        parallel_for(a.days, 0, [&](std::size_t i) {
            rows[i] = synthetic_quote(theta, dates[i], {spots[i], a.rd, a.rf}, tenor);
        });
        const auto path = tenor_file(a.out, tenor);
        write_quotes(path, rows);
        std::printf("wrote %s (%zu rows)\n", path.string().c_str(), rows.size());
    }
    return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::size_t grid = 131;
    int evals = 130, repeats = 3;
    std::string out;
    bool skip_surface = false;
};

int cmd_bench(const BenchArgs& a) {
    if (a.evals < 1 || a.repeats < 1) throw DomainError("--evals and --repeats must be positive");
    const MarketContext mkt{7.8, 0.01, 0.015};
    const OptionSpec opt{7.8, 0.5};
    const RsParams theta{0.005, 0.10, 0.2, -0.01, 0.0};
    json out{{"threads", worker_count()}};

    if (!a.skip_surface) {
        if (a.grid < 2) throw DomainError("--grid must be at least 2");
        QuoteDay day{"2015-06-01", {}};
        for (Tenor t : kAllTenors) day.rows.push_back(synthetic_quote(theta, day.date, mkt, t));
        SurfaceOptions so;
        so.grid_points = a.grid;
        auto t0 = std::chrono::steady_clock::now();
        const auto mart = build_surface(day, Pricer::martingale, so);
        const double mart_s = elapsed_s(t0);
        t0 = std::chrono::steady_clock::now();
        const auto four = build_surface(day, Pricer::fourier, so);
        const double four_s = elapsed_s(t0);
        out["surface"] = {{"grid_points", a.grid},
                          {"martingale_s", mart_s},
                          {"fourier_s", four_s},
                          {"speedup", mart_s / four_s},
                          {"martingale_failures", mart.failures.size()},
                          {"fourier_failures", four.failures.size()}};
    }

    // Hedge-time inputs: a pre-switch path rebalanced daily.
    const double dt = opt.maturity / a.evals;
    const auto path = simulate_path(mkt, theta, opt.maturity, a.evals, Scenario::no_jump, kDefaultSeed);
    volatile double sink = 0.0;
    auto over_path = [&](auto&& eval) {
        return [&, eval] {
            double acc = 0.0;
            for (int i = 0; i < a.evals; ++i) acc += eval(path.spot[i], opt.maturity - i * dt, i * dt);
            sink = sink + acc;
        };
    };
    const double exact_s = min_time(a.repeats, over_path([&](double s, double tau, double) {
        return rs_delta({s, mkt.rd, mkt.rf}, {opt.strike, tau}, theta);
    }));
    const double approx_s = min_time(a.repeats, over_path([&](double s, double tau, double) {
        return approx_delta({s, mkt.rd, mkt.rf}, {opt.strike, tau}, theta);
    }));
    const double mv_s = min_time(a.repeats, over_path([&](double s, double, double t) {
        return mv_ratio({0, t, s}, mkt, opt, theta, DeltaEngine::exact).pi;
    }));
    const double mv_approx_s = min_time(a.repeats, over_path([&](double s, double, double t) {
        return mv_ratio({0, t, s}, mkt, opt, theta, DeltaEngine::approximate).pi;
    }));
    out["delta"] = {{"evaluations", a.evals}, {"rs_delta_s", exact_s}, {"approx_delta_s", approx_s},
                    {"speedup", exact_s / approx_s}};
    out["mv"] = {{"evaluations", a.evals}, {"mv_s", mv_s}, {"approx_mv_s", mv_approx_s},
                 {"speedup", mv_s / mv_approx_s}};

    const std::string text = out.dump(2);
    std::cout << text << '\n';
    if (!a.out.empty()) open_out(a.out) << text << '\n';
    return 0;
}

// ---------------------------------------------------------------- smile

struct SmileArgs {
    std::string theta = kDefaultTheta, param = "lambda", values = "0.1,0.2,0.5,1", out = "out/smile.csv";
    double spot = 7.8, rd = 0.01, rf = 0.015, maturity = 0.5, width = 0.03;
    std::size_t strikes = 61;
};

int cmd_smile(const SmileArgs& a) {
    const RsParams base = parse_theta(a.theta);
    const MarketContext mkt{a.spot, a.rd, a.rf};
    mkt.validate();
    if (a.strikes < 2) throw DomainError("--strikes must be at least 2");
    static const std::map<std::string, double RsParams::*> fields{{"sigma_low", &RsParams::sigma_low},
                                                                  {"sigma_high", &RsParams::sigma_high},
                                                                  {"lambda", &RsParams::lambda},
                                                                  {"u", &RsParams::u},
                                                                  {"delta", &RsParams::delta}};
    const auto field = fields.find(a.param);
    if (field == fields.end()) throw DomainError("--param: expected sigma_low, sigma_high, lambda, u or delta");

    auto out = open_out(a.out);
    out << "param,value,strike,moneyness,implied_vol\n";
    for (const auto& text : split(a.values)) {
        RsParams p = base;
        p.*(field->second) = parse_number(text, "--values");
        p.validate();
        for (std::size_t i = 0; i < a.strikes; ++i) {
            const double m = 1.0 - a.width + 2.0 * a.width * static_cast<double>(i) / static_cast<double>(a.strikes - 1);
            const double K = a.spot * m;
            out << a.param << ',' << num(p.*(field->second)) << ',' << num(K) << ',' << num(m) << ','
                << num(rs_implied_vol(mkt, {K, a.maturity}, p)) << '\n';
        }
    }
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

// --------------------------------------------------------- sabr-density

struct SabrDensityArgs {
    std::string quotes, tenor = "1M", out = "out/sabr_density.csv";
    std::size_t window = 30, bins = 20;
};

int cmd_sabr_density(const SabrDensityArgs& a) {
    const Tenor tenor = parse_tenor(a.tenor);
    const auto rows = read_quotes(a.quotes, tenor);
    if (a.window < 2 || a.bins < 1) throw DomainError("--window must be at least 2 and --bins positive");
    if (rows.size() < a.window) throw DataError("quote file has fewer rows than --window");
    const std::size_t first = rows.size() - a.window;

    const auto pillars = build_pillars(rows[first]);
    const double F = pillars.market.forward(pillars.maturity);
    const auto fit = sabr_calibrate(smile_points(pillars), F, pillars.maturity);
    const double horizon = static_cast<double>(a.window) / 260.0;

    std::vector<double> atm;
    for (std::size_t i = first; i < rows.size(); ++i) atm.push_back(rows[i].atm);
    const auto [lo_it, hi_it] = std::minmax_element(atm.begin(), atm.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi - lo < 1e-6 * hi) {
        const double mid = 0.5 * (lo + hi);
        lo = 0.95 * mid;
        hi = 1.05 * mid;
    }
    const double width = (hi - lo) / static_cast<double>(a.bins);
    std::vector<std::size_t> counts(a.bins, 0);
    for (double v : atm) counts[std::min(a.bins - 1, static_cast<std::size_t>((v - lo) / width))]++;

    auto out = open_out(a.out);
    out << "bin_lo,bin_hi,empirical_density,sabr_density\n";
    for (std::size_t b = 0; b < a.bins; ++b) {
        const double b_lo = lo + width * static_cast<double>(b);
        const double b_hi = b_lo + width;
        const double emp = static_cast<double>(counts[b]) / (static_cast<double>(atm.size()) * width);
        out << num(b_lo) << ',' << num(b_hi) << ',' << num(emp) << ','
            << num(sabr_vol_density(0.5 * (b_lo + b_hi), fit.params, horizon)) << '\n';
    }
    std::printf("SABR a=%.6f b=%.6f rho=%.6f on %s; wrote %s\n", fit.params.a, fit.params.b, fit.params.rho,
                rows[first].date.c_str(), a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regime-switching option pricing and hedging for pegged FX markets"};
    app.require_subcommand(1);

    PriceArgs price;
    auto* p = app.add_subcommand("price", "Exact, Fourier and approximate call prices and deltas");
    p->add_option("--spot", price.spot, "Spot S0")->required();
    p->add_option("--strike", price.strike, "Strike K")->required();
    p->add_option("--maturity", price.maturity, "Maturity in years")->required();
    p->add_option("--rd", price.rd, "Domestic rate")->required();
    p->add_option("--rf", price.rf, "Foreign rate")->required();
    p->add_option("--theta", price.theta, "sigma_low,sigma_high,lambda,u,delta")->required();
    p->add_flag("--json", price.as_json, "Print JSON");

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Calibrate every row of a quote file");
    c->add_option("--quotes", cal.quotes, "Quote CSV")->required();
    c->add_option("--tenor", cal.tenor, "Tenor of the file (1D, 1W, 1M, 3M, 6M, 1Y)")->required();
    c->add_option("--pricer", cal.pricer, "martingale or fourier")->capture_default_str();
    c->add_flag("--free-delta", cal.free_delta, "Calibrate the jump dispersion too");
    c->add_flag("--sabr", cal.sabr, "Add the SABR benchmark column");
    c->add_option("--out", cal.out, "Output directory")->capture_default_str();

    SurfaceArgs surf;
    auto* s = app.add_subcommand("surface", "Build daily parameter surfaces from per-tenor quote files");
    s->add_option("--quotes-dir", surf.quotes_dir, "Directory holding 1D.csv ... 1Y.csv")->required();
    s->add_option("--date", surf.dates, "Valuation date (repeatable; default all)");
    s->add_option("--pricer", surf.pricer, "martingale or fourier")->capture_default_str();
    s->add_option("--grid", surf.grid, "Maturity grid points")->capture_default_str();
    s->add_flag("--free-delta", surf.free_delta, "Calibrate the jump dispersion too");
    s->add_option("--out", surf.out, "Output directory")->capture_default_str();

    SimulateArgs sim;
    auto* m = app.add_subcommand("simulate", "Hedging experiment on simulated paths");
    m->add_option("--scenario", sim.scenario, "unconditional, no-jump or jump")->capture_default_str();
    m->add_option("--paths", sim.paths, "Number of paths")->capture_default_str();
    m->add_option("--steps", sim.steps, "Rebalancing steps")->capture_default_str();
    m->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    m->add_option("--strategies", sim.strategies, "Comma list or all")->capture_default_str();
    m->add_option("--theta", sim.theta, "sigma_low,sigma_high,lambda,u,delta")->capture_default_str();
    m->add_option("--spot", sim.spot)->capture_default_str();
    m->add_option("--strike", sim.strike)->capture_default_str();
    m->add_option("--maturity", sim.maturity)->capture_default_str();
    m->add_option("--rd", sim.rd)->capture_default_str();
    m->add_option("--rf", sim.rf)->capture_default_str();
    m->add_option("--bins", sim.bins, "Histogram bins")->capture_default_str();
    m->add_option("--stem", sim.stem, "Output file stem (default: scenario name)");
    m->add_option("--out", sim.out, "Output directory")->capture_default_str();

    HedgeArgs hedge;
    auto* h = app.add_subcommand("hedge", "Hedge ATM calls on a spot history with calibrated surfaces");
    h->add_option("--quotes", hedge.quotes, "6M quote CSV (spot history and ATM vols)")->required();
    h->add_option("--surfaces", hedge.surfaces, "Directory of <date>.csv surfaces")->required();
    h->add_option("--strategies", hedge.strategies, "Comma list")->capture_default_str();
    h->add_option("--stride", hedge.stride, "Days between option start dates")->capture_default_str();
    h->add_option("--horizon", hedge.horizon, "Maximum daily steps per option")->capture_default_str();
    h->add_option("--out", hedge.out, "Output directory")->capture_default_str();

    GenArgs gen;
    auto* g = app.add_subcommand("gen-synthetic", "Write per-tenor quote files priced by the model");
    g->add_option("--theta", gen.theta, "sigma_low,sigma_high,lambda,u,delta")->capture_default_str();
    g->add_option("--start", gen.start, "First date (YYYY-MM-DD)")->capture_default_str();
    g->add_option("--days", gen.days, "Business days")->capture_default_str();
    g->add_option("--tenors", gen.tenors, "Comma list")->capture_default_str();
    g->add_option("--spot", gen.spot)->capture_default_str();
    g->add_option("--rd", gen.rd)->capture_default_str();
    g->add_option("--rf", gen.rf)->capture_default_str();
    g->add_option("--seed", gen.seed, "Seed of the spot path")->capture_default_str();
    g->add_flag("--flat-spot", gen.flat_spot, "Keep the spot constant");
    g->add_option("--out", gen.out, "Output directory")->capture_default_str();

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Timing comparisons, printed as JSON");
    b->add_option("--grid", bench.grid, "Surface grid points")->capture_default_str();
    b->add_option("--evals", bench.evals, "Delta and MV evaluations")->capture_default_str();
    b->add_option("--repeats", bench.repeats, "Repeats (minimum is reported)")->capture_default_str();
    b->add_flag("--skip-surface", bench.skip_surface, "Skip the surface builds");
    b->add_option("--out", bench.out, "Also write the JSON here");

    SmileArgs smile;
    auto* sm = app.add_subcommand("smile", "Implied-vol smiles while varying one parameter");
    sm->add_option("--theta", smile.theta)->capture_default_str();
    sm->add_option("--param", smile.param, "sigma_low, sigma_high, lambda, u or delta")->capture_default_str();
    sm->add_option("--values", smile.values, "Comma list")->capture_default_str();
    sm->add_option("--spot", smile.spot)->capture_default_str();
    sm->add_option("--rd", smile.rd)->capture_default_str();
    sm->add_option("--rf", smile.rf)->capture_default_str();
    sm->add_option("--maturity", smile.maturity)->capture_default_str();
    sm->add_option("--width", smile.width, "Half-width in moneyness")->capture_default_str();
    sm->add_option("--strikes", smile.strikes)->capture_default_str();
    sm->add_option("--out", smile.out, "Output CSV")->capture_default_str();

    SabrDensityArgs sd;
    auto* d = app.add_subcommand("sabr-density", "SABR lognormal vol density against the ATM vol histogram");
    d->add_option("--quotes", sd.quotes, "Quote CSV")->required();
    d->add_option("--tenor", sd.tenor)->capture_default_str();
    d->add_option("--window", sd.window, "Trailing rows")->capture_default_str();
    d->add_option("--bins", sd.bins)->capture_default_str();
    d->add_option("--out", sd.out, "Output CSV")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*p) return cmd_price(price);
        if (*c) return cmd_calibrate(cal);
        if (*s) return cmd_surface(surf);
        if (*m) return cmd_simulate(sim);
        if (*h) return cmd_hedge(hedge);
        if (*g) return cmd_gen_synthetic(gen);
        if (*b) return cmd_bench(bench);
        if (*sm) return cmd_smile(smile);
        if (*d) return cmd_sabr_density(sd);
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        if (e.row() > 0) {
            std::fprintf(stderr, "error (row %zu): %s\n", e.row(), e.what());
        } else {
            std::fprintf(stderr, "error: %s\n", e.what());
        }
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 2;
}
