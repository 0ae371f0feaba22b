// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "pegfx/calibration.hpp"
#include "pegfx/conventions.hpp"
#include "pegfx/core_bs.hpp"
#include "pegfx/fourier.hpp"
#include "pegfx/mv_hedge.hpp"
#include "pegfx/rs_model.hpp"
#include "pegfx/sabr.hpp"
#include "pegfx/simulation.hpp"

namespace fs = std::filesystem;
using namespace pegfx;

namespace {

// Tolerances and budgets.
constexpr double kCrossPricerTol = 1e-6;    // times S0
constexpr double kMcSigmas = 3.0;
constexpr double kPhiAtMinusI = 1e-10;
constexpr double kFdDeltaTol = 1e-6;
constexpr double kFdBump = 1e-5;            // times S0
constexpr double kRoundTripRmsePct = 0.1;
constexpr double kSurfaceSpeedup = 2.0;
constexpr double kTableRelTol = 0.30;
constexpr double kTimingSpeedup = 10.0;
constexpr double kDeltaRoundTrip = 1e-9;
constexpr std::size_t kHedgePaths = 10000;
constexpr std::uint64_t kHedgeSeed = 20240607;

const MarketContext kHkd{7.8, 0.01, 0.015};
const OptionSpec kAtm{7.8, 0.5};
const RsParams kTheta{0.005, 0.10, 0.2, -0.01, 0.0};

struct Outcome {
    bool pass;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> check;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

template <class F>
double min_time(int repeats, F&& body) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

struct Draw {
    MarketContext mkt;
    OptionSpec opt;
    RsParams params;
};

Draw random_draw(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Draw d;
    d.mkt = {7.8, 0.05 * U(rng), 0.05 * U(rng)};
    d.opt = {7.8 * (0.9 + 0.2 * U(rng)), 0.1 + 1.9 * U(rng)};
    d.params = {0.001 + 0.019 * U(rng), 0.02 + 0.28 * U(rng), 2.0 * U(rng), -0.1 + 0.2 * U(rng), 0.05 * U(rng)};
    return d;
}

Outcome c1_cross_pricer() {
    std::mt19937_64 rng(101);
    double worst = std::abs(fourier_price(kHkd, kAtm, kTheta) - rs_price(kHkd, kAtm, kTheta)) / kHkd.spot;
    for (int i = 0; i < 100; ++i) {
        const auto d = random_draw(rng);
        worst = std::max(worst, std::abs(fourier_price(d.mkt, d.opt, d.params) - rs_price(d.mkt, d.opt, d.params)) /
                                    d.mkt.spot);
    }
    return {worst <= kCrossPricerTol, fmt("max |fourier - exact| / S0 = %.3e over 101 cases", worst)};
}

Outcome c2_monte_carlo() {
    const auto st = simulate_terminal(kHkd, kTheta, kAtm.maturity, Scenario::unconditional, 777, 10'000'000);
    double sum = 0.0, sum2 = 0.0;
    for (double s : st) {
        const double pay = std::max(s - kAtm.strike, 0.0);
        sum += pay;
        sum2 += pay * pay;
    }
    const double n = static_cast<double>(st.size());
    const double disc = std::exp(-kHkd.rd * kAtm.maturity);
    const double mean = disc * sum / n;
    const double se = disc * std::sqrt((sum2 / n - (sum / n) * (sum / n)) / (n - 1.0));
    const double exact = rs_price(kHkd, kAtm, kTheta);
    const double z = std::abs(mean - exact) / se;
    return {z <= kMcSigmas, fmt("exact %.8f, MC %.8f, SE %.2e, |z| = %.2f", exact, mean, se, z)};
}

Outcome c3_char_fn() {
    std::mt19937_64 rng(303);
    bool exact_one = char_fn(0.0, kAtm.maturity, kTheta) == cplx(1.0, 0.0);
    double worst = std::abs(char_fn(cplx(0.0, -1.0), kAtm.maturity, kTheta) - 1.0);
    for (int i = 0; i < 20; ++i) {
        const auto d = random_draw(rng);
        exact_one = exact_one && char_fn(0.0, d.opt.maturity, d.params) == cplx(1.0, 0.0);
        worst = std::max(worst, std::abs(char_fn(cplx(0.0, -1.0), d.opt.maturity, d.params) - 1.0));
    }
    return {exact_one && worst <= kPhiAtMinusI,
            fmt("phi(0) == 1: %s, max |phi(-i) - 1| = %.3e", exact_one ? "yes" : "no", worst)};
}

Outcome c4_approx_bound() {
    const MarketContext m{100.0, 0.02, 0.03};
    const OptionSpec o{100.0, 1.0};
    const RsParams p{0.02, 0.10, 0.1, 0.05, 0.0};
    std::vector<double> spots;
    for (int s = 50; s <= 150; ++s) spots.push_back(s);
    const auto rows = approx_error_grid(m, o, p, spots);
    std::size_t violations = 0, weak_violations = 0, worst = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].within_bound) {
            ++violations;
            std::printf("    S0=%.0f: error %.6e > bound %.6e (weak bound %.6e, %s)\n", rows[i].spot,
                        rows[i].spot_adjusted_error, rows[i].bound, rows[i].weak_bound,
                        rows[i].within_weak_bound ? "within weak" : "violates weak");
        }
        if (!rows[i].within_weak_bound) ++weak_violations;
        if (rows[i].spot_adjusted_error / rows[i].bound > rows[worst].spot_adjusted_error / rows[worst].bound) worst = i;
    }
    return {violations == 0, fmt("%zu points, %zu violations (%zu of the weak bound); tightest S0=%.0f: %.4e vs %.4e",
                                 rows.size(), violations, weak_violations, rows[worst].spot,
                                 rows[worst].spot_adjusted_error, rows[worst].bound)};
}

Outcome c5_fd_deltas() {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst_rs = 0.0, worst_ap = 0.0, worst_bs = 0.0;
    auto fd = [](auto&& price, const MarketContext& m) {
        const double h = kFdBump * m.spot;
        return (price(MarketContext{m.spot + h, m.rd, m.rf}) - price(MarketContext{m.spot - h, m.rd, m.rf})) / (2 * h);
    };
    for (int i = 0; i < 100; ++i) {
        const MarketContext m{7.8, 0.03 * U(rng), 0.03 * U(rng)};
        const OptionSpec o{7.8 * (0.97 + 0.06 * U(rng)), 0.25 + 0.75 * U(rng)};
        const double sl = 0.005 + 0.015 * U(rng);
        const RsParams p{sl, sl + 0.15 * U(rng), 0.5 * U(rng), -0.03 + 0.06 * U(rng), 0.02 * U(rng)};
        const double vol = sl + 0.05 * U(rng);
        worst_rs = std::max(worst_rs, std::abs(rs_delta(m, o, p) - fd([&](const MarketContext& x) { return rs_price(x, o, p); }, m)));
        worst_ap = std::max(worst_ap, std::abs(approx_delta(m, o, p) - fd([&](const MarketContext& x) { return approx_price(x, o, p); }, m)));
        worst_bs = std::max(worst_bs, std::abs(bs_delta(m, o, vol) - fd([&](const MarketContext& x) { return bs_price(x, o, vol); }, m)));
    }
    const double worst = std::max({worst_rs, worst_ap, worst_bs});
    return {worst <= kFdDeltaTol, fmt("max |delta - FD|: rs %.3e, approx %.3e, bs %.3e", worst_rs, worst_ap, worst_bs)};
}

Outcome c6_calibration() {
    bool pass = true;
    std::string detail;
    for (Tenor tenor : {Tenor::m1, Tenor::m3, Tenor::m6}) {
        const double T = year_fraction(tenor);
        const auto conv = convention_for(tenor);
        const auto pillars = pillars_from_vols(synthetic_pillar_vols(kTheta, kHkd, T, conv), kHkd, T, conv, tenor);
        std::array<SmilePoint, 5> smile{};
        std::array<double, 5> quoted{}, sabr_model{};
        for (std::size_t i = 0; i < 5; ++i) {
            smile[i] = {pillars.points[i].strike, pillars.points[i].vol};
            quoted[i] = pillars.points[i].vol;
        }
        const double F = kHkd.forward(T);
        const auto sabr = sabr_calibrate(smile, F, T);
        for (std::size_t i = 0; i < 5; ++i) sabr_model[i] = sabr_vol(smile[i].strike, F, T, sabr.params);
        const double sabr_rmse = me_rmse(sabr_model, quoted).second;
        for (Pricer pricer : {Pricer::martingale, Pricer::fourier}) {
            const auto r = calibrate_single(pillars, pricer);
            pass = pass && r.rmse < kRoundTripRmsePct && sabr_rmse > r.rmse;
            detail += fmt("%s/%s RMSE %.2e%% (SABR %.3f%%); ", to_string(tenor).c_str(), to_string(pricer).c_str(),
                          r.rmse, sabr_rmse);
        }
    }
    detail.resize(detail.size() - 2);
    return {pass, detail};
}

Outcome c7_surface() {
    QuoteDay day{"2015-06-01", {}};
    for (Tenor t : kAllTenors) day.rows.push_back(synthetic_quote(kTheta, day.date, kHkd, t));
    SurfaceOptions opts;
    opts.grid_points = 131;
    ParamSurface mart, four;
    const double mart_s = min_time(1, [&] { mart = build_surface(day, Pricer::martingale, opts); });
    const double four_s = min_time(1, [&] { four = build_surface(day, Pricer::fourier, opts); });
    const bool complete = mart.points.size() == 131 && four.points.size() == 131 && !mart.partial() && !four.partial();
    const double speedup = mart_s / four_s;
    return {complete && speedup >= kSurfaceSpeedup,
            fmt("converged points: martingale %zu/131, fourier %zu/131; martingale %.1f s, fourier %.1f s, speedup %.2fx "
                "(need %.1fx)",
                mart.points.size(), four.points.size(), mart_s, four_s, speedup, kSurfaceSpeedup)};
}

fs::path g_work;

ExperimentConfig hedge_config(Scenario scenario) {
    ExperimentConfig cfg;
    cfg.scenario = scenario;
    cfg.n_paths = kHedgePaths;
    cfg.seed = kHedgeSeed;
    return cfg;
}

std::vector<double> hedge_means(Scenario scenario, const fs::path& out_dir) {
    const auto cfg = hedge_config(scenario);
    const auto runs = run_experiment(cfg);
    write_experiment(out_dir, to_string(scenario), cfg, runs);
    const auto flat = flatten(runs);
    std::vector<double> means;
    for (const auto& s : experiment_stats(flat)) means.push_back(s.terminal.mean);
    return means;  // bs, rs, approx rs, mv, approx mv
}

Outcome compare_table(const std::vector<double>& got, const std::array<double, 5>& target, bool ordering,
                      const char* ordering_text) {
    static const char* names[] = {"BS", "RS", "ApproxRS", "MV", "ApproxMV"};
    bool within = true;
    std::string detail;
    for (std::size_t i = 0; i < 5; ++i) {
        const double rel = got[i] / target[i] - 1.0;
        within = within && std::abs(rel) <= kTableRelTol;
        detail += fmt("%s %.3f%% (%+.0f%%) ", names[i], got[i], 100.0 * rel);
    }
    detail += fmt("; %s: %s", ordering_text, ordering ? "yes" : "no");
    return {within && ordering, detail};
}

Outcome c8_no_jump() {
    const auto m = hedge_means(Scenario::no_jump, g_work / "a");
    const bool ordering = std::max({m[0], m[1], m[2]}) < std::min(m[3], m[4]);
    return compare_table(m, {0.149, 0.154, 0.154, 0.216, 0.212}, ordering, "delta hedges < MV");
}

Outcome c9_jump() {
    const auto m = hedge_means(Scenario::jump, g_work / "a");
    const bool ordering = m[3] < m[4] && m[4] < m[0] && m[0] < m[1];
    return compare_table(m, {1.460, 1.508, 1.511, 0.911, 0.921}, ordering, "MV < ApproxMV < BS < RS");
}

Outcome c10_timing() {
    const double dt = kAtm.maturity / 130.0;
    const auto path = simulate_path(kHkd, kTheta, kAtm.maturity, 130, Scenario::no_jump, kHedgeSeed);
    volatile double sink = 0.0;
    auto along = [&](auto&& eval) {
        return [&, eval] {
            double acc = 0.0;
            for (int i = 0; i < 130; ++i) acc += eval(path.spot[i], i * dt);
            sink = sink + acc;
        };
    };
    const double rs_s = min_time(3, along([&](double s, double t) {
        return rs_delta({s, kHkd.rd, kHkd.rf}, {kAtm.strike, kAtm.maturity - t}, kTheta);
    }));
    const double ap_s = min_time(3, along([&](double s, double t) {
        return approx_delta({s, kHkd.rd, kHkd.rf}, {kAtm.strike, kAtm.maturity - t}, kTheta);
    }));
    const double mv_s = min_time(3, along([&](double s, double t) {
        return mv_ratio({0, t, s}, kHkd, kAtm, kTheta, DeltaEngine::exact).pi;
    }));
    const double amv_s = min_time(3, along([&](double s, double t) {
        return mv_ratio({0, t, s}, kHkd, kAtm, kTheta, DeltaEngine::approximate).pi;
    }));
    const double d_speed = rs_s / ap_s, mv_speed = mv_s / amv_s;
    return {d_speed >= kTimingSpeedup && mv_speed >= kTimingSpeedup,
            fmt("130 evals: rs_delta %.2e s vs approx %.2e s (%.0fx); MV %.2e s vs approx MV %.2e s (%.0fx)", rs_s, ap_s,
                d_speed, mv_s, amv_s, mv_speed)};
}

Outcome c11_delta_round_trip() {
    std::mt19937_64 rng(1111);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    std::size_t checks = 0;
    for (int i = 0; i < 50; ++i) {
        QuoteRow r;
        r.date = "2016-03-15";
        r.spot = 7.75 + 0.1 * U(rng);
        r.rd = 0.03 * U(rng);
        r.rf = 0.03 * U(rng);
        r.atm = 0.003 + 0.03 * U(rng);
        r.rr25 = r.atm * (-0.8 + 1.6 * U(rng));
        r.bf25 = r.atm * 0.6 * U(rng);
        r.rr10 = 1.8 * r.rr25;
        r.bf10 = r.bf25 * (2.0 + 2.0 * U(rng));
        r.tenor = (i % 2 == 0) ? Tenor::m1 : Tenor::y1;
        const auto vols = pillar_vols(r);
        for (DeltaConvention conv : {DeltaConvention::spot_premium_adjusted, DeltaConvention::forward_premium_adjusted}) {
            const auto sp = pillars_from_vols(vols, r.market(), r.maturity(), conv, r.tenor);
            for (const auto& q : sp.points) {
                ++checks;
                if (q.pillar == Pillar::atm) {
                    const double c = pa_delta(q.strike, OptionSide::call, q.vol, sp.market, sp.maturity, conv);
                    const double p = pa_delta(q.strike, OptionSide::put, q.vol, sp.market, sp.maturity, conv);
                    worst = std::max(worst, std::abs(c + p));
                } else {
                    const double d = pa_delta(q.strike, q.side, q.vol, sp.market, sp.maturity, conv);
                    const double target = q.side == OptionSide::call ? q.target_delta : -q.target_delta;
                    worst = std::max(worst, std::abs(d - target));
                }
            }
        }
    }
    return {worst <= kDeltaRoundTrip, fmt("%zu pillar checks, max |delta - target| = %.2e", checks, worst)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome c12_determinism() {
    hedge_means(Scenario::no_jump, g_work / "b");
    hedge_means(Scenario::jump, g_work / "b");
    std::size_t files = 0, identical = 0;
    for (const std::string stem : {"no-jump", "jump"}) {
        for (const std::string suffix : {".csv", "_summary.json", "_hist.csv"}) {
            const auto a = g_work / "a" / (stem + suffix);
            const auto b = g_work / "b" / (stem + suffix);
            ++files;
            if (fs::exists(a) && fs::exists(b) && slurp(a) == slurp(b)) ++identical;
        }
    }
    return {files == identical, fmt("%zu/%zu report files byte-identical", identical, files)};
}

}  // namespace

int main() {
    g_work = fs::temp_directory_path() / ("pegfx_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(g_work);

    const std::vector<Criterion> criteria{
        {1, "cross-pricer agreement", 30, c1_cross_pricer},
        {2, "Monte Carlo oracle", 120, c2_monte_carlo},
        {3, "characteristic-function identities", 5, c3_char_fn},
        {4, "approximation bound", 30, c4_approx_bound},
        {5, "delta correctness", 60, c5_fd_deltas},
        {6, "calibration round trip", 60, c6_calibration},
        {7, "surface build", 600, c7_surface},
        {8, "hedging simulation, no jump", 600, c8_no_jump},
        {9, "hedging simulation, jump", 600, c9_jump},
        {10, "timing", 120, c10_timing},
        {11, "delta conventions round trip", 10, c11_delta_round_trip},
        {12, "determinism", 1200, c12_determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o{false, ""};
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::printf("C%-2d %-36s %s  %s [%.1f s / %.0f s%s]\n", c.id, c.name.c_str(), pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    fs::remove_all(g_work);
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
