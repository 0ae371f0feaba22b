#include "pegfx/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <ceres/ceres.h>
#include <json.hpp>

#include "pegfx/errors.hpp"
#include "pegfx/fourier.hpp"

namespace pegfx {

namespace {

// Both pricers work to the same absolute price tolerance, the switch-time
// quadrature's default.
constexpr double kPriceTol = 1e-10;

FourierOptions fourier_options(const MarketContext& mkt) {
    FourierOptions fo;
    fo.price_tol = kPriceTol / mkt.spot;
    fo.envelope_tol = fo.price_tol / 10.0;
    return fo;
}

// x = (sigma_low, gap, lambda, u); delta is a separate one-element block.
constexpr int kFree = 4;

RsParams unpack(const double* x, double delta) {
    return {x[0], x[0] + x[1], x[2], x[3], delta};
}

std::array<double, 5> quoted_vols(const SmilePillars& pillars) {
    std::array<double, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) out[i] = pillars.points[i].vol;
    return out;
}

// Finite-difference step scales per coordinate, used when the value is near 0.
constexpr std::array<double, 5> kStepScale{1e-3, 1e-2, 1e-2, 1e-3, 1e-3};
constexpr double kRelativeStep = 1e-4;

class PillarResiduals final : public ceres::SizedCostFunction<5, kFree, 1> {
public:
    PillarResiduals(const SmilePillars& pillars, Pricer pricer, const CalibrationBounds& bounds)
        : pillars_(pillars), pricer_(pricer), quoted_(quoted_vols(pillars)) {
        lo_ = {bounds.sigma_low_min, 0.0, 0.0, bounds.u_min, 0.0};
        hi_ = {bounds.sigma_low_max, bounds.sigma_high_max - bounds.sigma_low_max, bounds.lambda_max,
               bounds.u_max, bounds.delta_max};
    }

    bool Evaluate(double const* const* parameters, double* residuals,
                  double** jacobians) const override {
        std::array<double, 5> x{parameters[0][0], parameters[0][1], parameters[0][2],
                                parameters[0][3], parameters[1][0]};
        if (!eval(x, residuals)) return false;
        if (!jacobians) return true;

        for (int j = 0; j < 5; ++j) {
            double* jac = j < kFree ? jacobians[0] : jacobians[1];
            if (!jac) continue;
            const int col = j < kFree ? j : 0;
            const int ncols = j < kFree ? kFree : 1;
            const double h = kRelativeStep * std::max(std::abs(x[j]), kStepScale[j]);
            // Central where the box allows it, one-sided at a bound.
            const double up = std::min(x[j] + h, hi_[j]);
            const double down = std::max(x[j] - h, lo_[j]);
            if (!(up > down)) {
                for (int i = 0; i < 5; ++i) jac[i * ncols + col] = 0.0;
                continue;
            }
            std::array<double, 5> ru{}, rd{};
            std::copy(residuals, residuals + 5, ru.begin());
            std::copy(residuals, residuals + 5, rd.begin());
            std::array<double, 5> xu = x, xd = x;
            xu[j] = up;
            xd[j] = down;
            if (up > x[j] && !eval(xu, ru.data())) return false;
            if (down < x[j] && !eval(xd, rd.data())) return false;
            for (int i = 0; i < 5; ++i) jac[i * ncols + col] = (ru[i] - rd[i]) / (up - down);
        }
        return true;
    }

private:
    bool eval(const std::array<double, 5>& x, double* out) const {
        try {
            const auto vols = model_vols(pillars_, unpack(x.data(), x[4]), pricer_);
            for (int i = 0; i < 5; ++i) out[i] = vols[i] - quoted_[i];
            return true;
        } catch (const Error&) {
            return false;
        }
    }

    const SmilePillars& pillars_;
    Pricer pricer_;
    std::array<double, 5> quoted_;
    std::array<double, 5> lo_{}, hi_{};
};

// Deterministic starts spread over the regimes the smile can come from: a rare
// large switch, a frequent moderate one, and jumps of either sign.
std::vector<std::array<double, 5>> starts(const SmilePillars& pillars, const CalibrationBounds& b,
                                          const std::optional<RsParams>& seed) {
    const auto q = quoted_vols(pillars);
    const double lo = *std::min_element(q.begin(), q.end());
    const double hi = *std::max_element(q.begin(), q.end());
    std::vector<std::array<double, 5>> out;
    auto add = [&](double sl, double sh, double lambda, double u, double delta) {
        sl = std::clamp(sl, b.sigma_low_min, b.sigma_low_max);
        sh = std::clamp(sh, sl, b.sigma_high_max);
        out.push_back({sl, sh - sl, std::clamp(lambda, 0.0, b.lambda_max),
                       std::clamp(u, b.u_min, b.u_max), std::clamp(delta, 0.0, b.delta_max)});
    };
    if (seed) add(seed->sigma_low, seed->sigma_high, seed->lambda, seed->u, seed->delta);
    add(0.9 * lo, 3.0 * hi, 0.2, -0.01, 0.0);
    add(0.7 * lo, 6.0 * hi, 0.05, 0.01, 0.0);
    add(0.95 * lo, 2.0 * hi, 1.0, 0.0, 0.0);
    add(0.5 * lo, 10.0 * hi, 0.5, -0.03, 0.0);
    return out;
}

struct Run {
    std::array<double, 5> x;
    double cost;
    int iterations;
    bool converged;
};

Run solve(const SmilePillars& pillars, Pricer pricer, const CalibrationOptions& opts,
          std::array<double, 5> x) {
    const auto& b = opts.bounds;
    ceres::Problem::Options popts;
    popts.cost_function_ownership = ceres::TAKE_OWNERSHIP;
    ceres::Problem problem(popts);
    double* free = x.data();
    double* delta = x.data() + kFree;
    if (!opts.free_delta) *delta = 0.0;
    problem.AddResidualBlock(new PillarResiduals(pillars, pricer, b), nullptr, free, delta);
    const std::array<double, kFree> lo{b.sigma_low_min, 0.0, 0.0, b.u_min};
    const std::array<double, kFree> hi{b.sigma_low_max, b.sigma_high_max - b.sigma_low_max,
                                       b.lambda_max, b.u_max};
    for (int j = 0; j < kFree; ++j) {
        problem.SetParameterLowerBound(free, j, lo[j]);
        problem.SetParameterUpperBound(free, j, hi[j]);
    }
    problem.SetParameterLowerBound(delta, 0, 0.0);
    problem.SetParameterUpperBound(delta, 0, b.delta_max);
    if (!opts.free_delta) problem.SetParameterBlockConstant(delta);

    ceres::Solver::Options so;
    so.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
    so.linear_solver_type = ceres::DENSE_QR;
    so.max_num_iterations = opts.max_iterations;
    so.function_tolerance = 1e-14;
    so.gradient_tolerance = 1e-16;
    so.parameter_tolerance = 1e-12;
    so.num_threads = 1;
    so.logging_type = ceres::SILENT;
    so.minimizer_progress_to_stdout = false;

    ceres::Solver::Summary summary;
    ceres::Solve(so, &problem, &summary);
    if (!summary.IsSolutionUsable()) return {x, std::numeric_limits<double>::infinity(), 0, false};
    return {x, summary.final_cost, static_cast<int>(summary.iterations.size()),
            summary.termination_type == ceres::CONVERGENCE};
}

}  // namespace

std::string to_string(Pricer pricer) { return pricer == Pricer::martingale ? "martingale" : "fourier"; }

Pricer parse_pricer(std::string_view text) {
    if (text == "martingale") return Pricer::martingale;
    if (text == "fourier") return Pricer::fourier;
    throw DomainError("unknown pricer '" + std::string(text) + "' (expected martingale or fourier)");
}

std::array<double, 5> model_vols(const SmilePillars& pillars, const RsParams& theta, Pricer pricer) {
    const MarketContext& mkt = pillars.market;
    const double T = pillars.maturity;
    std::array<double, 5> strikes{};
    for (std::size_t i = 0; i < 5; ++i) strikes[i] = pillars.points[i].strike;

    std::array<double, 5> calls{};
    if (pricer == Pricer::fourier) {
        const auto p = fourier_prices(mkt, T, strikes, theta, fourier_options(mkt));
        std::copy(p.begin(), p.end(), calls.begin());
    } else {
        for (std::size_t i = 0; i < 5; ++i) calls[i] = rs_price(mkt, {strikes[i], T}, theta, {kPriceTol, 10000});
    }

    const double fwd = mkt.forward(T);
    std::array<double, 5> vols{};
    for (std::size_t i = 0; i < 5; ++i) {
        const double K = strikes[i];
        if (K < fwd) {
            const double put = calls[i] - mkt.spot * std::exp(-mkt.rf * T) + K * std::exp(-mkt.rd * T);
            vols[i] = implied_vol(mkt, {K, T, OptionSide::put}, put);
        } else {
            vols[i] = implied_vol(mkt, {K, T, OptionSide::call}, calls[i]);
        }
    }
    return vols;
}

std::pair<double, double> me_rmse(const std::array<double, 5>& model, const std::array<double, 5>& quoted) {
    double me = 0.0, ms = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        const double rel = (model[i] - quoted[i]) / quoted[i];
        me += std::abs(rel);
        ms += rel * rel;
    }
    return {me / 5.0 * 100.0, std::sqrt(ms / 5.0) * 100.0};
}

CalibrationResult calibrate_single(const SmilePillars& pillars, Pricer pricer,
                                   const std::optional<RsParams>& seed_theta,
                                   const CalibrationOptions& options) {
    const auto quoted = quoted_vols(pillars);
    for (std::size_t i = 0; i < 5; ++i) {
        if (!(quoted[i] >= options.bounds.sigma_low_min)) {
            throw CalibrationError("infeasible smile: " + to_string(pillars.points[i].pillar) + " vol " +
                                       std::to_string(quoted[i]) + " lies below the sigma_low bound " +
                                       std::to_string(options.bounds.sigma_low_min),
                                   {}, std::numeric_limits<double>::infinity());
        }
    }

    const auto xs = starts(pillars, options.bounds, seed_theta);
    std::optional<Run> best;
    int best_index = 0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const Run run = solve(pillars, pricer, options, xs[s]);
        // Strict improvement keeps the earliest start on ties.
        if (std::isfinite(run.cost) && (!best || run.cost < best->cost)) {
            best = run;
            best_index = static_cast<int>(s);
        }
    }
    if (!best) {
        const auto& x0 = xs.front();
        throw CalibrationError("no start produced a usable least-squares solution",
                               {x0[0], x0[0] + x0[1], x0[2], x0[3], x0[4]},
                               std::numeric_limits<double>::infinity());
    }

    CalibrationResult out;
    out.theta_star = unpack(best->x.data(), best->x[4]);
    out.iterations = best->iterations;
    out.start_index = best_index;
    out.converged = best->converged;
    out.pricer_used = pricer;
    std::array<double, 5> model{};
    try {
        model = model_vols(pillars, out.theta_star, pricer);
    } catch (const Error& e) {
        const auto& t = out.theta_star;
        throw CalibrationError(std::string("calibrated parameters cannot be priced: ") + e.what(),
                               {t.sigma_low, t.sigma_high, t.lambda, t.u, t.delta}, best->cost);
    }
    for (std::size_t i = 0; i < 5; ++i) {
        out.residuals[i] = model[i] - quoted[i];
        out.rel_errors_pct[i] = out.residuals[i] / quoted[i] * 100.0;
    }
    std::tie(out.me, out.rmse) = me_rmse(model, quoted);
    return out;
}

double interpolate_quotes(double vol_near, double t_near, double vol_far, double t_far, double t) {
    if (!(vol_near > 0.0) || !(vol_far > 0.0)) throw DomainError("interpolated vols must be positive");
    if (!(t_near > 0.0) || !(t_far >= t_near)) throw DomainError("tenor maturities must be increasing and positive");
    if (!(t >= t_near && t <= t_far)) throw DomainError("interpolation time lies outside the bracketing tenors");
    if (t == t_near) return vol_near;
    if (t == t_far) return vol_far;
    const double var = (t_far * (t - t_near) * vol_far * vol_far + t_near * (t_far - t) * vol_near * vol_near) /
                       (t * (t_far - t_near));
    return std::sqrt(var);
}

std::vector<double> surface_grid(std::size_t n, double dt, double t_end) {
    if (n < 2) throw DomainError("surface grid needs at least two points");
    if (!(dt > 0.0) || !(t_end > dt)) throw DomainError("surface grid needs 0 < dt < t_end");
    std::vector<double> grid(n);
    const double step = (t_end - dt) / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j) grid[j] = dt + static_cast<double>(j) * step;
    grid.back() = t_end;
    return grid;
}

namespace {

constexpr std::array<Tenor, 5> kSurfaceTenors{Tenor::d1, Tenor::w1, Tenor::m1, Tenor::m3, Tenor::m6};

const QuoteRow& row_for(const QuoteDay& day, Tenor tenor) {
    for (const auto& r : day.rows) {
        if (r.tenor == tenor) return r;
    }
    throw DataError("quote day " + day.date + " has no " + to_string(tenor) + " row");
}

}  // namespace

SmilePillars interpolated_pillars(const QuoteDay& day, double t) {
    std::array<const QuoteRow*, 5> rows{};
    for (std::size_t i = 0; i < 5; ++i) {
        rows[i] = &row_for(day, kSurfaceTenors[i]);
        rows[i]->validate();
        if (rows[i]->spot != rows[0]->spot) {
            throw DataError("quote day " + day.date + " has inconsistent spots across tenors");
        }
    }
    const double t_first = year_fraction(kSurfaceTenors.front());
    const double t_last = year_fraction(kSurfaceTenors.back());
    if (!(t >= t_first && t <= t_last)) {
        throw DomainError("surface maturity lies outside the quoted tenor range");
    }
    std::size_t hi = 1;
    while (hi < 4 && year_fraction(kSurfaceTenors[hi]) < t) ++hi;
    const QuoteRow& near = *rows[hi - 1];
    const QuoteRow& far = *rows[hi];
    const double tn = near.maturity(), tf = far.maturity();

    const auto vn = pillar_vols(near);
    const auto vf = pillar_vols(far);
    std::array<double, 5> vols{};
    for (std::size_t i = 0; i < 5; ++i) vols[i] = interpolate_quotes(vn[i], tn, vf[i], tf, t);
    const double w = (t - tn) / (tf - tn);
    const MarketContext mkt{near.spot, near.rd + w * (far.rd - near.rd), near.rf + w * (far.rf - near.rf)};
    return pillars_from_vols(vols, mkt, t, DeltaConvention::spot_premium_adjusted, near.tenor, day.date);
}

RsParams ParamSurface::theta_at(double t) const {
    if (points.empty()) throw DataError("parameter surface for " + date + " is empty");
    if (t <= points.front().t) return points.front().result.theta_star;
    if (t >= points.back().t) return points.back().result.theta_star;
    const auto it = std::lower_bound(points.begin(), points.end(), t,
                                     [](const SurfacePoint& p, double v) { return p.t < v; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double w = (t - a.t) / (b.t - a.t);
    auto lerp = [w](double x, double y) { return x + w * (y - x); };
    const RsParams& pa = a.result.theta_star;
    const RsParams& pb = b.result.theta_star;
    return {lerp(pa.sigma_low, pb.sigma_low), lerp(pa.sigma_high, pb.sigma_high),
            lerp(pa.lambda, pb.lambda), lerp(pa.u, pb.u), lerp(pa.delta, pb.delta)};
}

unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PEGFX_THREADS")) {
        unsigned cap = 0;
        const std::string_view s(env);
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
        if (ec == std::errc{} && p == s.data() + s.size() && cap > 0) n = std::min(n, cap);
    }
    return n;
}

ParamSurface build_surface(const QuoteDay& day, Pricer pricer, const SurfaceOptions& options) {
    for (Tenor tenor : kSurfaceTenors) row_for(day, tenor);
    const auto grid = surface_grid(options.grid_points, options.dt, year_fraction(Tenor::m6));

    struct Slot {
        std::optional<CalibrationResult> result;
        std::string error;
    };
    std::vector<Slot> slots(grid.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t j = next++; j < grid.size(); j = next++) {
            try {
                const auto pillars = interpolated_pillars(day, grid[j]);
                auto res = calibrate_single(pillars, pricer, std::nullopt, options.calibration);
                if (res.converged) {
                    slots[j].result = res;
                } else {
                    slots[j].error = "optimizer stopped before convergence (rmse " + std::to_string(res.rmse) + "%)";
                }
            } catch (const std::exception& e) {
                slots[j].error = e.what();
            }
        }
    };
    const unsigned n = std::min<std::size_t>(options.threads ? options.threads : worker_count(), grid.size());
    {
        std::vector<std::jthread> pool;
        for (unsigned i = 1; i < n; ++i) pool.emplace_back(work);
        work();
    }

    ParamSurface surface;
    surface.date = day.date;
    surface.pricer = pricer;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (slots[j].result) {
            surface.points.push_back({grid[j], *slots[j].result});
        } else {
            surface.failures.push_back({grid[j], slots[j].error});
        }
    }
    return surface;
}

namespace {

constexpr std::string_view kSurfaceHeader = "t,theta_sigma_low,theta_sigma_high,lambda,u,delta,me,rmse";

std::string fmt(double x) {
    std::array<char, 32> buf{};
    const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), p);
}

std::filesystem::path sidecar(const std::filesystem::path& csv) {
    auto p = csv;
    return p.replace_extension(".json");
}

}  // namespace

void write_surface(const std::filesystem::path& csv_path, const ParamSurface& surface) {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write surface file " + csv_path.string());
    out << kSurfaceHeader << '\n';
    for (const auto& p : surface.points) {
        const auto& th = p.result.theta_star;
        out << fmt(p.t) << ',' << fmt(th.sigma_low) << ',' << fmt(th.sigma_high) << ',' << fmt(th.lambda)
            << ',' << fmt(th.u) << ',' << fmt(th.delta) << ',' << fmt(p.result.me) << ','
            << fmt(p.result.rmse) << '\n';
    }

    nlohmann::json meta;
    meta["date"] = surface.date;
    meta["pricer"] = to_string(surface.pricer);
    meta["points"] = surface.points.size();
    meta["partial"] = surface.partial();
    auto& fails = meta["failures"] = nlohmann::json::array();
    for (const auto& f : surface.failures) fails.push_back({{"t", f.t}, {"message", f.message}});
    auto& per = meta["calibrations"] = nlohmann::json::array();
    for (const auto& p : surface.points) {
        per.push_back({{"t", p.t},
                       {"iterations", p.result.iterations},
                       {"start", p.result.start_index},
                       {"converged", p.result.converged},
                       {"residuals", p.result.residuals}});
    }
    std::ofstream js(sidecar(csv_path));
    if (!js) throw DataError("cannot write surface metadata " + sidecar(csv_path).string());
    js << meta.dump(2) << '\n';
}

ParamSurface read_surface(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open surface file " + csv_path.string());
    std::string line;
    if (!std::getline(in, line) || line != kSurfaceHeader) {
        throw DataError("unexpected surface header in " + csv_path.string(), 1);
    }
    ParamSurface surface;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::array<double, 8> v{};
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto [q, ec] = std::from_chars(p, end, v[i]);
            if (ec != std::errc{} || (i + 1 < v.size() ? (q == end || *q != ',') : q != end)) {
                throw DataError("malformed surface row in " + csv_path.string(), row);
            }
            p = q + 1;
        }
        SurfacePoint pt{v[0], {}};
        pt.result.theta_star = {v[1], v[2], v[3], v[4], v[5]};
        pt.result.me = v[6];
        pt.result.rmse = v[7];
        pt.result.converged = true;
        try {
            pt.result.theta_star.validate();
        } catch (const DomainError& e) {
            throw DataError(std::string("invalid parameters in surface file: ") + e.what(), row);
        }
        if (!surface.points.empty() && !(pt.t > surface.points.back().t)) {
            throw DataError("surface maturities are not increasing", row);
        }
        surface.points.push_back(pt);
    }

    std::ifstream js(sidecar(csv_path));
    if (js) {
        try {
            const auto meta = nlohmann::json::parse(js);
            surface.date = meta.value("date", "");
            surface.pricer = parse_pricer(meta.value("pricer", "martingale"));
            for (const auto& f : meta.value("failures", nlohmann::json::array())) {
                surface.failures.push_back({f.at("t").get<double>(), f.at("message").get<std::string>()});
            }
            const auto cal = meta.value("calibrations", nlohmann::json::array());
            for (std::size_t i = 0; i < cal.size() && i < surface.points.size(); ++i) {
                auto& r = surface.points[i].result;
                r.iterations = cal[i].value("iterations", 0);
                r.start_index = cal[i].value("start", 0);
                r.converged = cal[i].value("converged", true);
                r.pricer_used = surface.pricer;
                if (cal[i].contains("residuals")) r.residuals = cal[i]["residuals"].get<std::array<double, 5>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("malformed surface metadata: ") + e.what());
        }
    }
    return surface;
}

std::array<double, 5> synthetic_pillar_vols(const RsParams& theta, const MarketContext& mkt,
                                            double maturity, DeltaConvention convention) {
    theta.validate();
    const double atm_guess = rs_implied_vol(mkt, {mkt.forward(maturity), maturity}, theta);
    std::array<double, 5> vols;
    vols.fill(atm_guess);
    for (int iter = 0; iter < 200; ++iter) {
        const auto pillars = pillars_from_vols(vols, mkt, maturity, convention);
        const auto next = model_vols(pillars, theta, Pricer::martingale);
        double change = 0.0;
        for (std::size_t i = 0; i < 5; ++i) change = std::max(change, std::abs(next[i] - vols[i]));
        vols = next;
        if (change < 1e-13) return vols;
    }
    throw ConvergenceError("synthetic pillar vols did not reach a fixed point", vols[2], 1e-13);
}

QuoteRow synthetic_quote(const RsParams& theta, const std::string& date, const MarketContext& mkt,
                         Tenor tenor) {
    const auto v = synthetic_pillar_vols(theta, mkt, year_fraction(tenor), convention_for(tenor));
    QuoteRow row;
    row.date = date;
    row.spot = mkt.spot;
    row.rd = mkt.rd;
    row.rf = mkt.rf;
    row.tenor = tenor;
    row.atm = v[2];
    row.rr25 = v[3] - v[1];
    row.bf25 = (v[3] + v[1]) / 2.0 - v[2];
    row.rr10 = v[4] - v[0];
    row.bf10 = (v[4] + v[0]) / 2.0 - v[2];
    return row;
}

}  // namespace pegfx
