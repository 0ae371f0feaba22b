#include "pegfx/sabr.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <set>

#include <boost/math/distributions/lognormal.hpp>
#include <ceres/ceres.h>

#include "pegfx/errors.hpp"

namespace pegfx {

namespace {

constexpr double kAMin = 1e-6, kAMax = 2.0;
constexpr double kBMin = 0.0, kBMax = 10.0;
constexpr double kRhoMax = 0.999;

struct SmileResidual {
    double strike, vol, forward, maturity;

    template <class T>
    bool operator()(const T* const x, T* residual) const {
        bool ok = true;
        residual[0] = detail::sabr_vol_impl(strike, forward, maturity, x[0], x[1], x[2], ok) - vol;
        return ok;
    }
};

}  // namespace

void SabrParams::validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("SABR initial volatility must be positive");
    if (!(b >= 0.0) || !std::isfinite(b)) throw DomainError("SABR vol-of-vol must be non-negative");
    if (!(rho > -1.0 && rho < 1.0)) throw DomainError("SABR correlation must lie in (-1, 1)");
}

double sabr_vol(double strike, double forward, double maturity, const SabrParams& params) {
    params.validate();
    if (!(strike > 0.0) || !(forward > 0.0) || !(maturity > 0.0)) {
        throw DomainError("SABR strike, forward and maturity must be positive");
    }
    bool ok = true;
    const double v = detail::sabr_vol_impl(strike, forward, maturity, params.a, params.b, params.rho, ok);
    if (!ok || !std::isfinite(v)) throw NumericalError("SABR chi(z) outside its domain", v);
    return v;
}

SabrFit sabr_calibrate(std::span<const SmilePoint> smile, double forward, double maturity) {
    if (smile.size() != 5) throw DomainError("SABR calibration expects five smile points");
    std::set<double> distinct;
    for (const auto& p : smile) {
        if (!(p.strike > 0.0) || !(p.vol > 0.0)) throw DomainError("smile strikes and vols must be positive");
        distinct.insert(p.strike);
    }
    if (distinct.size() != smile.size()) throw DomainError("smile strikes must be distinct");
    if (!(forward > 0.0) || !(maturity > 0.0)) throw DomainError("forward and maturity must be positive");

    double atm = smile[smile.size() / 2].vol;
    const std::array<std::array<double, 3>, 6> starts{{{atm, 0.2, 0.0},
                                                       {atm, 1.0, -0.5},
                                                       {atm, 1.0, 0.5},
                                                       {atm, 3.0, 0.0},
                                                       {atm, 0.5, -0.9},
                                                       {atm, 0.5, 0.9}}};
    std::array<double, 3> best{};
    double best_cost = std::numeric_limits<double>::infinity();
    bool any_usable = false;

    for (const auto& start : starts) {
        std::array<double, 3> x = start;
        x[0] = std::clamp(x[0], kAMin, kAMax);
        ceres::Problem problem;
        for (const auto& p : smile) {
            problem.AddResidualBlock(new ceres::AutoDiffCostFunction<SmileResidual, 1, 3>(
                                         new SmileResidual{p.strike, p.vol, forward, maturity}),
                                     nullptr, x.data());
        }
        problem.SetParameterLowerBound(x.data(), 0, kAMin);
        problem.SetParameterUpperBound(x.data(), 0, kAMax);
        problem.SetParameterLowerBound(x.data(), 1, kBMin);
        problem.SetParameterUpperBound(x.data(), 1, kBMax);
        problem.SetParameterLowerBound(x.data(), 2, -kRhoMax);
        problem.SetParameterUpperBound(x.data(), 2, kRhoMax);

        ceres::Solver::Options options;
        options.linear_solver_type = ceres::DENSE_QR;
        options.max_num_iterations = 500;
        options.function_tolerance = 1e-16;
        options.gradient_tolerance = 1e-16;
        options.parameter_tolerance = 1e-14;
        options.logging_type = ceres::SILENT;
        ceres::Solver::Summary summary;
        ceres::Solve(options, &problem, &summary);
        if (!summary.IsSolutionUsable()) continue;
        any_usable = true;
        if (summary.final_cost < best_cost) {
            best_cost = summary.final_cost;
            best = x;
        }
    }
    if (!any_usable) {
        throw CalibrationError("SABR calibration did not converge from any start",
                               {best[0], best[1], best[2]}, best_cost);
    }

    SabrFit fit;
    fit.params = {best[0], best[1], best[2]};
    double ss = 0.0;
    for (const auto& p : smile) {
        const double r = sabr_vol(p.strike, forward, maturity, fit.params) - p.vol;
        fit.residuals.push_back(r);
        ss += r * r;
    }
    fit.rmse = std::sqrt(ss / static_cast<double>(smile.size()));
    return fit;
}

double sabr_vol_density(double vol, const SabrParams& params, double maturity) {
    params.validate();
    if (!(maturity > 0.0)) throw DomainError("maturity must be positive");
    if (params.b == 0.0) throw DomainError("volatility law is degenerate at zero vol-of-vol");
    if (vol <= 0.0) return 0.0;
    const double s = params.b * std::sqrt(maturity);
    const boost::math::lognormal_distribution<double> law(std::log(params.a) - s * s / 2.0, s);
    return boost::math::pdf(law, vol);
}

}  // namespace pegfx
