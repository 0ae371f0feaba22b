#include "pegfx/core_bs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "pegfx/errors.hpp"

namespace pegfx {

namespace {

void require_finite(double x, const char* name) {
    if (!std::isfinite(x)) throw DomainError(std::string("non-finite ") + name);
}

struct D12 {
    double d_plus;
    double d_minus;
};

D12 d_terms(double spot, double strike, double maturity, double rd, double rf, double total_sd) {
    const double log_fwd_moneyness = std::log(spot / strike) + (rd - rf) * maturity;
    const double d_plus = log_fwd_moneyness / total_sd + 0.5 * total_sd;
    return {d_plus, d_plus - total_sd};
}

void check_inputs(const MarketContext& mkt, const OptionSpec& opt, double sigma) {
    mkt.validate();
    opt.validate();
    require_finite(sigma, "volatility");
    if (sigma <= 0.0) throw DomainError("volatility must be positive");
}

}  // namespace

void MarketContext::validate() const {
    require_finite(spot, "spot");
    require_finite(rd, "domestic rate");
    require_finite(rf, "foreign rate");
    if (spot <= 0.0) throw DomainError("spot must be positive");
}

double MarketContext::forward(double maturity) const {
    return spot * std::exp((rd - rf) * maturity);
}

void OptionSpec::validate() const {
    require_finite(strike, "strike");
    require_finite(maturity, "maturity");
    if (strike <= 0.0) throw DomainError("strike must be positive");
    if (maturity <= 0.0) throw DomainError("maturity must be positive");
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

CallValue gk_call_total(double spot, double strike, double maturity, double rd, double rf,
                        double total_sd) {
    const auto [dp, dm] = d_terms(spot, strike, maturity, rd, rf, total_sd);
    const double df_f = std::exp(-rf * maturity);
    const double nd_plus = normal_cdf(dp);
    return {df_f * spot * nd_plus - std::exp(-rd * maturity) * strike * normal_cdf(dm),
            df_f * nd_plus};
}

double gk_call_price_total(double spot, double strike, double maturity, double rd, double rf,
                           double total_sd) {
    const auto [dp, dm] = d_terms(spot, strike, maturity, rd, rf, total_sd);
    return std::exp(-rf * maturity) * spot * normal_cdf(dp) -
           std::exp(-rd * maturity) * strike * normal_cdf(dm);
}

double bs_price(const MarketContext& mkt, const OptionSpec& opt, double sigma) {
    check_inputs(mkt, opt, sigma);
    const double sd = sigma * std::sqrt(opt.maturity);
    const auto [dp, dm] = d_terms(mkt.spot, opt.strike, opt.maturity, mkt.rd, mkt.rf, sd);
    const double df_f = std::exp(-mkt.rf * opt.maturity);
    const double df_d = std::exp(-mkt.rd * opt.maturity);
    if (opt.side == OptionSide::call) {
        return df_f * mkt.spot * normal_cdf(dp) - df_d * opt.strike * normal_cdf(dm);
    }
    return df_d * opt.strike * normal_cdf(-dm) - df_f * mkt.spot * normal_cdf(-dp);
}

double bs_delta(const MarketContext& mkt, const OptionSpec& opt, double sigma) {
    check_inputs(mkt, opt, sigma);
    const double sd = sigma * std::sqrt(opt.maturity);
    const double dp = d_terms(mkt.spot, opt.strike, opt.maturity, mkt.rd, mkt.rf, sd).d_plus;
    const double df_f = std::exp(-mkt.rf * opt.maturity);
    return opt.side == OptionSide::call ? df_f * normal_cdf(dp) : -df_f * normal_cdf(-dp);
}

double bs_vega(const MarketContext& mkt, const OptionSpec& opt, double sigma) {
    check_inputs(mkt, opt, sigma);
    const double sqrt_t = std::sqrt(opt.maturity);
    const double dp =
        d_terms(mkt.spot, opt.strike, opt.maturity, mkt.rd, mkt.rf, sigma * sqrt_t).d_plus;
    return mkt.spot * std::exp(-mkt.rf * opt.maturity) * normal_pdf(dp) * sqrt_t;
}

double implied_vol(const MarketContext& mkt, const OptionSpec& opt, double price) {
    mkt.validate();
    opt.validate();
    require_finite(price, "option price");

    const double fwd_spot = std::exp(-mkt.rf * opt.maturity) * mkt.spot;
    const double disc_strike = std::exp(-mkt.rd * opt.maturity) * opt.strike;
    const bool call = opt.side == OptionSide::call;
    const double lower = std::max(0.0, call ? fwd_spot - disc_strike : disc_strike - fwd_spot);
    const double upper = call ? fwd_spot : disc_strike;

    using Bound = ArbitrageBoundError::Bound;
    if (price <= lower) {
        throw ArbitrageBoundError(Bound::lower, price, lower,
                                  "option price at or below the no-arbitrage lower bound");
    }
    if (price >= upper) {
        throw ArbitrageBoundError(Bound::upper, price, upper,
                                  "option price at or above the no-arbitrage upper bound");
    }

    const double price_tol = 1e-10 * mkt.spot;
    auto objective = [&](double sigma) { return bs_price(mkt, opt, sigma) - price; };

    const double f_lo = objective(kMinImpliedVol);
    if (f_lo >= 0.0) {
        // Price sits between the intrinsic bound and the smallest representable
        // volatility: accept the floor when it reprices within tolerance.
        if (f_lo <= price_tol) return kMinImpliedVol;
        throw ArbitrageBoundError(Bound::lower, price, lower + f_lo,
                                  "option price below the minimum-volatility price");
    }
    const double f_hi = objective(kMaxImpliedVol);
    if (f_hi <= 0.0) {
        if (-f_hi <= price_tol) return kMaxImpliedVol;
        throw ArbitrageBoundError(Bound::upper, price, price + f_hi,
                                  "option price above the maximum-volatility price");
    }

    std::uintmax_t max_iter = 200;
    auto done = [&](double a, double b) {
        return std::abs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(a, b);
    };
    const auto [a, b] = boost::math::tools::toms748_solve(objective, kMinImpliedVol,
                                                         kMaxImpliedVol, f_lo, f_hi, done,
                                                         max_iter);
    const double fa = std::abs(objective(a));
    const double fb = std::abs(objective(b));
    const double sigma = fa <= fb ? a : b;
    const double residual = std::min(fa, fb);
    if (residual > price_tol) {
        throw ConvergenceError("implied volatility did not reach the price tolerance", sigma,
                               residual);
    }
    return sigma;
}

}  // namespace pegfx
