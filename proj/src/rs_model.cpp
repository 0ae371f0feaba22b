#include "pegfx/rs_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pegfx/errors.hpp"

namespace pegfx {

namespace {

constexpr double kMaxDriftExponent = 50.0;

void check_call(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params) {
    mkt.validate();
    opt.validate();
    params.validate();
    if (opt.side != OptionSide::call) throw DomainError("regime-switching pricers are call-only");
    const double drift = params.lambda * kappa(params) * opt.maturity;
    if (std::abs(drift) > kMaxDriftExponent) {
        throw DomainError("|lambda * kappa * T| exceeds the overflow guard of 50");
    }
}

PriceDelta intrinsic(const MarketContext& mkt, const OptionSpec& opt) {
    return {std::max(mkt.spot - opt.strike, 0.0), mkt.spot > opt.strike ? 1.0 : 0.0};
}

PriceDelta bs_pair(const MarketContext& mkt, const OptionSpec& opt, double sigma) {
    return {bs_price(mkt, opt, sigma), bs_delta(mkt, opt, sigma)};
}

// Shared ingredients of the exact mixture. After a switch at time t the spot
// carries the compensator drift accrued over [0, t] and the mean jump factor;
// the log variance is sigma_low^2 t + sigma_high^2 (T - t) + delta^2.
struct Mixture {
    double spot, strike, maturity, rd, rf;
    double sl2, sh2, d2, lambda, kappa;

    Mixture(const MarketContext& mkt, const OptionSpec& opt, const RsParams& p)
        : spot(mkt.spot), strike(opt.strike), maturity(opt.maturity), rd(mkt.rd), rf(mkt.rf),
          sl2(p.sigma_low * p.sigma_low), sh2(p.sigma_high * p.sigma_high), d2(p.delta * p.delta),
          lambda(p.lambda), kappa(pegfx::kappa(p)) {}

    double switched_spot(double t) const { return spot * std::exp(-lambda * kappa * t) * (1.0 + kappa); }
    double switched_sd(double t) const { return std::sqrt(sl2 * t + sh2 * (maturity - t) + d2); }

    CallValue no_switch() const {
        return gk_call_total(spot * std::exp(-lambda * kappa * maturity), strike, maturity, rd, rf,
                             std::sqrt(sl2 * maturity));
    }
};

QuadratureResult integrate_checked(auto&& integrand, std::size_t dim, double maturity,
                                   const QuadratureOptions& quad) {
    auto res = integrate_adaptive(integrand, dim, 0.0, maturity, quad);
    if (!res.converged) {
        const auto worst = std::max_element(res.error.begin(), res.error.end()) - res.error.begin();
        throw NumericalError("switch-time quadrature did not converge", res.value[worst],
                             res.error[worst]);
    }
    return res;
}

}  // namespace

void RsParams::validate() const {
    for (double x : {sigma_low, sigma_high, lambda, u, delta}) {
        if (!std::isfinite(x)) throw DomainError("non-finite regime-switching parameter");
    }
    if (sigma_low <= 0.0) throw DomainError("sigma_low must be positive");
    if (sigma_high < sigma_low) throw DomainError("sigma_high must be at least sigma_low");
    if (lambda < 0.0) throw DomainError("lambda must be non-negative");
    if (delta < 0.0) throw DomainError("jump size deviation must be non-negative");
    if (u <= -10.0) throw DomainError("mean log jump must exceed -10");
}

double kappa(const RsParams& params) {
    return std::expm1(params.u + 0.5 * params.delta * params.delta);
}

RsDerived derive(const RsParams& params, double maturity) {
    return {kappa(params), std::exp(-params.lambda * maturity)};
}

double rs_price(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params,
                const QuadratureOptions& quad) {
    check_call(mkt, opt, params);
    if (opt.maturity <= kDegenerateMaturity) return intrinsic(mkt, opt).price;
    if (params.lambda == 0.0) return bs_price(mkt, opt, params.sigma_low);
    const Mixture m(mkt, opt, params);
    const double head = m.no_switch().price * std::exp(-m.lambda * m.maturity);

    auto integrand = [&](double t, std::span<double> out) {
        out[0] = gk_call_price_total(m.switched_spot(t), m.strike, m.maturity, m.rd, m.rf,
                                     m.switched_sd(t)) *
                 m.lambda * std::exp(-m.lambda * t);
    };
    return head + integrate_checked(integrand, 1, m.maturity, quad).value[0];
}

double rs_delta(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params,
                const QuadratureOptions& quad) {
    check_call(mkt, opt, params);
    if (opt.maturity <= kDegenerateMaturity) return intrinsic(mkt, opt).delta;
    if (params.lambda == 0.0) return bs_delta(mkt, opt, params.sigma_low);
    const Mixture m(mkt, opt, params);
    const double growth = 1.0 + m.kappa;
    const double head = m.no_switch().delta * std::exp(-m.lambda * m.maturity * growth);

    auto integrand = [&](double t, std::span<double> out) {
        out[0] = gk_call_total(m.switched_spot(t), m.strike, m.maturity, m.rd, m.rf,
                               m.switched_sd(t))
                     .delta *
                 m.lambda * std::exp(-m.lambda * t * growth) * growth;
    };
    return head + integrate_checked(integrand, 1, m.maturity, quad).value[0];
}

PriceDelta rs_price_delta(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params,
                          const QuadratureOptions& quad) {
    check_call(mkt, opt, params);
    if (opt.maturity <= kDegenerateMaturity) return intrinsic(mkt, opt);
    if (params.lambda == 0.0) return bs_pair(mkt, opt, params.sigma_low);
    const Mixture m(mkt, opt, params);
    const double growth = 1.0 + m.kappa;
    const CallValue ns = m.no_switch();
    PriceDelta out{ns.price * std::exp(-m.lambda * m.maturity),
                   ns.delta * std::exp(-m.lambda * m.maturity * growth)};

    auto integrand = [&](double t, std::span<double> v) {
        const CallValue c = gk_call_total(m.switched_spot(t), m.strike, m.maturity, m.rd, m.rf,
                                          m.switched_sd(t));
        const double density = m.lambda * std::exp(-m.lambda * t);
        v[0] = c.price * density;
        v[1] = c.delta * density * std::exp(-m.lambda * m.kappa * t) * growth;
    };
    const auto res = integrate_checked(integrand, 2, m.maturity, quad);
    out.price += res.value[0];
    out.delta += res.value[1];
    return out;
}

double rs_implied_vol(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params) {
    check_call(mkt, opt, params);
    const bool degenerate = params.lambda == 0.0 ||
                            (params.sigma_low == params.sigma_high && params.u == 0.0 &&
                             params.delta == 0.0);
    if (degenerate) return params.sigma_low;
    return implied_vol(mkt, opt, rs_price(mkt, opt, params));
}

PriceDelta approx_price_delta(const MarketContext& mkt, const OptionSpec& opt,
                              const RsParams& params) {
    check_call(mkt, opt, params);
    if (opt.maturity <= kDegenerateMaturity) return intrinsic(mkt, opt);
    if (params.lambda == 0.0) return bs_pair(mkt, opt, params.sigma_low);
    const Mixture m(mkt, opt, params);
    const double p = std::exp(-m.lambda * m.maturity);
    const double drift = std::exp(-m.lambda * m.kappa * m.maturity);
    const CallValue low = m.no_switch();
    const CallValue high = gk_call_total(m.spot * (1.0 + m.kappa), m.strike, m.maturity, m.rd,
                                         m.rf, m.switched_sd(0.0));
    return {p * low.price + (1.0 - p) * high.price,
            p * drift * low.delta + (1.0 - p) * (1.0 + m.kappa) * high.delta};
}

double approx_price(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params) {
    return approx_price_delta(mkt, opt, params).price;
}

double approx_delta(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params) {
    return approx_price_delta(mkt, opt, params).delta;
}

double approx_error_bound_weak(const MarketContext& mkt, const OptionSpec& opt,
                               const RsParams& params) {
    check_call(mkt, opt, params);
    const auto [k, p] = derive(params, opt.maturity);
    const double vol_term = std::sqrt(opt.maturity / (2.0 * std::numbers::pi)) *
                            (params.sigma_high - params.sigma_low);
    return (1.0 - p) * vol_term + std::abs(k) * (1.0 - p);
}

double approx_error_bound(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params) {
    const double weak = approx_error_bound_weak(mkt, opt, params);
    const auto [k, p] = derive(params, opt.maturity);
    return weak - p * std::abs(std::expm1(-params.lambda * k * opt.maturity));
}

std::vector<ApproxGridPoint> approx_error_grid(const MarketContext& mkt, const OptionSpec& opt,
                                               const RsParams& params,
                                               std::span<const double> spots) {
    std::vector<ApproxGridPoint> rows;
    rows.reserve(spots.size());
    for (double s : spots) {
        MarketContext at = mkt;
        at.spot = s;
        const PriceDelta exact = rs_price_delta(at, opt, params);
        const PriceDelta approx = approx_price_delta(at, opt, params);
        ApproxGridPoint row{};
        row.spot = s;
        row.exact_price = exact.price;
        row.approx_price = approx.price;
        row.exact_delta = exact.delta;
        row.approx_delta = approx.delta;
        row.price_rel_error_pct = (approx.price - exact.price) / s * 100.0;
        row.delta_rel_error_pct = (approx.delta - exact.delta) / s * 100.0;
        row.spot_adjusted_error = std::abs(exact.price - approx.price) / s;
        row.bound = approx_error_bound(at, opt, params);
        row.weak_bound = approx_error_bound_weak(at, opt, params);
        row.within_bound = row.spot_adjusted_error <= row.bound;
        row.within_weak_bound = row.spot_adjusted_error <= row.weak_bound;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace pegfx
