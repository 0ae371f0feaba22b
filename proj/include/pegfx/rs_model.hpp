#pragma once

// Regime-switching jump diffusion with a single jump that triggers the switch
// from the low-volatility (pegged) regime to the high-volatility one.
//
// Exact call price and delta are mixtures of Garman-Kohlhagen values over the
// switch time; the first-order approximation replaces the mixture integral by
// its value at the start of the option's life.

#include <span>
#include <vector>

#include "pegfx/core_bs.hpp"
#include "pegfx/quadrature.hpp"

namespace pegfx {

struct RsParams {
    double sigma_low = 0.0;   // pre-switch volatility
    double sigma_high = 0.0;  // post-switch volatility
    double lambda = 0.0;      // switch (jump) intensity per year
    double u = 0.0;           // mean log jump size
    double delta = 0.0;       // log jump standard deviation

    void validate() const;
    friend bool operator==(const RsParams&, const RsParams&) = default;
};

// Expected relative jump size e^{u + delta^2/2} - 1.
double kappa(const RsParams& params);

struct RsDerived {
    double kappa;
    double p;  // probability of no switch before maturity, e^{-lambda T}
};

RsDerived derive(const RsParams& params, double maturity);

struct PriceDelta {
    double price;
    double delta;
};

// Options must be calls. Maturities at or below kDegenerateMaturity return
// the intrinsic value.
inline constexpr double kDegenerateMaturity = 1e-8;

double rs_price(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params,
                const QuadratureOptions& quad = {});
double rs_delta(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params,
                const QuadratureOptions& quad = {});
// Price and delta from a single two-component quadrature.
PriceDelta rs_price_delta(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params,
                          const QuadratureOptions& quad = {});

double rs_implied_vol(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params);

double approx_price(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params);
double approx_delta(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params);
PriceDelta approx_price_delta(const MarketContext& mkt, const OptionSpec& opt,
                              const RsParams& params);

// Upper bound on |exact - approx| / spot.
double approx_error_bound(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params);
// The same bound without the subtracted p|e^{-lambda kappa T} - 1| term.
double approx_error_bound_weak(const MarketContext& mkt, const OptionSpec& opt,
                               const RsParams& params);

struct ApproxGridPoint {
    double spot;
    double exact_price;
    double approx_price;
    double exact_delta;
    double approx_delta;
    double price_rel_error_pct;  // (approx - exact) / spot * 100
    double delta_rel_error_pct;  // (approx - exact) / spot * 100
    double spot_adjusted_error;  // |exact - approx| / spot
    double bound;
    double weak_bound;
    bool within_bound;
    bool within_weak_bound;
};

// Evaluates exact and approximate pricers over a spot ladder.
std::vector<ApproxGridPoint> approx_error_grid(const MarketContext& mkt, const OptionSpec& opt,
                                               const RsParams& params,
                                               std::span<const double> spots);

}  // namespace pegfx
