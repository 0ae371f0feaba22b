#pragma once

// Garman-Kohlhagen kernel for FX vanillas: price, pips spot delta, vega and
// implied volatility.

namespace pegfx {

enum class OptionSide { call, put };

// Spot is quoted in domestic units per one unit of foreign currency; both
// rates are continuously compounded per year.
struct MarketContext {
    double spot = 0.0;
    double rd = 0.0;
    double rf = 0.0;

    void validate() const;
    double forward(double maturity) const;
};

struct OptionSpec {
    double strike = 0.0;
    double maturity = 0.0;  // year fraction
    OptionSide side = OptionSide::call;

    void validate() const;
};

double normal_cdf(double x);
double normal_pdf(double x);

double bs_price(const MarketContext& mkt, const OptionSpec& opt, double sigma);
double bs_delta(const MarketContext& mkt, const OptionSpec& opt, double sigma);
double bs_vega(const MarketContext& mkt, const OptionSpec& opt, double sigma);

// Bracketed root search on [kMinImpliedVol, kMaxImpliedVol]. Throws
// ArbitrageBoundError when `price` is outside the no-arbitrage interval, or
// when it lies below the price at kMinImpliedVol by more than 1e-10 * spot.
double implied_vol(const MarketContext& mkt, const OptionSpec& opt, double price);

inline constexpr double kMinImpliedVol = 1e-8;
inline constexpr double kMaxImpliedVol = 5.0;

// Call price and pips spot delta with the volatility given as a total standard
// deviation sqrt(variance over the option life). Used by the mixture pricers,
// where the variance is not sigma^2 * T. No argument validation.
struct CallValue {
    double price;
    double delta;
};

CallValue gk_call_total(double spot, double strike, double maturity, double rd, double rf,
                        double total_sd);
double gk_call_price_total(double spot, double strike, double maturity, double rd, double rf,
                           double total_sd);

}  // namespace pegfx
