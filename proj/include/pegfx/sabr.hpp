#pragma once

// Lognormal (beta = 1) SABR implied volatility and its least-squares fit to a
// five-point smile.

#include <cmath>
#include <span>
#include <vector>

namespace pegfx {

struct SabrParams {
    double a = 0.0;    // initial volatility
    double b = 0.0;    // volatility of volatility
    double rho = 0.0;  // spot/vol correlation

    void validate() const;
};

inline constexpr double kSabrSeriesCutoff = 1e-7;

namespace detail {

// Shared by the scalar evaluation and the automatic-differentiation residuals.
// `ok` is cleared when the log argument of chi(z) is not positive.
template <class T>
T sabr_vol_impl(double strike, double forward, double maturity, const T& a, const T& b,
                const T& rho, bool& ok) {
    using std::log;
    using std::sqrt;
    ok = true;
    const T z = b / a * std::log(forward / strike);
    const T correction = 1.0 + (rho * b * a / 4.0 + (2.0 - 3.0 * rho * rho) * b * b / 24.0) * maturity;
    using std::abs;
    if (abs(z) < kSabrSeriesCutoff) return a * correction;
    const T arg = (sqrt(1.0 - 2.0 * rho * z + z * z) + z - rho) / (1.0 - rho);
    if (!(arg > 0.0)) {
        ok = false;
        return a * correction;
    }
    return a * (z / log(arg)) * correction;
}

}  // namespace detail

// Throws NumericalError when chi(z) leaves its domain.
double sabr_vol(double strike, double forward, double maturity, const SabrParams& params);

struct SmilePoint {
    double strike;
    double vol;
};

struct SabrFit {
    SabrParams params;
    double rmse;  // root mean square vol residual
    std::vector<double> residuals;
};

// Least-squares fit over the box a in [1e-6, 2], b in [0, 10],
// rho in [-0.999, 0.999]. Throws CalibrationError when no start converges.
SabrFit sabr_calibrate(std::span<const SmilePoint> smile, double forward, double maturity);

// Lognormal density with log-mean ln a - b^2 T / 2 and log-variance b^2 T,
// the law of the SABR volatility at T.
double sabr_vol_density(double vol, const SabrParams& params, double maturity);

}  // namespace pegfx
