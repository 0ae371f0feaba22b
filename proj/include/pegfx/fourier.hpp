#pragma once

// Fourier pricing of regime-switching calls. The log-return
// X(T) = ln(S_T / S_0) - (rd - rf) T has a closed-form characteristic
// function; calls are priced with the Lewis contour integral at Im z = -1/2
// or on an FFT log-moneyness grid with Simpson weights.

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pegfx/core_bs.hpp"
#include "pegfx/rs_model.hpp"

namespace pegfx {

using cplx = std::complex<double>;

// Below this magnitude of the closed form's denominator the switch-time
// integral is evaluated by quadrature instead.
inline constexpr double kCharFnSingularTol = 1e-12;

cplx char_fn(cplx z, double maturity, const RsParams& params);

struct FourierOptions {
    // Absolute price accuracy in units of spot.
    double price_tol = 1e-8;
    // Truncation: integrate up to U where envelope(U) * U drops below this.
    double envelope_tol = 1e-14;
    std::size_t max_subdivisions = 20000;
    // Price the no-switch component of the characteristic function in closed
    // form and integrate only the switch component. The no-switch integrand
    // decays like 1/w^2 when sigma_low^2 T is small; the switch component
    // decays like 1/w^4.
    bool control_variate = true;
};

double fourier_price(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params,
                     const FourierOptions& fo = {});

// Calls at several strikes of one maturity, sharing the characteristic
// function evaluations.
std::vector<double> fourier_prices(const MarketContext& mkt, double maturity,
                                   std::span<const double> strikes, const RsParams& params,
                                   const FourierOptions& fo = {});

struct FftPoint {
    double k;  // log-moneyness ln(S0/K) + (rd - rf) T
    double strike;
    double price;
};

struct FftGrid {
    std::vector<FftPoint> points;
    double eta;
    double epsilon;  // log-moneyness spacing 2 pi / (N eta)
    double b;        // grid half-width N epsilon / 2
    std::optional<std::string> warning;
};

enum class FftWeights { simpson, trapezoid };

// N = `n` must be a power of two. When `target_strike` is set and its
// log-moneyness falls outside [-b, b) the grid carries a coverage warning.
FftGrid fft_price_grid(const MarketContext& mkt, double maturity, const RsParams& params,
                       std::size_t n, double eta, std::optional<double> target_strike = {},
                       FftWeights weights = FftWeights::simpson);

}  // namespace pegfx
