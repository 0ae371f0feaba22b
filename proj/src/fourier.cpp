#include "pegfx/fourier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "pegfx/errors.hpp"
#include "pegfx/quadrature.hpp"

namespace pegfx {

namespace {

constexpr cplx I{0.0, 1.0};
constexpr double kMaxTruncation = 1e9;

// The characteristic function splits into the no-switch part e^{-lambda T} phi_0
// and the part contributed by a switch at some t in [0, T].
struct CfParts {
    cplx no_switch;
    cplx switched;
};

class CharFn {
public:
    CharFn(double maturity, const RsParams& p)
        : T_(maturity), sl2_(p.sigma_low * p.sigma_low), sh2_(p.sigma_high * p.sigma_high),
          lambda_(p.lambda), kappa_(kappa(p)), u_(p.u), d2_(p.delta * p.delta),
          survival_(std::exp(-p.lambda * maturity)) {}

    CfParts operator()(cplx z) const {
        const cplx iz = I * z;
        const cplx quad = iz + z * z;
        const cplx e0 = -quad * sl2_ * T_ / 2.0 - iz * lambda_ * kappa_ * T_;
        const cplx head = survival_ * std::exp(e0);
        if (lambda_ == 0.0) return {head, 0.0};

        const cplx e1 = -quad * sh2_ * T_ / 2.0;
        const cplx ej = iz * u_ - z * z * d2_ / 2.0;
        const cplx a = quad * (sh2_ - sl2_) / 2.0 - lambda_ * (iz * kappa_ + 1.0);
        if (std::abs(a) >= kCharFnSingularTol) {
            // jump * (head - phi1) with the jump factor folded into both exponents.
            const cplx diff = survival_ * std::exp(e0 + ej) - std::exp(e1 + ej);
            return {head, lambda_ * diff / a};
        }
        const cplx jump = std::exp(ej);
        const cplx phi1 = std::exp(e1);

        // Removable singularity: integrate e^{a t} over [0, T] directly.
        auto integrand = [a](double t, std::span<double> out) {
            const cplx v = std::exp(a * t);
            out[0] = v.real();
            out[1] = v.imag();
        };
        const auto res = integrate_adaptive(integrand, 2, 0.0, T_, {1e-14, 1000});
        if (!res.converged) {
            throw NumericalError("characteristic function fallback quadrature did not converge",
                                 res.value[0], std::max(res.error[0], res.error[1]));
        }
        return {head, lambda_ * jump * phi1 * cplx(res.value[0], res.value[1])};
    }

    cplx full(cplx z) const {
        if (z == cplx(0.0, 0.0)) return 1.0;
        const auto parts = (*this)(z);
        return parts.no_switch + parts.switched;
    }

    // Upper bound on |part(w - i/2)| for real w, used for truncation.
    double envelope(double w, bool include_head) const {
        const double q = w * w + 0.25;
        const double a0 = survival_ * std::exp(-q * sl2_ * T_ / 2.0 - lambda_ * kappa_ * T_ / 2.0);
        double env = include_head ? a0 : 0.0;
        if (lambda_ > 0.0) {
            const double a1 = std::exp(-q * sh2_ * T_ / 2.0);
            const double b = std::exp(u_ / 2.0 - (w * w - 0.25) * d2_ / 2.0);
            const double re_a = q * (sh2_ - sl2_) / 2.0 - lambda_ * (kappa_ / 2.0 + 1.0);
            const double im_a = lambda_ * kappa_ * w;
            const double mod_a = std::max({std::abs(re_a), std::abs(im_a), kCharFnSingularTol});
            env += lambda_ * b * (a0 + a1) / mod_a;
        }
        return env;
    }

private:
    double T_, sl2_, sh2_, lambda_, kappa_, u_, d2_, survival_;
};

void check_maturity(double maturity) {
    if (!std::isfinite(maturity) || maturity <= 0.0) throw DomainError("maturity must be positive");
}

double truncation_point(const CharFn& cf, bool include_head, double tol) {
    double U = 32.0;
    while (cf.envelope(U, include_head) / (U * U + 0.25) * U > tol) {
        U *= 2.0;
        if (U > kMaxTruncation) {
            const double tail = cf.envelope(U, include_head) / U;
            throw NumericalError("Fourier integrand does not decay within the truncation cap", tail,
                                 tail);
        }
    }
    return U;
}

}  // namespace

cplx char_fn(cplx z, double maturity, const RsParams& params) {
    check_maturity(maturity);
    params.validate();
    return CharFn(maturity, params).full(z);
}

std::vector<double> fourier_prices(const MarketContext& mkt, double maturity,
                                   std::span<const double> strikes, const RsParams& params,
                                   const FourierOptions& fo) {
    mkt.validate();
    check_maturity(maturity);
    params.validate();
    for (double K : strikes) OptionSpec{K, maturity}.validate();
    const double drift = params.lambda * kappa(params) * maturity;
    if (std::abs(drift) > 50.0) throw DomainError("|lambda * kappa * T| exceeds the overflow guard of 50");

    const std::size_t n = strikes.size();
    std::vector<double> prices(n);
    if (n == 0) return prices;

    const CharFn cf(maturity, params);
    const bool cv = fo.control_variate;
    const double fwd_spot = mkt.spot * std::exp(-mkt.rf * maturity);
    const double survival = std::exp(-params.lambda * maturity);

    std::vector<double> k(n), scale(n);
    for (std::size_t j = 0; j < n; ++j) {
        k[j] = std::log(mkt.spot / strikes[j]) + (mkt.rd - mkt.rf) * maturity;
        // Integrand component j is expressed in units of spot.
        scale[j] = std::sqrt(mkt.spot * strikes[j]) * std::exp(-(mkt.rd + mkt.rf) * maturity / 2.0) /
                   (std::numbers::pi * mkt.spot);
    }

    for (std::size_t j = 0; j < n; ++j) {
        prices[j] = fwd_spot;
        if (cv) {
            const OptionSpec opt{strikes[j], maturity};
            const MarketContext drifted{mkt.spot * std::exp(-drift), mkt.rd, mkt.rf};
            // The switch component carries the residue S0 e^{-rf T} (1 - p e^{-lambda kappa T}).
            prices[j] = survival * bs_price(drifted, opt, params.sigma_low) +
                        (1.0 - survival * std::exp(-drift)) * fwd_spot;
        }
    }
    if (cv && params.lambda == 0.0) return prices;

    const double U = truncation_point(cf, !cv, fo.envelope_tol);
    std::vector<double> breaks{0.0};
    for (double b = 1.0; b < U; b *= 2.0) breaks.push_back(b);
    breaks.push_back(U);

    auto integrand = [&](double w, std::span<double> out) {
        const auto parts = cf(cplx(w, -0.5));
        const cplx psi = cv ? parts.switched : parts.no_switch + parts.switched;
        const double denom = w * w + 0.25;
        for (std::size_t j = 0; j < n; ++j) {
            const double c = std::cos(w * k[j]);
            const double s = std::sin(w * k[j]);
            out[j] = scale[j] * (c * psi.real() - s * psi.imag()) / denom;
        }
    };
    const auto res = integrate_adaptive(integrand, n, std::span<const double>(breaks),
                                        {fo.price_tol, fo.max_subdivisions});
    if (!res.converged) {
        const auto worst = std::max_element(res.error.begin(), res.error.end()) - res.error.begin();
        throw NumericalError("Fourier price integral did not converge", res.value[worst] * mkt.spot,
                             res.error[worst] * mkt.spot);
    }
    for (std::size_t j = 0; j < n; ++j) prices[j] -= mkt.spot * res.value[j];
    return prices;
}

double fourier_price(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params,
                     const FourierOptions& fo) {
    opt.validate();
    if (opt.side != OptionSide::call) throw DomainError("regime-switching pricers are call-only");
    const std::array<double, 1> strike{opt.strike};
    return fourier_prices(mkt, opt.maturity, strike, params, fo)[0];
}

namespace {

std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

FftGrid fft_price_grid(const MarketContext& mkt, double maturity, const RsParams& params,
                       std::size_t n, double eta, std::optional<double> target_strike,
                       FftWeights weights) {
    mkt.validate();
    check_maturity(maturity);
    params.validate();
    if (n < 2 || (n & (n - 1)) != 0) throw DomainError("FFT grid size must be a power of two");
    if (!std::isfinite(eta) || eta <= 0.0) throw DomainError("FFT frequency spacing must be positive");

    const CharFn cf(maturity, params);
    FftGrid grid;
    grid.eta = eta;
    grid.epsilon = 2.0 * std::numbers::pi / (static_cast<double>(n) * eta);
    grid.b = static_cast<double>(n) * grid.epsilon / 2.0;

    fftw_complex* buf = fftw_alloc_complex(n);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_plan_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }

    for (std::size_t j = 0; j < n; ++j) {
        const double u = eta * static_cast<double>(j);
        // Simpson weights (eta/3)(3 + (-1)^j - delta_{j-1}) with j counted from 1.
        double weight = eta / 3.0 * (j % 2 == 0 ? 2.0 : 4.0);
        if (j == 0) weight = eta / 3.0;
        if (weights == FftWeights::trapezoid) weight = j == 0 ? eta / 2.0 : eta;
        const cplx psi = std::conj(cf.full(cplx(u, -0.5))) / (u * u + 0.25);
        const cplx x = std::exp(I * (grid.b * u)) * psi * weight;
        buf[j][0] = x.real();
        buf[j][1] = x.imag();
    }
    fftw_execute(plan);

    const double fwd_spot = mkt.spot * std::exp(-mkt.rf * maturity);
    const double carry = (mkt.rd - mkt.rf) * maturity;
    grid.points.reserve(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double k = -grid.b + grid.epsilon * static_cast<double>(m);
        const double K = mkt.spot * std::exp(carry - k);
        const double pref = std::sqrt(mkt.spot * K) * std::exp(-(mkt.rd + mkt.rf) * maturity / 2.0);
        grid.points.push_back({k, K, fwd_spot - pref / std::numbers::pi * buf[m][0]});
    }

    {
        std::lock_guard lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);

    if (target_strike) {
        const double kt = std::log(mkt.spot / *target_strike) + carry;
        if (kt < -grid.b || kt >= grid.b) {
            grid.warning = "target log-moneyness " + std::to_string(kt) +
                           " lies outside the FFT grid half-width " + std::to_string(grid.b);
        }
    }
    return grid;
}

}  // namespace pegfx
