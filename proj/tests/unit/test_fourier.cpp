#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "pegfx/errors.hpp"
#include "pegfx/fourier.hpp"

using namespace pegfx;

namespace {

const MarketContext kHkd{7.8, 0.01, 0.015};
const OptionSpec kAtm{7.8, 0.5};
const RsParams kTheta{0.005, 0.10, 0.2, -0.01, 0.0};

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
    d.params = {0.001 + 0.019 * U(rng), 0.02 + 0.28 * U(rng), 2.0 * U(rng), -0.1 + 0.2 * U(rng),
                0.05 * U(rng)};
    return d;
}

}  // namespace

TEST_CASE("characteristic function identities") {
    CHECK(char_fn(0.0, 0.5, kTheta) == cplx(1.0, 0.0));
    CHECK(std::abs(char_fn(cplx(0.0, -1.0), 0.5, kTheta) - 1.0) <= 1e-10);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto d = random_draw(rng);
        CHECK(char_fn(0.0, d.opt.maturity, d.params) == cplx(1.0, 0.0));
        CHECK(std::abs(char_fn(cplx(0.0, -1.0), d.opt.maturity, d.params) - 1.0) <= 1e-10);
        for (double w = 0.0; w <= 200.0; w += 0.5) {
            const cplx f = char_fn(w, d.opt.maturity, d.params);
            CHECK(std::abs(f) <= 1.0 + 1e-12);
            CHECK(std::abs(char_fn(-w, d.opt.maturity, d.params) - std::conj(f)) <= 1e-14);
        }
    }
}

TEST_CASE("removable singularity of the closed form") {
    // With equal volatilities, kappa = 0 and z = -i/2 ... choose z so that the
    // denominator vanishes: a = -lambda (i z kappa + 1) = 0 needs i z kappa = -1.
    RsParams p{0.01, 0.01, 0.3, 0.02, 0.0};
    const double k = kappa(p);
    const cplx z = cplx(0.0, 1.0) / k;  // i z kappa = -1
    const cplx at = char_fn(z, 0.5, p);
    const cplx near = char_fn(z + cplx(1e-7, 0.0), 0.5, p);
    CHECK(std::abs(at - near) <= 1e-5 * std::abs(at));
}

TEST_CASE("characteristic function matches an empirical estimate") {
    const double T = 0.5;
    const RsParams p{0.005, 0.10, 0.2, -0.01, 0.02};
    const double k = kappa(p);
    const cplx z(1.0, -0.5);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> Z;
    std::exponential_distribution<double> E(p.lambda);
    const int n = 1000000;
    cplx sum = 0.0;
    double sr2 = 0.0, si2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double tau = E(rng);
        double x;
        if (tau >= T) {
            x = (-0.5 * p.sigma_low * p.sigma_low - p.lambda * k) * T + p.sigma_low * std::sqrt(T) * Z(rng);
        } else {
            x = (-0.5 * p.sigma_low * p.sigma_low - p.lambda * k) * tau + p.sigma_low * std::sqrt(tau) * Z(rng) +
                p.u + p.delta * Z(rng) - 0.5 * p.sigma_high * p.sigma_high * (T - tau) +
                p.sigma_high * std::sqrt(T - tau) * Z(rng);
        }
        const cplx v = std::exp(cplx(0.0, 1.0) * z * x);
        sum += v;
        sr2 += v.real() * v.real();
        si2 += v.imag() * v.imag();
    }
    const cplx mean = sum / double(n);
    const double se_r = std::sqrt((sr2 / n - mean.real() * mean.real()) / n);
    const double se_i = std::sqrt((si2 / n - mean.imag() * mean.imag()) / n);
    const cplx f = char_fn(z, T, p);
    CHECK(std::abs(f.real() - mean.real()) < 3 * se_r);
    CHECK(std::abs(f.imag() - mean.imag()) < 3 * se_i);
}

TEST_CASE("Fourier price reduces to Black-Scholes without switching") {
    RsParams p = kTheta;
    p.lambda = 0.0;
    for (bool cv : {true, false}) {
        FourierOptions fo;
        fo.control_variate = cv;
        for (double K : {7.6, 7.8, 8.0}) {
            CHECK(std::abs(fourier_price(kHkd, {K, 0.5}, p, fo) - bs_price(kHkd, {K, 0.5}, p.sigma_low)) <=
                  1e-8 * kHkd.spot);
        }
    }
}

TEST_CASE("Fourier and quadrature pricers agree") {
    for (bool cv : {true, false}) {
        FourierOptions fo;
        fo.control_variate = cv;
        CHECK(std::abs(fourier_price(kHkd, kAtm, kTheta, fo) - rs_price(kHkd, kAtm, kTheta)) <=
              1e-6 * kHkd.spot);
        std::mt19937_64 rng(17);
        for (int i = 0; i < 100; ++i) {
            const auto d = random_draw(rng);
            const double f = fourier_price(d.mkt, d.opt, d.params, fo);
            const double q = rs_price(d.mkt, d.opt, d.params);
            CHECK(std::abs(f - q) <= 1e-6 * d.mkt.spot);
            CHECK(f >= -1e-8 * d.mkt.spot);
            CHECK(f <= d.mkt.spot * std::exp(-d.mkt.rf * d.opt.maturity) *
                           std::max(std::exp(-d.params.lambda * kappa(d.params) * d.opt.maturity),
                                    1.0 + kappa(d.params)));
        }
    }
}

TEST_CASE("multi-strike pricing matches single-strike pricing") {
    const std::vector<double> strikes{7.7, 7.75, 7.8, 7.85, 7.9};
    const auto v = fourier_prices(kHkd, 0.5, strikes, kTheta);
    for (std::size_t j = 0; j < strikes.size(); ++j) {
        CHECK(std::abs(v[j] - fourier_price(kHkd, {strikes[j], 0.5}, kTheta)) <= 1e-9 * kHkd.spot);
    }
}

TEST_CASE("Simpson-weighted FFT at N 4096 and eta 0.25") {
    const auto grid = fft_price_grid(kHkd, 0.5, kTheta, 4096, 0.25, 7.8);
    CHECK_FALSE(grid.warning.has_value());
    REQUIRE(grid.points.size() == 4096);
    // The grid point nearest at-the-money.
    std::size_t m = 0;
    const double k_atm = (kHkd.rd - kHkd.rf) * 0.5;
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        if (std::abs(grid.points[i].k - k_atm) < std::abs(grid.points[m].k - k_atm)) m = i;
    }
    const auto& pt = grid.points[m];
    CHECK(std::abs(pt.price - fourier_price(kHkd, {pt.strike, 0.5}, kTheta)) <= 1e-4 * kHkd.spot);

    RsParams bs = kTheta;
    bs.lambda = 0.0;
    const auto flat = fft_price_grid(kHkd, 0.5, bs, 4096, 0.25);
    for (const auto& q : flat.points) {
        if (std::abs(q.k) > 0.2) continue;
        CHECK(std::abs(q.price - bs_price(kHkd, {q.strike, 0.5}, bs.sigma_low)) <= 1e-4 * kHkd.spot);
    }
}

TEST_CASE("FFT grid") {
    RsParams bs = kTheta;
    bs.lambda = 0.0;
    // Trapezoid weights on the N 4096, eta 0.25 grid.
    const auto trap = fft_price_grid(kHkd, 0.5, bs, 4096, 0.25, {}, FftWeights::trapezoid);
    for (const auto& q : trap.points) {
        if (std::abs(q.k) > 0.2) continue;
        CHECK(std::abs(q.price - bs_price(kHkd, {q.strike, 0.5}, bs.sigma_low)) <= 1e-4 * kHkd.spot);
    }
    // Simpson weights at half the frequency spacing.
    const auto fine = fft_price_grid(kHkd, 0.5, bs, 8192, 0.125);
    for (const auto& q : fine.points) {
        if (std::abs(q.k) > 0.2) continue;
        CHECK(std::abs(q.price - bs_price(kHkd, {q.strike, 0.5}, bs.sigma_low)) <= 1e-4 * kHkd.spot);
    }

    // N = 64, eta = 4 gives b = pi / 4, short of |ln(7.8 / 20)|.
    CHECK(fft_price_grid(kHkd, 0.5, kTheta, 64, 4.0, 20.0).warning.has_value());
    CHECK_FALSE(fft_price_grid(kHkd, 0.5, kTheta, 64, 4.0, 7.9).warning.has_value());
    CHECK_THROWS_AS(fft_price_grid(kHkd, 0.5, kTheta, 1000, 0.25), DomainError);
}

TEST_CASE("FFT refinement at fixed truncation reduces the grid error") {
    // Doubling N while halving eta keeps U = N eta and the log-moneyness
    // spacing fixed, so grid points coincide and only the frequency step shrinks.
    const RsParams p{0.02, 0.10, 0.5, 0.03, 0.0};
    double prev = 1e300;
    for (std::size_t n : {4096u, 8192u, 16384u, 32768u}) {
        const double eta = 4096.0 / static_cast<double>(n);
        const auto grid = fft_price_grid(kHkd, 0.5, p, n, eta);
        double worst = 0.0;
        for (const auto& q : grid.points) {
            if (std::abs(q.k) > 0.05) continue;
            worst = std::max(worst, std::abs(q.price - rs_price(kHkd, {q.strike, 0.5}, p)));
        }
        CHECK(worst < prev);
        prev = worst;
    }
    CHECK(prev < 1e-4 * kHkd.spot);
}
