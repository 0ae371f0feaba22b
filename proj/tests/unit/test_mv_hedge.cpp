#include <cmath>

#include "doctest.h"
#include "pegfx/errors.hpp"
#include "pegfx/fourier.hpp"
#include "pegfx/mv_hedge.hpp"

using namespace pegfx;

namespace {

const MarketContext kHkd{7.8, 0.01, 0.015};
const OptionSpec kAtm{7.8, 0.5};
const RsParams kTheta{0.005, 0.10, 0.2, -0.01, 0.0};

}  // namespace

TEST_CASE("value function branches") {
    CHECK(value_fn({1, 0.0, 7.8}, kHkd, kAtm, kTheta) == bs_price(kHkd, kAtm, kTheta.sigma_high));
    CHECK(value_fn({0, 0.0, 7.8}, kHkd, kAtm, kTheta) == rs_price(kHkd, kAtm, kTheta));
    RsParams p = kTheta;
    p.lambda = 0.0;
    const MarketContext moved{7.83, kHkd.rd, kHkd.rf};
    CHECK(value_fn({0, 0.2, 7.83}, kHkd, kAtm, p) == bs_price(moved, {7.8, 0.3}, p.sigma_low));
    CHECK_THROWS_AS(value_fn({0, 0.5, 7.8}, kHkd, kAtm, kTheta), DomainError);
    CHECK_THROWS_AS(value_fn({2, 0.1, 7.8}, kHkd, kAtm, kTheta), DomainError);
}

TEST_CASE("post-switch ratio is the discounted Black-Scholes delta") {
    for (double t : {0.0, 0.1, 0.3, 0.49}) {
        const auto h = mv_ratio({1, t, 7.81}, kHkd, kAtm, kTheta);
        const double bs = bs_delta({7.81, kHkd.rd, kHkd.rf}, {7.8, 0.5 - t}, kTheta.sigma_high);
        CHECK(std::abs(h.pi - std::exp(-(kHkd.rd - kHkd.rf) * t) * bs) <= 1e-10);
        CHECK(std::abs(h.undiscounted(kHkd, t) - bs) <= 1e-10);
    }
}

TEST_CASE("without switching the ratio is the value function delta") {
    RsParams p = kTheta;
    p.lambda = 0.0;
    const auto h = mv_ratio({0, 0.1, 7.79}, kHkd, kAtm, p);
    const double d = bs_delta({7.79, kHkd.rd, kHkd.rf}, {7.8, 0.4}, p.sigma_low);
    CHECK(h.pi == std::exp(-(kHkd.rd - kHkd.rf) * 0.1) * d);
}

TEST_CASE("small intensity approaches the value function delta") {
    for (double lam : {1e-6, 1e-4}) {
        RsParams p = kTheta;
        p.lambda = lam;
        const double ratio = mv_ratio({0, 0.0, 7.8}, kHkd, kAtm, p).pi;
        const double delta = rs_delta(kHkd, kAtm, p);
        CHECK(std::abs(ratio - delta) <= 1e-6);
    }
}

TEST_CASE("small intensity deviation is first order in lambda") {
    // ratio - delta = lambda ((e^u - 1)(C1 - C0) / S - kappa^2 delta) / sigma_low^2 + O(lambda^2).
    double dev[2];
    int i = 0;
    for (double lam : {1e-6, 1e-4}) {
        RsParams p = kTheta;
        p.lambda = lam;
        dev[i++] = mv_ratio({0, 0.0, 7.8}, kHkd, kAtm, p).pi - rs_delta(kHkd, kAtm, p);
    }
    const double c1 = bs_price({7.8 * std::exp(-0.01), kHkd.rd, kHkd.rf}, kAtm, 0.10);
    const double c0 = bs_price(kHkd, kAtm, 0.005);
    const double d0 = bs_delta(kHkd, kAtm, 0.005);
    const double k = std::expm1(-0.01);
    const double slope = (k * (c1 - c0) / 7.8 - k * k * d0) / (0.005 * 0.005);
    CHECK(dev[0] / 1e-6 == doctest::Approx(slope).epsilon(1e-3));
    CHECK(dev[1] / dev[0] == doctest::Approx(100.0).epsilon(0.02));
}

TEST_CASE("mean-variance ratio at the reference parameters") {
    const double mv = mv_ratio({0, 0.0, 7.8}, kHkd, kAtm, kTheta).pi;
    const double mv_approx = mv_ratio({0, 0.0, 7.8}, kHkd, kAtm, kTheta, DeltaEngine::approximate).pi;
    const double rs = rs_delta(kHkd, kAtm, kTheta);
    // Frozen from direct evaluation. The downward jump comes with the switch
    // to high volatility, so the option gains when spot falls and the ratio
    // has the opposite sign to the delta.
    CHECK(mv == doctest::Approx(-0.705892098098241).epsilon(1e-9));
    CHECK(mv_approx == doctest::Approx(-0.667031349675476).epsilon(1e-9));
    CHECK(rs == doctest::Approx(0.338459363846831).epsilon(1e-9));
    CHECK(mv - rs < -1.0);
}

TEST_CASE("jump-integral diagnostic") {
    for (double t : {0.0, 0.25}) {
        const RegimeState s{0, t, 7.8};
        CHECK(std::abs(mv_ratio_jump_integral(s, kHkd, kAtm, kTheta).pi - mv_ratio(s, kHkd, kAtm, kTheta).pi) <=
              1e-12);
    }
    RsParams p = kTheta;
    p.delta = 0.02;
    const RegimeState s{0, 0.0, 7.8};
    const double point = mv_ratio(s, kHkd, kAtm, p).pi;
    const double integral = mv_ratio_jump_integral(s, kHkd, kAtm, p).pi;
    CHECK(point == doctest::Approx(-0.7148779689).epsilon(1e-8));
    CHECK(integral == doctest::Approx(0.0179447314).epsilon(1e-7));
    CHECK(std::abs(mv_ratio_jump_integral(s, kHkd, kAtm, p, DeltaEngine::exact, 60).pi - integral) <= 1e-10);
}

TEST_CASE("initial capital is the model price") {
    CHECK(mv_initial_capital(kHkd, kAtm, kTheta) == rs_price(kHkd, kAtm, kTheta));
    CHECK(std::abs(mv_initial_capital(kHkd, kAtm, kTheta) - fourier_price(kHkd, kAtm, kTheta)) <= 1e-6 * 7.8);
    RsParams p = kTheta;
    p.lambda = 0.0;
    CHECK(mv_initial_capital(kHkd, kAtm, p) == bs_price(kHkd, kAtm, p.sigma_low));
}
