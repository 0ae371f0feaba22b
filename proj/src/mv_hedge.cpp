#include "pegfx/mv_hedge.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pegfx/errors.hpp"

namespace pegfx {

namespace {

struct HermiteRule {
    std::vector<double> x;  // nodes for the weight e^{-x^2}
    std::vector<double> w;  // weights normalised to sum to one
};

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
// physicists' Hermite recurrence, weights the squared first eigenvector
// components.
HermiteRule gauss_hermite(int n) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int i = 1; i < n; ++i) sub(i - 1) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    HermiteRule rule;
    for (int i = 0; i < n; ++i) {
        rule.x.push_back(solver.eigenvalues()(i));
        const double v = solver.eigenvectors()(0, i);
        rule.w.push_back(v * v);
    }
    return rule;
}

struct Remaining {
    MarketContext at;
    OptionSpec opt;
    double discount;  // e^{-(rd - rf) t}
};

Remaining remaining(const RegimeState& state, const MarketContext& mkt, const OptionSpec& opt) {
    state.validate();
    mkt.validate();
    opt.validate();
    if (opt.side != OptionSide::call) throw DomainError("mean-variance hedge is defined for calls");
    if (state.t >= opt.maturity) throw DomainError("hedge state time must be before maturity");
    return {{state.spot, mkt.rd, mkt.rf},
            {opt.strike, opt.maturity - state.t, OptionSide::call},
            std::exp(-(mkt.rd - mkt.rf) * state.t)};
}

PriceDelta pre_switch(const Remaining& r, const RsParams& params, DeltaEngine engine) {
    return engine == DeltaEngine::exact ? rs_price_delta(r.at, r.opt, params)
                                        : approx_price_delta(r.at, r.opt, params);
}

}  // namespace

void RegimeState::validate() const {
    if (alpha != 0 && alpha != 1) throw DomainError("regime must be 0 or 1");
    if (!std::isfinite(t) || t < 0.0) throw DomainError("hedge state time must be non-negative");
    if (!std::isfinite(spot) || spot <= 0.0) throw DomainError("spot must be positive");
}

double HedgeRatio::undiscounted(const MarketContext& mkt, double t) const {
    return discounted ? pi * std::exp((mkt.rd - mkt.rf) * t) : pi;
}

double value_fn(const RegimeState& state, const MarketContext& mkt, const OptionSpec& opt,
                const RsParams& params) {
    const Remaining r = remaining(state, mkt, opt);
    params.validate();
    if (state.alpha == 1) return bs_price(r.at, r.opt, params.sigma_high);
    return rs_price(r.at, r.opt, params);
}

double mv_combine(const RsParams& params, double spot, double delta0, double value0,
                  double value1_jumped) {
    const double s2 = params.sigma_low * params.sigma_low;
    const double k = kappa(params);
    const double num = s2 * delta0 + params.lambda * std::expm1(params.u) / spot * (value1_jumped - value0);
    return num / (s2 + params.lambda * k * k);
}

HedgeRatio mv_ratio(const RegimeState& state, const MarketContext& mkt, const OptionSpec& opt,
                    const RsParams& params, DeltaEngine engine) {
    const Remaining r = remaining(state, mkt, opt);
    params.validate();
    if (state.alpha == 1) return {r.discount * bs_delta(r.at, r.opt, params.sigma_high), true};

    const PriceDelta c0 = pre_switch(r, params, engine);
    const MarketContext jumped{state.spot * (1.0 + kappa(params)), mkt.rd, mkt.rf};
    const double c1 = bs_price(jumped, r.opt, params.sigma_high);
    return {r.discount * mv_combine(params, state.spot, c0.delta, c0.price, c1), true};
}

HedgeRatio mv_ratio_jump_integral(const RegimeState& state, const MarketContext& mkt,
                                  const OptionSpec& opt, const RsParams& params,
                                  DeltaEngine engine, int nodes) {
    if (nodes < 2) throw DomainError("Gauss-Hermite rule needs at least two nodes");
    const Remaining r = remaining(state, mkt, opt);
    params.validate();
    if (state.alpha == 1) return mv_ratio(state, mkt, opt, params, engine);

    const PriceDelta c0 = pre_switch(r, params, engine);
    const HermiteRule rule = gauss_hermite(nodes);
    double jump_term = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double y = params.u + std::sqrt(2.0) * params.delta * rule.x[i];
        const MarketContext jumped{state.spot * std::exp(y), mkt.rd, mkt.rf};
        jump_term += rule.w[i] * std::expm1(y) * (bs_price(jumped, r.opt, params.sigma_high) - c0.price);
    }
    const double u = params.u;
    const double d2 = params.delta * params.delta;
    const double second_moment = std::exp(2.0 * u + 2.0 * d2) - 2.0 * std::exp(u + d2 / 2.0) + 1.0;
    const double s2 = params.sigma_low * params.sigma_low;
    const double ratio = (s2 * c0.delta + params.lambda * jump_term / state.spot) /
                         (s2 + params.lambda * second_moment);
    return {r.discount * ratio, true};
}

double mv_initial_capital(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params) {
    return rs_price(mkt, opt, params);
}

}  // namespace pegfx
