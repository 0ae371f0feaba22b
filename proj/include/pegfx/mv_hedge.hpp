#pragma once

// Mean-variance hedge ratio for a call under the regime-switching model, built
// from the conditional values C(t, s, 0) (pre-switch) and C(t, s, 1)
// (post-switch, plain GK with sigma_high).

#include "pegfx/core_bs.hpp"
#include "pegfx/rs_model.hpp"

namespace pegfx {

struct RegimeState {
    int alpha = 0;      // 0 before the switch, 1 after
    double t = 0.0;     // current time
    double spot = 0.0;  // pre-jump spot S(t-)

    void validate() const;
};

enum class DeltaEngine { exact, approximate };

// Ratios are expressed against the discounted spot e^{-(rd - rf) t} S(t);
// multiply by e^{(rd - rf) t} to get units of foreign currency.
struct HedgeRatio {
    double pi = 0.0;
    bool discounted = true;

    double undiscounted(const MarketContext& mkt, double t) const;
};

// C(t, s, alpha). Rates come from `mkt`; its spot is ignored in favour of
// `state.spot`. Requires t < T.
double value_fn(const RegimeState& state, const MarketContext& mkt, const OptionSpec& opt,
                const RsParams& params);

// Undiscounted mean-variance ratio from precomputed ingredients: pre-switch
// delta and value at `spot`, and post-switch value at the jumped spot
// spot * e^{u + delta^2/2}.
double mv_combine(const RsParams& params, double spot, double delta0, double value0,
                  double value1_jumped);

HedgeRatio mv_ratio(const RegimeState& state, const MarketContext& mkt, const OptionSpec& opt,
                    const RsParams& params, DeltaEngine engine = DeltaEngine::exact);

// Pre-switch ratio with the jump terms integrated over the lognormal jump law
// by Gauss-Hermite quadrature instead of evaluated at a single jump size.
// Coincides with mv_ratio when delta = 0. Post-switch states return the
// mv_ratio value.
HedgeRatio mv_ratio_jump_integral(const RegimeState& state, const MarketContext& mkt,
                                  const OptionSpec& opt, const RsParams& params,
                                  DeltaEngine engine = DeltaEngine::exact, int nodes = 40);

double mv_initial_capital(const MarketContext& mkt, const OptionSpec& opt, const RsParams& params);

}  // namespace pegfx
