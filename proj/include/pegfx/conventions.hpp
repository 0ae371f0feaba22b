#pragma once

// FX smile quotes: ATM / risk-reversal / butterfly rows, their five pillar
// vols, and strikes recovered under premium-adjusted delta conventions.

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pegfx/core_bs.hpp"

namespace pegfx {

enum class Tenor { d1, w1, m1, m3, m6, y1 };

double year_fraction(Tenor tenor);
std::string to_string(Tenor tenor);
Tenor parse_tenor(std::string_view text);
inline constexpr std::array<Tenor, 6> kAllTenors{Tenor::d1, Tenor::w1, Tenor::m1,
                                                 Tenor::m3, Tenor::m6, Tenor::y1};

struct QuoteRow {
    std::string date;  // YYYY-MM-DD
    double spot = 0.0;
    double rd = 0.0;
    double rf = 0.0;
    double atm = 0.0;
    double rr25 = 0.0;
    double bf25 = 0.0;
    double rr10 = 0.0;
    double bf10 = 0.0;
    Tenor tenor = Tenor::m1;

    void validate() const;
    MarketContext market() const { return {spot, rd, rf}; }
    double maturity() const { return year_fraction(tenor); }
};

enum class DeltaConvention { spot_premium_adjusted, forward_premium_adjusted };

// Tenors up to 6M quote spot premium-adjusted deltas, 1Y forward.
DeltaConvention convention_for(Tenor tenor);

// Pillar order 10P, 25P, ATM, 25C, 10C.
enum class Pillar { p10, p25, atm, c25, c10 };
inline constexpr std::array<Pillar, 5> kPillars{Pillar::p10, Pillar::p25, Pillar::atm, Pillar::c25,
                                                Pillar::c10};
std::string to_string(Pillar pillar);

std::array<double, 5> pillar_vols(const QuoteRow& row);

// Premium-adjusted delta; negative for puts.
double pa_delta(double strike, OptionSide side, double vol, const MarketContext& mkt,
                double maturity, DeltaConvention convention);

// Delta-neutral straddle strike F e^{-vol^2 T / 2}.
double atm_strike(double vol, const MarketContext& mkt, double maturity);

// `target` is the unsigned delta (0.25 for a 25-delta put or call). Call
// strikes are searched on [K_ATM, K_ATM e^{10 vol sqrt T}], where the
// premium-adjusted call delta is decreasing, so the largest root is returned.
// Put strikes are searched on [K_ATM e^{-10 vol sqrt T}, K_ATM].
double strike_from_delta(double target, OptionSide side, double vol, const MarketContext& mkt,
                         double maturity, DeltaConvention convention);

struct PillarQuote {
    Pillar pillar;
    double target_delta;  // unsigned; 0 for the delta-neutral ATM
    OptionSide side;
    double vol;
    double strike;
};

struct SmilePillars {
    Tenor tenor;
    double maturity;
    MarketContext market;
    std::array<PillarQuote, 5> points;
};

SmilePillars build_pillars(const QuoteRow& row);

// Pillars for explicit vols (order 10P, 25P, ATM, 25C, 10C) at any maturity.
SmilePillars pillars_from_vols(const std::array<double, 5>& vols, const MarketContext& mkt,
                               double maturity, DeltaConvention convention, Tenor tenor_tag = Tenor::m1,
                               const std::string& label = "");

// One file per tenor with header date,spot,rd,rf,atm,rr25,bf25,rr10,bf10.
std::vector<QuoteRow> read_quotes(const std::filesystem::path& path, Tenor tenor);
void write_quotes(const std::filesystem::path& path, const std::vector<QuoteRow>& rows);

inline constexpr std::string_view kQuoteHeader = "date,spot,rd,rf,atm,rr25,bf25,rr10,bf10";

}  // namespace pegfx
