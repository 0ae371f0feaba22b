#include "pegfx/conventions.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "pegfx/errors.hpp"

namespace pegfx {

namespace {

constexpr double kDeltaTol = 1e-10;

bool valid_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::from_chars(s.data(), s.data() + 4, y).ptr != s.data() + 4) return false;
    if (std::from_chars(s.data() + 5, s.data() + 7, m).ptr != s.data() + 7) return false;
    if (std::from_chars(s.data() + 8, s.data() + 10, d).ptr != s.data() + 10) return false;
    return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

double solve_strike(auto&& f, double lo, double hi, double target) {
    const double f_lo = f(lo);
    const double f_hi = f(hi);
    if (!(f_lo > 0.0 && f_hi < 0.0)) {
        throw ConventionError("no strike in the search bracket reproduces delta " + std::to_string(target));
    }
    std::uintmax_t iters = 200;
    auto done = [](double a, double b) {
        return std::abs(b - a) <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(a, b);
    };
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, done, iters);
    const double k = std::abs(f(a)) <= std::abs(f(b)) ? a : b;
    if (std::abs(f(k)) > kDeltaTol) {
        throw ConventionError("strike search stalled before reaching delta " + std::to_string(target), k,
                              std::abs(f(k)));
    }
    return k;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, std::size_t row, const char* name) {
    double x = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), x);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(x)) {
        throw DataError(std::string("row ") + std::to_string(row) + ": malformed " + name + " '" +
                            std::string(field) + "'",
                        row);
    }
    return x;
}

}  // namespace

double year_fraction(Tenor tenor) {
    switch (tenor) {
        case Tenor::d1: return 1.0 / 260.0;
        case Tenor::w1: return 1.0 / 52.0;
        case Tenor::m1: return 1.0 / 12.0;
        case Tenor::m3: return 0.25;
        case Tenor::m6: return 0.5;
        case Tenor::y1: return 1.0;
    }
    throw DomainError("unknown tenor");
}

std::string to_string(Tenor tenor) {
    switch (tenor) {
        case Tenor::d1: return "1D";
        case Tenor::w1: return "1W";
        case Tenor::m1: return "1M";
        case Tenor::m3: return "3M";
        case Tenor::m6: return "6M";
        case Tenor::y1: return "1Y";
    }
    throw DomainError("unknown tenor");
}

Tenor parse_tenor(std::string_view text) {
    for (Tenor t : kAllTenors) {
        if (text == to_string(t)) return t;
    }
    throw DomainError("unknown tenor '" + std::string(text) + "' (expected 1D, 1W, 1M, 3M, 6M or 1Y)");
}

std::string to_string(Pillar pillar) {
    switch (pillar) {
        case Pillar::p10: return "10P";
        case Pillar::p25: return "25P";
        case Pillar::atm: return "ATM";
        case Pillar::c25: return "25C";
        case Pillar::c10: return "10C";
    }
    throw DomainError("unknown pillar");
}

void QuoteRow::validate() const {
    if (!valid_iso_date(date)) throw DataError("invalid ISO-8601 date '" + date + "'");
    for (double x : {spot, rd, rf, atm, rr25, bf25, rr10, bf10}) {
        if (!std::isfinite(x)) throw DataError("non-finite quote field on " + date);
    }
    if (spot <= 0.0) throw DataError("spot must be positive on " + date);
    if (atm <= 0.0) throw DataError("ATM volatility must be positive on " + date);
}

DeltaConvention convention_for(Tenor tenor) {
    return tenor == Tenor::y1 ? DeltaConvention::forward_premium_adjusted
                              : DeltaConvention::spot_premium_adjusted;
}

std::array<double, 5> pillar_vols(const QuoteRow& row) {
    row.validate();
    const std::array<double, 5> v{row.atm + row.bf10 - row.rr10 / 2.0, row.atm + row.bf25 - row.rr25 / 2.0,
                                  row.atm, row.atm + row.bf25 + row.rr25 / 2.0,
                                  row.atm + row.bf10 + row.rr10 / 2.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) {
            throw DataError("non-positive " + to_string(kPillars[i]) + " volatility on " + row.date);
        }
    }
    return v;
}

double pa_delta(double strike, OptionSide side, double vol, const MarketContext& mkt, double maturity,
                DeltaConvention convention) {
    mkt.validate();
    OptionSpec{strike, maturity, side}.validate();
    if (!(vol > 0.0) || !std::isfinite(vol)) throw DomainError("volatility must be positive");
    const double fwd = mkt.forward(maturity);
    const double sd = vol * std::sqrt(maturity);
    const double d_minus = std::log(fwd / strike) / sd - sd / 2.0;
    const double scale = convention == DeltaConvention::spot_premium_adjusted
                             ? strike / mkt.spot * std::exp(-mkt.rd * maturity)
                             : strike / fwd;
    return side == OptionSide::call ? scale * normal_cdf(d_minus) : -scale * normal_cdf(-d_minus);
}

double atm_strike(double vol, const MarketContext& mkt, double maturity) {
    return mkt.forward(maturity) * std::exp(-vol * vol * maturity / 2.0);
}

double strike_from_delta(double target, OptionSide side, double vol, const MarketContext& mkt,
                         double maturity, DeltaConvention convention) {
    mkt.validate();
    if (!(maturity > 0.0)) throw DomainError("maturity must be positive");
    if (!(vol > 0.0) || !std::isfinite(vol)) throw DomainError("volatility must be positive");
    if (!(target > 0.0 && target < 1.0)) throw DomainError("target delta must lie in (0, 1)");

    const double k_atm = atm_strike(vol, mkt, maturity);
    const double reach = std::exp(10.0 * vol * std::sqrt(maturity));
    if (side == OptionSide::call) {
        auto f = [&](double K) { return pa_delta(K, side, vol, mkt, maturity, convention) - target; };
        return solve_strike(f, k_atm, k_atm * reach, target);
    }
    auto f = [&](double K) { return pa_delta(K, side, vol, mkt, maturity, convention) + target; };
    return solve_strike(f, k_atm / reach, k_atm, target);
}

SmilePillars build_pillars(const QuoteRow& row) {
    return pillars_from_vols(pillar_vols(row), row.market(), row.maturity(), convention_for(row.tenor),
                             row.tenor, row.date);
}

SmilePillars pillars_from_vols(const std::array<double, 5>& vols, const MarketContext& mkt, double T,
                               DeltaConvention conv, Tenor tenor_tag, const std::string& label) {
    SmilePillars out{tenor_tag, T, mkt, {}};
    const std::array<double, 5> targets{0.10, 0.25, 0.0, 0.25, 0.10};
    for (std::size_t i = 0; i < 5; ++i) {
        const Pillar p = kPillars[i];
        const OptionSide side = i < 2 ? OptionSide::put : OptionSide::call;
        const double K = p == Pillar::atm ? atm_strike(vols[i], mkt, T)
                                          : strike_from_delta(targets[i], side, vols[i], mkt, T, conv);
        out.points[i] = {p, targets[i], side, vols[i], K};
    }
    for (std::size_t i = 1; i < 5; ++i) {
        if (!(out.points[i].strike > out.points[i - 1].strike)) {
            throw DataError("pillar strikes out of order" + (label.empty() ? "" : " on " + label) + ": " +
                            to_string(kPillars[i - 1]) +
                            " >= " + to_string(kPillars[i]));
        }
    }
    return out;
}

std::vector<QuoteRow> read_quotes(const std::filesystem::path& path, Tenor tenor) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open quote file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty quote file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kQuoteHeader) {
        throw DataError("unexpected header in " + path.string() + " (expected " + std::string(kQuoteHeader) + ")", 1);
    }

    std::vector<QuoteRow> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != 9) {
            throw DataError("row " + std::to_string(row_no) + ": expected 9 fields, found " +
                                std::to_string(fields.size()),
                            row_no);
        }
        QuoteRow r;
        r.date = std::string(fields[0]);
        r.spot = parse_double(fields[1], row_no, "spot");
        r.rd = parse_double(fields[2], row_no, "rd");
        r.rf = parse_double(fields[3], row_no, "rf");
        r.atm = parse_double(fields[4], row_no, "atm");
        r.rr25 = parse_double(fields[5], row_no, "rr25");
        r.bf25 = parse_double(fields[6], row_no, "bf25");
        r.rr10 = parse_double(fields[7], row_no, "rr10");
        r.bf10 = parse_double(fields[8], row_no, "bf10");
        r.tenor = tenor;
        try {
            r.validate();
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row_no) + ": " + e.what(), row_no);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_quotes(const std::filesystem::path& path, const std::vector<QuoteRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write quote file " + path.string());
    out << kQuoteHeader << '\n';
    for (const auto& r : rows) {
        out << r.date;
        for (double x : {r.spot, r.rd, r.rf, r.atm, r.rr25, r.bf25, r.rr10, r.bf10}) out << ',' << format_double(x);
        out << '\n';
    }
}

}  // namespace pegfx
