#include "pegfx/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include <json.hpp>

#include "pegfx/errors.hpp"
#include "pegfx/mv_hedge.hpp"

namespace pegfx {

namespace {

struct Dynamics {
    double mu0, sd0;  // pre-switch log drift and vol
    double mu1, sd1;  // post-switch
    double u, delta;
    double lambda;
};

Dynamics dynamics(const MarketContext& mkt, const RsParams& p) {
    const double carry = mkt.rd - mkt.rf;
    return {carry - 0.5 * p.sigma_low * p.sigma_low - p.lambda * kappa(p), p.sigma_low,
            carry - 0.5 * p.sigma_high * p.sigma_high, p.sigma_high,
            p.u, p.delta, p.lambda};
}

// U in (0, 1].
double open_uniform(std::mt19937_64& rng) {
    return 1.0 - std::generate_canonical<double, 53>(rng);
}

double draw_tau(const Dynamics& d, double T, Scenario scenario, std::mt19937_64& rng) {
    const double U = open_uniform(rng);
    if (d.lambda == 0.0) return std::numeric_limits<double>::infinity();
    switch (scenario) {
        case Scenario::unconditional:
            return -std::log(U) / d.lambda;
        case Scenario::no_jump:
            // Memorylessness: tau | tau > T is T plus a fresh exponential.
            return T - std::log(U) / d.lambda;
        case Scenario::jump:
            // Inverse of the exponential law truncated to (0, T].
            return -std::log1p(-U * -std::expm1(-d.lambda * T)) / d.lambda;
    }
    return std::numeric_limits<double>::infinity();
}

// Log-spot increment over (ta, tb] given the switch time and jump size.
double log_increment(const Dynamics& d, double ta, double tb, double tau, double y, std::mt19937_64& rng,
                     std::normal_distribution<double>& normal) {
    const double z = normal(rng);
    if (tb <= tau) return d.mu0 * (tb - ta) + d.sd0 * std::sqrt(tb - ta) * z;
    if (ta >= tau) return d.mu1 * (tb - ta) + d.sd1 * std::sqrt(tb - ta) * z;
    const double z2 = normal(rng);
    const double pre = tau - ta, post = tb - tau;
    return d.mu0 * pre + d.sd0 * std::sqrt(pre) * z + y + d.mu1 * post + d.sd1 * std::sqrt(post) * z2;
}

void check_simulation(const MarketContext& mkt, const RsParams& params, double T, int n_steps,
                      Scenario scenario) {
    mkt.validate();
    params.validate();
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("maturity must be positive");
    if (n_steps < 1) throw DomainError("a path needs at least one step");
    if (scenario == Scenario::jump && params.lambda == 0.0) {
        throw DomainError("cannot condition on a switch when lambda is 0");
    }
}

}  // namespace

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::unconditional: return "unconditional";
        case Scenario::no_jump: return "no-jump";
        case Scenario::jump: return "jump";
    }
    return "unknown";
}

Scenario parse_scenario(std::string_view text) {
    if (text == "unconditional") return Scenario::unconditional;
    if (text == "no-jump" || text == "no_jump") return Scenario::no_jump;
    if (text == "jump") return Scenario::jump;
    throw DomainError("unknown scenario '" + std::string(text) + "' (expected unconditional, no-jump or jump)");
}

std::mt19937_64 path_rng(std::uint64_t master_seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

RsPath simulate_path(const MarketContext& mkt, const RsParams& params, double T, int n_steps,
                     Scenario scenario, std::mt19937_64& rng) {
    check_simulation(mkt, params, T, n_steps, scenario);
    const Dynamics d = dynamics(mkt, params);
    std::normal_distribution<double> normal;

    RsPath path;
    path.scenario = scenario;
    path.dt = T / n_steps;
    path.tau = draw_tau(d, T, scenario, rng);
    const double y = d.u + d.delta * normal(rng);
    path.jump_factor = std::exp(y);

    path.spot.resize(n_steps + 1);
    path.regime.resize(n_steps + 1);
    path.spot[0] = mkt.spot;
    path.regime[0] = 0.0 >= path.tau;
    double log_s = std::log(mkt.spot);
    for (int i = 0; i < n_steps; ++i) {
        const double ta = path.time(i);
        const double tb = i + 1 == n_steps ? T : path.time(i + 1);
        log_s += log_increment(d, ta, tb, path.tau, y, rng, normal);
        path.spot[i + 1] = std::exp(log_s);
        path.regime[i + 1] = tb >= path.tau;
    }
    return path;
}

RsPath simulate_path(const MarketContext& mkt, const RsParams& params, double T, int n_steps,
                     Scenario scenario, std::uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    return simulate_path(mkt, params, T, n_steps, scenario, rng);
}

std::vector<double> simulate_terminal(const MarketContext& mkt, const RsParams& params, double T,
                                      Scenario scenario, std::uint64_t master_seed, std::size_t n_paths) {
    check_simulation(mkt, params, T, 1, scenario);
    const Dynamics d = dynamics(mkt, params);
    std::vector<double> out(n_paths);
    constexpr std::size_t kBlock = 4096;
    const std::size_t blocks = (n_paths + kBlock - 1) / kBlock;
    parallel_for(blocks, worker_count(), [&](std::size_t b) {
        auto rng = path_rng(master_seed, b);
        std::normal_distribution<double> normal;
        const std::size_t end = std::min(n_paths, (b + 1) * kBlock);
        for (std::size_t i = b * kBlock; i < end; ++i) {
            const double tau = draw_tau(d, T, scenario, rng);
            const double y = d.u + d.delta * normal(rng);
            out[i] = mkt.spot * std::exp(log_increment(d, 0.0, T, tau, y, rng, normal));
        }
    });
    return out;
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::bs_delta: return "bs_delta";
        case Strategy::rs_delta: return "rs_delta";
        case Strategy::approx_rs_delta: return "approx_rs_delta";
        case Strategy::mv_rs: return "mv_rs";
        case Strategy::mv_approx: return "mv_approx";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view text) {
    for (Strategy s : kAllStrategies) {
        if (text == to_string(s)) return s;
    }
    throw DomainError("unknown strategy '" + std::string(text) + "'");
}

std::vector<Strategy> parse_strategies(std::string_view list) {
    if (list == "all") return {kAllStrategies.begin(), kAllStrategies.end()};
    std::vector<Strategy> out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const std::size_t comma = std::min(list.find(',', pos), list.size());
        out.push_back(parse_strategy(list.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

namespace {

bool uses(std::span<const Strategy> s, Strategy x) { return std::find(s.begin(), s.end(), x) != s.end(); }

// Model quantities shared by all strategies at one hedge date.
struct StepValues {
    double reference;  // C(t_i)
    std::array<double, 5> ratio;  // indexed by Strategy
};

StepValues step_values(int alpha, double spot, double remaining, const MarketContext& mkt, double strike,
                       const RsParams& params, std::span<const Strategy> strategies) {
    const MarketContext at{spot, mkt.rd, mkt.rf};
    const OptionSpec opt{strike, remaining};
    StepValues v{};
    if (alpha == 1) {
        v.reference = bs_price(at, opt, params.sigma_high);
        v.ratio.fill(bs_delta(at, opt, params.sigma_high));
        return v;
    }
    const PriceDelta exact = rs_price_delta(at, opt, params);
    v.reference = exact.price;
    auto idx = [](Strategy s) { return static_cast<std::size_t>(s); };
    if (uses(strategies, Strategy::bs_delta)) v.ratio[idx(Strategy::bs_delta)] = bs_delta(at, opt, params.sigma_low);
    v.ratio[idx(Strategy::rs_delta)] = exact.delta;
    const bool approx = uses(strategies, Strategy::approx_rs_delta) || uses(strategies, Strategy::mv_approx);
    const PriceDelta apx = approx ? approx_price_delta(at, opt, params) : PriceDelta{};
    v.ratio[idx(Strategy::approx_rs_delta)] = apx.delta;
    if (uses(strategies, Strategy::mv_rs) || uses(strategies, Strategy::mv_approx)) {
        const MarketContext jumped{spot * (1.0 + kappa(params)), mkt.rd, mkt.rf};
        const double c1 = bs_price(jumped, opt, params.sigma_high);
        v.ratio[idx(Strategy::mv_rs)] = mv_combine(params, spot, exact.delta, exact.price, c1);
        if (approx) v.ratio[idx(Strategy::mv_approx)] = mv_combine(params, spot, apx.delta, apx.price, c1);
    }
    return v;
}

}  // namespace

std::vector<HedgeReport> backtest_strategies(const RsPath& path, std::span<const Strategy> strategies,
                                             const MarketContext& mkt, const OptionSpec& opt,
                                             const RsParams& params, std::vector<HedgeLedger>* ledgers) {
    mkt.validate();
    opt.validate();
    params.validate();
    if (opt.side != OptionSide::call) throw DomainError("hedging backtests are defined for calls");
    if (path.spot.size() < 2 || path.regime.size() != path.spot.size()) throw DomainError("path has no steps");
    const std::size_t n = path.steps();
    if (std::abs(static_cast<double>(n) * path.dt - opt.maturity) > 1e-12 * opt.maturity) {
        throw DomainError("path grid of " + std::to_string(n) + " steps of " + std::to_string(path.dt) +
                          " does not end at the option maturity " + std::to_string(opt.maturity));
    }
    if (path.spot[0] != mkt.spot) throw DomainError("path does not start at the market spot");

    const std::size_t ns = strategies.size();
    const double growth = std::exp((mkt.rd - mkt.rf) * path.dt);
    const double K = opt.strike;
    std::vector<double> P(ns, rs_price(mkt, opt, params));
    std::vector<double> err_sum(ns, 0.0), last_err(ns, 0.0);
    if (ledgers) ledgers->assign(ns, HedgeLedger{});

    StepValues now = step_values(path.regime[0], path.spot[0], opt.maturity, mkt, K, params, strategies);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> eta1(ns), eta0(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            eta1[s] = now.ratio[static_cast<std::size_t>(strategies[s])];
            eta0[s] = P[s] - eta1[s] * path.spot[i];
            if (ledgers) {
                auto& L = (*ledgers)[s];
                L.eta1.push_back(eta1[s]);
                L.eta0.push_back(eta0[s]);
                L.portfolio.push_back(P[s]);
                L.reference.push_back(i == 0 ? P[s] : now.reference);
            }
        }
        const double s_next = path.spot[i + 1];
        double c_next;
        if (i + 1 == n) {
            c_next = std::max(s_next - K, 0.0);
        } else {
            now = step_values(path.regime[i + 1], s_next, opt.maturity - path.time(i + 1), mkt, K, params,
                              strategies);
            c_next = now.reference;
        }
        for (std::size_t s = 0; s < ns; ++s) {
            P[s] = eta1[s] * s_next + eta0[s] * growth;
            last_err[s] = std::abs(P[s] - c_next) / K * 100.0;
            err_sum[s] += last_err[s];
        }
    }
    if (ledgers) {
        for (std::size_t s = 0; s < ns; ++s) {
            (*ledgers)[s].portfolio.push_back(P[s]);
            (*ledgers)[s].reference.push_back(std::max(path.spot[n] - K, 0.0));
        }
    }

    std::vector<HedgeReport> out;
    out.reserve(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        out.push_back({strategies[s], path.scenario, last_err[s], err_sum[s] / static_cast<double>(n)});
    }
    return out;
}

HedgeReport backtest_hedge(const RsPath& path, Strategy strategy, const MarketContext& mkt,
                           const OptionSpec& opt, const RsParams& params, HedgeLedger* ledger) {
    const std::array<Strategy, 1> one{strategy};
    std::vector<HedgeLedger> ledgers;
    auto r = backtest_strategies(path, one, mkt, opt, params, ledger ? &ledgers : nullptr);
    if (ledger) *ledger = std::move(ledgers.front());
    return r.front();
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::optional<std::size_t> err_index;
    std::exception_ptr err;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                // Report the lowest failing index so the error does not depend on scheduling.
                if (!err_index || i < *err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }
    if (err) std::rethrow_exception(err);
}

std::vector<PathReports> run_experiment(const ExperimentConfig& c) {
    if (c.strategies.empty()) throw DomainError("no hedging strategies selected");
    if (c.n_paths == 0) throw DomainError("experiment needs at least one path");
    check_simulation(c.market, c.params, c.option.maturity, c.n_steps, c.scenario);
    std::vector<PathReports> runs(c.n_paths);
    parallel_for(c.n_paths, c.threads ? c.threads : worker_count(), [&](std::size_t i) {
        auto rng = path_rng(c.seed, i);
        const RsPath path = simulate_path(c.market, c.params, c.option.maturity, c.n_steps, c.scenario, rng);
        runs[i] = {i, backtest_strategies(path, c.strategies, c.market, c.option, c.params)};
    });
    return runs;
}

ErrorStats error_stats(std::vector<double> v) {
    if (v.empty()) throw DomainError("statistics need at least one value");
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    // Linear interpolation between order statistics.
    auto q = [&](double p) {
        const double h = (n - 1.0) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0, v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

std::vector<StrategySummary> experiment_stats(std::span<const HedgeReport> reports) {
    if (reports.empty()) throw DomainError("no hedge reports to summarise");
    std::vector<StrategySummary> out;
    for (Strategy s : kAllStrategies) {
        std::vector<double> term, mte;
        for (const auto& r : reports) {
            if (r.strategy != s) continue;
            term.push_back(r.terminal_error_pct);
            mte.push_back(r.mte_pct);
        }
        if (term.empty()) continue;
        out.push_back({s, term.size(), error_stats(term), error_stats(mte)});
    }
    return out;
}

std::vector<HedgeReport> flatten(std::span<const PathReports> runs) {
    std::vector<HedgeReport> out;
    for (const auto& r : runs) out.insert(out.end(), r.reports.begin(), r.reports.end());
    return out;
}

namespace {

std::string fmt(double x) {
    std::array<char, 32> buf{};
    const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), p);
}

nlohmann::json stats_json(const ErrorStats& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"q25", s.q25},
            {"median", s.median}, {"q75", s.q75}, {"max", s.max}};
}

}  // namespace

void write_experiment(const std::filesystem::path& dir, const std::string& stem, const ExperimentConfig& c,
                      std::span<const PathReports> runs, std::size_t bins) {
    std::filesystem::create_directories(dir);
    const auto reports = flatten(runs);
    {
        std::ofstream out(dir / (stem + ".csv"));
        if (!out) throw DataError("cannot write " + (dir / (stem + ".csv")).string());
        out << "path,scenario,strategy,terminal_error_pct,mte_pct\n";
        for (const auto& run : runs) {
            for (const auto& r : run.reports) {
                out << run.path << ',' << to_string(r.scenario) << ',' << to_string(r.strategy) << ','
                    << fmt(r.terminal_error_pct) << ',' << fmt(r.mte_pct) << '\n';
            }
        }
    }

    const auto summary = experiment_stats(reports);
    nlohmann::json js;
    js["scenario"] = to_string(c.scenario);
    js["paths"] = c.n_paths;
    js["steps"] = c.n_steps;
    js["seed"] = c.seed;
    js["market"] = {{"spot", c.market.spot}, {"rd", c.market.rd}, {"rf", c.market.rf}};
    js["option"] = {{"strike", c.option.strike}, {"maturity", c.option.maturity}};
    js["theta"] = {c.params.sigma_low, c.params.sigma_high, c.params.lambda, c.params.u, c.params.delta};
    auto& arr = js["strategies"] = nlohmann::json::array();
    for (const auto& s : summary) {
        arr.push_back({{"strategy", to_string(s.strategy)},
                       {"count", s.count},
                       {"terminal_error_pct", stats_json(s.terminal)},
                       {"mte_pct", stats_json(s.mte)}});
    }
    std::ofstream(dir / (stem + "_summary.json")) << js.dump(2) << '\n';

    std::ofstream hist(dir / (stem + "_hist.csv"));
    hist << "strategy,metric,bin_lo,bin_hi,count\n";
    for (int metric = 0; metric < 2; ++metric) {
        auto value = [metric](const HedgeReport& r) { return metric == 0 ? r.terminal_error_pct : r.mte_pct; };
        double top = 0.0;
        for (const auto& r : reports) top = std::max(top, value(r));
        const double width = top > 0.0 ? top / static_cast<double>(bins) : 1.0;
        for (const auto& s : summary) {
            std::vector<std::size_t> counts(bins, 0);
            for (const auto& r : reports) {
                if (r.strategy != s.strategy) continue;
                const auto b = std::min(bins - 1, static_cast<std::size_t>(value(r) / width));
                ++counts[b];
            }
            for (std::size_t b = 0; b < bins; ++b) {
                hist << to_string(s.strategy) << ',' << (metric == 0 ? "terminal" : "mte") << ','
                     << fmt(b * width) << ',' << fmt((b + 1) * width) << ',' << counts[b] << '\n';
            }
        }
    }
}

std::vector<RealHedgeReport> backtest_real(const RealHistory& history, const SurfaceStore& surfaces,
                                           std::span<const std::size_t> start_indices,
                                           std::span<const Strategy> strategies, int horizon_steps, double dt) {
    for (Strategy s : strategies) {
        if (s == Strategy::mv_rs || s == Strategy::mv_approx) {
            throw DomainError("real-data backtests support bs_delta, rs_delta and approx_rs_delta only");
        }
    }
    if (horizon_steps < 1 || !(dt > 0.0)) throw DomainError("hedge horizon must be positive");
    const auto& rows = history.rows;
    const double T = horizon_steps * dt;

    auto surface_for = [&](const std::string& date) -> const ParamSurface& {
        const auto it = surfaces.find(date);
        if (it == surfaces.end()) throw DataError("no parameter surface for rebalance date " + date);
        return it->second;
    };

    std::vector<RealHedgeReport> out;
    for (std::size_t n : start_indices) {
        if (n + 1 >= rows.size()) {
            throw DataError("start index " + std::to_string(n) + " leaves no rebalance date in the history");
        }
        const int steps = static_cast<int>(std::min<std::size_t>(horizon_steps, rows.size() - 1 - n));
        const MarketContext mkt0 = rows[n].market();
        const double K = atm_strike(rows[n].atm, mkt0, T);

        // Model values at day m of the hedge (remaining maturity T - m dt).
        auto value_at = [&](int m) {
            const QuoteRow& row = rows[n + m];
            row.validate();
            const double remaining = T - m * dt;
            const MarketContext mkt = row.market();
            if (m == horizon_steps) return std::pair<double, RsParams>{std::max(mkt.spot - K, 0.0), {}};
            const RsParams theta = surface_for(row.date).theta_at(remaining);
            return std::pair<double, RsParams>{rs_price(mkt, {K, remaining}, theta), theta};
        };

        for (Strategy s : strategies) {
            auto [c, theta] = value_at(0);
            double P = c;
            double err_sum = 0.0, last = 0.0;
            for (int m = 0; m < steps; ++m) {
                const QuoteRow& row = rows[n + m];
                const MarketContext mkt = row.market();
                const OptionSpec opt{K, T - m * dt};
                double ratio = 0.0;
                switch (s) {
                    case Strategy::bs_delta:
                        ratio = bs_delta(mkt, opt, rs_implied_vol(mkt, opt, theta));
                        break;
                    case Strategy::rs_delta:
                        ratio = rs_delta(mkt, opt, theta);
                        break;
                    default:
                        ratio = approx_delta(mkt, opt, theta);
                        break;
                }
                const double eta0 = P - ratio * mkt.spot;
                std::tie(c, theta) = value_at(m + 1);
                P = ratio * rows[n + m + 1].spot + eta0 * std::exp((mkt.rd - mkt.rf) * dt);
                last = std::abs(P - c) / K * 100.0;
                err_sum += last;
            }
            out.push_back({rows[n].date, K, steps, {s, Scenario::unconditional, last, err_sum / steps}});
        }
    }
    return out;
}

}  // namespace pegfx
