#pragma once

// Exact-in-law Monte Carlo of the regime-switching spot, discrete hedging
// backtests on simulated paths and on calibrated daily surfaces, and summary
// statistics of the hedging errors.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pegfx/calibration.hpp"
#include "pegfx/conventions.hpp"
#include "pegfx/core_bs.hpp"
#include "pegfx/rs_model.hpp"

namespace pegfx {

enum class Scenario { unconditional, no_jump, jump };

std::string to_string(Scenario s);
Scenario parse_scenario(std::string_view text);  // unconditional, no-jump, jump

struct RsPath {
    double dt = 0.0;
    std::vector<double> spot;  // S(t_i), i = 0..n_steps
    std::vector<int> regime;   // alpha(t_i)
    double tau = std::numeric_limits<double>::infinity();
    double jump_factor = 1.0;  // e^Y, applied at tau
    Scenario scenario = Scenario::unconditional;

    std::size_t steps() const { return spot.size() - 1; }
    double time(std::size_t i) const { return static_cast<double>(i) * dt; }
};

// Generator for path `index` of a run with `master_seed`.
std::mt19937_64 path_rng(std::uint64_t master_seed, std::uint64_t index);

RsPath simulate_path(const MarketContext& mkt, const RsParams& params, double maturity, int n_steps,
                     Scenario scenario, std::mt19937_64& rng);
RsPath simulate_path(const MarketContext& mkt, const RsParams& params, double maturity, int n_steps,
                     Scenario scenario, std::uint64_t rng_seed);

// Terminal spots only (one exact step per path), for moment checks.
std::vector<double> simulate_terminal(const MarketContext& mkt, const RsParams& params, double maturity,
                                      Scenario scenario, std::uint64_t master_seed, std::size_t n_paths);

enum class Strategy { bs_delta, rs_delta, approx_rs_delta, mv_rs, mv_approx };

inline constexpr std::array<Strategy, 5> kAllStrategies{Strategy::bs_delta, Strategy::rs_delta,
                                                        Strategy::approx_rs_delta, Strategy::mv_rs,
                                                        Strategy::mv_approx};

std::string to_string(Strategy s);
Strategy parse_strategy(std::string_view text);
std::vector<Strategy> parse_strategies(std::string_view comma_list);  // "all" expands

struct HedgeLedger {
    std::vector<double> eta1;       // asset units held over (t_i, t_{i+1}]
    std::vector<double> eta0;       // bond value held over (t_i, t_{i+1}], in value at t_i
    std::vector<double> portfolio;  // Portfolio(t_i) before rebalancing
    std::vector<double> reference;  // C(t_i)
};

struct HedgeReport {
    Strategy strategy;
    Scenario scenario;
    double terminal_error_pct;  // |P(T) - C(T)| / K * 100
    double mte_pct;             // mean over i = 1..n of |P(t_i) - C(t_i)| / K * 100
};

// Hedges a call along `path`: initial capital rs_price, rebalanced at
// t_0..t_{n-1}, bond accrual e^{(rd - rf) dt} per step. The path's horizon
// must equal the option maturity.
HedgeReport backtest_hedge(const RsPath& path, Strategy strategy, const MarketContext& mkt,
                           const OptionSpec& opt, const RsParams& params, HedgeLedger* ledger = nullptr);

// Several strategies on one path, sharing the per-step model values.
std::vector<HedgeReport> backtest_strategies(const RsPath& path, std::span<const Strategy> strategies,
                                             const MarketContext& mkt, const OptionSpec& opt,
                                             const RsParams& params,
                                             std::vector<HedgeLedger>* ledgers = nullptr);

struct ExperimentConfig {
    MarketContext market{7.8, 0.01, 0.015};
    OptionSpec option{7.8, 0.5};
    RsParams params{0.005, 0.10, 0.2, -0.01, 0.0};
    int n_steps = 130;
    std::size_t n_paths = 10000;
    Scenario scenario = Scenario::no_jump;
    std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
    std::uint64_t seed = 20240607;
    unsigned threads = 0;  // 0: worker_count()
};

struct PathReports {
    std::size_t path;
    std::vector<HedgeReport> reports;  // one per strategy, in config order
};

// Common random numbers: every strategy is run on the same paths.
std::vector<PathReports> run_experiment(const ExperimentConfig& config);

struct ErrorStats {
    double mean, std, min, q25, median, q75, max;
};

struct StrategySummary {
    Strategy strategy;
    std::size_t count;
    ErrorStats terminal;
    ErrorStats mte;
};

ErrorStats error_stats(std::vector<double> values);
std::vector<StrategySummary> experiment_stats(std::span<const HedgeReport> reports);
std::vector<HedgeReport> flatten(std::span<const PathReports> runs);

// `<stem>.csv` (one row per path and strategy), `<stem>_summary.json`,
// `<stem>_hist.csv` (tidy histogram bins per strategy and metric).
void write_experiment(const std::filesystem::path& out_dir, const std::string& stem,
                      const ExperimentConfig& config, std::span<const PathReports> runs,
                      std::size_t histogram_bins = 40);

// Real-data protocol: ATM calls written on start dates and hedged daily with
// the day's surface parameters at the remaining maturity.
struct RealHistory {
    std::vector<QuoteRow> rows;  // consecutive trading days, 6M tenor
};

using SurfaceStore = std::map<std::string, ParamSurface>;

struct RealHedgeReport {
    std::string start_date;
    double strike;
    int steps;
    HedgeReport report;
};

// Hedges run for 130 daily steps or until the history ends, whichever comes
// first. Only the pre-switch strategies apply: bs_delta (with the RS implied
// vol at the strike), rs_delta and approx_rs_delta.
std::vector<RealHedgeReport> backtest_real(const RealHistory& history, const SurfaceStore& surfaces,
                                           std::span<const std::size_t> start_indices,
                                           std::span<const Strategy> strategies, int horizon_steps = 130,
                                           double dt = 1.0 / 260.0);

// Runs `body(i)` for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace pegfx
