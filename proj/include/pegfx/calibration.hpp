#pragma once

// Single-maturity least-squares calibration of the regime-switching parameters
// to five smile pillars, total-variance tenor interpolation, and the daily
// parameter surface theta*(t0, t) on a grid of maturities up to six months.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pegfx/conventions.hpp"
#include "pegfx/core_bs.hpp"
#include "pegfx/rs_model.hpp"

namespace pegfx {

enum class Pricer { martingale, fourier };

std::string to_string(Pricer pricer);
Pricer parse_pricer(std::string_view text);

// Parameter box. sigma_high is searched as sigma_low + gap.
struct CalibrationBounds {
    double sigma_low_min = 1e-4, sigma_low_max = 0.05;
    double sigma_high_max = 0.5;
    double lambda_max = 5.0;
    double u_min = -0.2, u_max = 0.2;
    double delta_max = 0.1;
};

struct CalibrationOptions {
    bool free_delta = false;  // delta is pinned to 0 unless freed
    int max_iterations = 200;
    CalibrationBounds bounds{};
};

struct CalibrationResult {
    RsParams theta_star;
    double me = 0.0;    // mean |relative vol error|, percent
    double rmse = 0.0;  // root mean square relative vol error, percent
    std::array<double, 5> residuals{};      // model vol - quoted vol
    std::array<double, 5> rel_errors_pct{};  // residual / quoted vol * 100
    int iterations = 0;
    int start_index = 0;  // which start produced theta_star
    bool converged = false;
    Pricer pricer_used = Pricer::martingale;
};

// Model vols at the pillar strikes. Strikes below the forward are priced as
// puts through parity so the inversion always sees the out-of-the-money side.
std::array<double, 5> model_vols(const SmilePillars& pillars, const RsParams& theta, Pricer pricer);

// ME and RMSE (percent) of model vols against quoted vols.
std::pair<double, double> me_rmse(const std::array<double, 5>& model, const std::array<double, 5>& quoted);

CalibrationResult calibrate_single(const SmilePillars& pillars, Pricer pricer,
                                   const std::optional<RsParams>& seed_theta = {},
                                   const CalibrationOptions& options = {});

// Total-variance interpolation between two tenors; requires t_near <= t <= t_far.
double interpolate_quotes(double vol_near, double t_near, double vol_far, double t_far, double t);

// Maturities dt + j (t_end - dt) / (n - 1), j = 0..n-1.
std::vector<double> surface_grid(std::size_t n = 131, double dt = 1.0 / 260.0,
                                 double t_end = 0.5);

// Quotes for one valuation date, one row per tenor.
struct QuoteDay {
    std::string date;
    std::vector<QuoteRow> rows;
};

// Pillars at maturity t: the five vols interpolated in total variance between
// the bracketing tenors, rates linearly in t, strikes from the spot
// premium-adjusted convention.
SmilePillars interpolated_pillars(const QuoteDay& day, double t);

struct SurfacePoint {
    double t;
    CalibrationResult result;
};

struct SurfaceFailure {
    double t;
    std::string message;
};

struct ParamSurface {
    std::string date;
    Pricer pricer = Pricer::martingale;
    std::vector<SurfacePoint> points;  // increasing in t
    std::vector<SurfaceFailure> failures;

    bool partial() const { return !failures.empty(); }
    // Parameters at maturity t, linear in t between grid points and clamped
    // to the end points.
    RsParams theta_at(double t) const;
};

struct SurfaceOptions {
    std::size_t grid_points = 131;
    double dt = 1.0 / 260.0;
    CalibrationOptions calibration{};
    // Worker count; 0 means hardware concurrency capped by PEGFX_THREADS.
    unsigned threads = 0;
};

ParamSurface build_surface(const QuoteDay& day, Pricer pricer, const SurfaceOptions& options = {});

// Worker count: hardware concurrency, capped by PEGFX_THREADS when set.
unsigned worker_count();

// One CSV per date (`t,theta_sigma_low,...,me,rmse`) plus a JSON sidecar with
// the same stem.
void write_surface(const std::filesystem::path& csv_path, const ParamSurface& surface);
ParamSurface read_surface(const std::filesystem::path& csv_path);

// Five pillar vols that the model reproduces at the strikes they imply:
// sigma_i = sigma_RS(K_i(sigma_i)), solved by fixed-point iteration.
std::array<double, 5> synthetic_pillar_vols(const RsParams& theta, const MarketContext& mkt,
                                            double maturity, DeltaConvention convention);

// A quote row in the ATM/RR/BF layout whose pillar vols are the synthetic ones.
QuoteRow synthetic_quote(const RsParams& theta, const std::string& date, const MarketContext& mkt,
                         Tenor tenor);

}  // namespace pegfx
