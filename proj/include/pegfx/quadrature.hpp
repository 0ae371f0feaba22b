#pragma once

// Globally adaptive Gauss-Kronrod (7/15) integration of vector-valued
// integrands. The interval with the largest error estimate is bisected until
// every component's summed error is below the absolute tolerance or the
// subdivision cap is hit. Node tables come from Boost.Math.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace pegfx {

struct QuadratureOptions {
    double abs_tol = 1e-10;
    std::size_t max_subdivisions = 10000;
};

struct QuadratureResult {
    std::vector<double> value;
    std::vector<double> error;
    std::size_t subdivisions = 0;
    bool converged = false;
};

namespace detail {

struct GkRule {
    std::array<double, 8> abscissa;  // non-negative half, abscissa[0] == 0
    std::array<double, 8> kronrod;
    std::array<double, 4> gauss;
};

inline const GkRule& gk15() {
    static const GkRule rule = [] {
        using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
        using Gauss = boost::math::quadrature::gauss<double, 7>;
        GkRule r{};
        std::copy_n(Kronrod::abscissa().begin(), 8, r.abscissa.begin());
        std::copy_n(Kronrod::weights().begin(), 8, r.kronrod.begin());
        std::copy_n(Gauss::weights().begin(), 4, r.gauss.begin());
        return r;
    }();
    return rule;
}

}  // namespace detail

// `f(x, out)` writes the integrand's `dim` components at x into `out`.
// `breaks` is an increasing list of at least two points whose consecutive
// pairs form the initial panels.
template <class F>
QuadratureResult integrate_adaptive(F&& f, std::size_t dim, std::span<const double> breaks,
                                    const QuadratureOptions& opts = {}) {
    const auto& rule = detail::gk15();

    struct Segment {
        double lo;
        double hi;
        double worst;  // largest component error estimate
        std::size_t slot;
    };
    std::vector<double> values;  // dim entries per slot
    std::vector<double> errors;
    std::vector<double> fp(dim), fm(dim), kr(dim), ga(dim), old_v(dim), old_e(dim);

    auto evaluate = [&](double lo, double hi, std::size_t slot) {
        const double centre = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo);
        f(centre, std::span<double>(fp));
        for (std::size_t c = 0; c < dim; ++c) {
            kr[c] = fp[c] * rule.kronrod[0];
            ga[c] = fp[c] * rule.gauss[0];
        }
        for (std::size_t i = 1; i < 8; ++i) {
            const double dx = half * rule.abscissa[i];
            f(centre + dx, std::span<double>(fp));
            f(centre - dx, std::span<double>(fm));
            for (std::size_t c = 0; c < dim; ++c) {
                const double s = fp[c] + fm[c];
                kr[c] += s * rule.kronrod[i];
                if (i % 2 == 0) ga[c] += s * rule.gauss[i / 2];
            }
        }
        double* v = values.data() + slot * dim;
        double* e = errors.data() + slot * dim;
        for (std::size_t c = 0; c < dim; ++c) {
            v[c] = kr[c] * half;
            e[c] = std::max(std::abs(kr[c] - ga[c]) * half,
                            std::abs(v[c]) * 2.0 * std::numeric_limits<double>::epsilon());
        }
    };

    auto worst_of = [&](std::size_t slot) {
        const double* e = errors.data() + slot * dim;
        return *std::max_element(e, e + dim);
    };

    auto by_error = [](const Segment& x, const Segment& y) { return x.worst < y.worst; };
    std::priority_queue<Segment, std::vector<Segment>, decltype(by_error)> heap(by_error);

    QuadratureResult out;
    out.value.assign(dim, 0.0);
    out.error.assign(dim, 0.0);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        values.resize(values.size() + dim);
        errors.resize(errors.size() + dim);
        evaluate(breaks[i], breaks[i + 1], i);
        heap.push({breaks[i], breaks[i + 1], worst_of(i), i});
        for (std::size_t c = 0; c < dim; ++c) {
            out.value[c] += values[i * dim + c];
            out.error[c] += errors[i * dim + c];
        }
    }

    auto converged = [&] {
        return std::all_of(out.error.begin(), out.error.end(),
                           [&](double e) { return e <= opts.abs_tol; });
    };

    while (!converged() && out.subdivisions < opts.max_subdivisions) {
        const Segment seg = heap.top();
        heap.pop();
        const double mid = 0.5 * (seg.lo + seg.hi);
        if (!(mid > seg.lo && mid < seg.hi)) break;  // interval exhausted at double precision

        const std::size_t left = seg.slot;
        const std::size_t right = values.size() / dim;
        values.resize(values.size() + dim);
        errors.resize(errors.size() + dim);
        std::copy_n(values.begin() + left * dim, dim, old_v.begin());
        std::copy_n(errors.begin() + left * dim, dim, old_e.begin());

        evaluate(seg.lo, mid, left);
        evaluate(mid, seg.hi, right);
        for (std::size_t c = 0; c < dim; ++c) {
            out.value[c] += values[left * dim + c] + values[right * dim + c] - old_v[c];
            out.error[c] += errors[left * dim + c] + errors[right * dim + c] - old_e[c];
        }
        heap.push({seg.lo, mid, worst_of(left), left});
        heap.push({mid, seg.hi, worst_of(right), right});
        ++out.subdivisions;
    }

    // Re-sum to shed the drift of incremental updates.
    std::fill(out.value.begin(), out.value.end(), 0.0);
    std::fill(out.error.begin(), out.error.end(), 0.0);
    while (!heap.empty()) {
        const auto slot = heap.top().slot;
        heap.pop();
        for (std::size_t c = 0; c < dim; ++c) {
            out.value[c] += values[slot * dim + c];
            out.error[c] += errors[slot * dim + c];
        }
    }
    out.converged = converged();
    return out;
}

template <class F>
QuadratureResult integrate_adaptive(F&& f, std::size_t dim, double a, double b,
                                    const QuadratureOptions& opts = {}) {
    const std::array<double, 2> breaks{a, b};
    return integrate_adaptive(std::forward<F>(f), dim, std::span<const double>(breaks), opts);
}

}  // namespace pegfx
