#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace femplex {

/// State handed to pointwise callbacks at one quadrature point. grad_u is
/// n_components x dim row major; a / grad_a carry an auxiliary (coefficient)
/// field and are empty when the problem has none.
struct PointValues {
    int dim = 0;
    int n_components = 0;
    std::span<const double> x;
    std::span<const double> u;
    std::span<const double> grad_u;
    std::span<const double> a;
    std::span<const double> grad_a;
};

using PointFn = std::function<void(const PointValues&, std::span<double>)>;
using SpatialFn = std::function<double(std::span<const double>)>;

/// A weak-form integrand split into a test-function term f0 (length c) and a
/// test-gradient term f1 (c x dim), plus the four derivative blocks used for
/// Jacobians:
///
///   f00[i*c + j]                      = d f0[i]        / d u[j]
///   f01[(i*c + j)*dim + e]            = d f0[i]        / d grad_u[j*dim+e]
///   f10[(i*dim + d)*c + j]            = d f1[i*dim+d]  / d u[j]
///   f11[((i*dim + d)*c + j)*dim + e]  = d f1[i*dim+d]  / d grad_u[j*dim+e]
///
/// Output spans arrive zero-filled; absent blocks stay null and act as zero.
struct PointwiseModel {
    std::string name;
    int n_components = 1;
    int n_aux_components = 0;
    bool spd = false; ///< constrained Jacobian is symmetric positive definite

    PointFn f0;
    PointFn f1;
    PointFn f00;
    PointFn f01;
    PointFn f10;
    PointFn f11;

    SpatialFn exact_solution; ///< optional, for error studies

    /// Model arithmetic per quadrature point, beyond the basis/geometry work
    /// the integrator itself counts.
    int residual_flops_per_qp = 0;
    int jacobian_flops_per_qp = 0;
};

/// -div(grad u) = g: f0 = -g, f1 = grad u.
inline PointwiseModel model_poisson(SpatialFn forcing = {}) {
    PointwiseModel m;
    m.name = "poisson";
    m.spd = true;
    m.f0 = [g = std::move(forcing)](const PointValues& v, std::span<double> f0) {
        f0[0] = g ? -g(v.x) : 0.0;
    };
    m.f1 = [](const PointValues& v, std::span<double> f1) {
        for (int d = 0; d < v.dim; ++d) f1[static_cast<std::size_t>(d)] = v.grad_u[static_cast<std::size_t>(d)];
    };
    m.f11 = [](const PointValues& v, std::span<double> f11) {
        for (int d = 0; d < v.dim; ++d) f11[static_cast<std::size_t>(d * v.dim + d)] = 1.0;
    };
    m.residual_flops_per_qp = 1;
    m.jacobian_flops_per_qp = 0;
    return m;
}

/// c*u = g (no flux term): f0 = c*u - g.
inline PointwiseModel model_mass_reaction(double coefficient, SpatialFn forcing = {}) {
    PointwiseModel m;
    m.name = "mass";
    m.spd = coefficient > 0.0;
    m.f0 = [c = coefficient, g = std::move(forcing)](const PointValues& v, std::span<double> f0) {
        f0[0] = c * v.u[0] - (g ? g(v.x) : 0.0);
    };
    m.f00 = [c = coefficient](const PointValues&, std::span<double> f00) { f00[0] = c; };
    m.residual_flops_per_qp = 2;
    m.jacobian_flops_per_qp = 0;
    return m;
}

/// -div(grad u) = lambda * exp(u): f0 = -lambda*exp(u), f1 = grad u. The
/// solution branch folds near lambda ~ 6.81 on the unit square; beyond the
/// fold Newton cannot converge.
inline PointwiseModel model_bratu(double lambda) {
    PointwiseModel m;
    m.name = "bratu";
    m.spd = false;
    m.f0 = [lambda](const PointValues& v, std::span<double> f0) {
        f0[0] = -lambda * std::exp(v.u[0]);
    };
    m.f1 = [](const PointValues& v, std::span<double> f1) {
        for (int d = 0; d < v.dim; ++d) f1[static_cast<std::size_t>(d)] = v.grad_u[static_cast<std::size_t>(d)];
    };
    m.f00 = [lambda](const PointValues& v, std::span<double> f00) {
        f00[0] = -lambda * std::exp(v.u[0]);
    };
    m.f11 = [](const PointValues& v, std::span<double> f11) {
        for (int d = 0; d < v.dim; ++d) f11[static_cast<std::size_t>(d * v.dim + d)] = 1.0;
    };
    m.residual_flops_per_qp = 3;
    m.jacobian_flops_per_qp = 3;
    return m;
}

// ---------------------------------------------------------------------------

/// Result of the finite-difference consistency check between (f0, f1) and
/// the declared derivative blocks. block_error is indexed f00, f01, f10, f11.
struct DerivativeCheck {
    bool passed = false;
    double max_rel_error = 0.0;
    std::array<double, 4> block_error{};
};

namespace detail {

inline void eval_block(const PointFn& fn, const PointValues& v, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    if (fn) fn(v, out);
}

} // namespace detail

/// Centered-difference check of f00/f01/f10/f11 against f0/f1 at randomly
/// sampled states. Relative error is scaled by max(1, |analytic|, |fd|) per
/// entry; the check passes when the worst entry stays under `tol`.
inline DerivativeCheck verify_model_derivatives(const PointwiseModel& model, int dim,
                                                double step = 1e-6, double tol = 1e-6,
                                                int num_samples = 8, unsigned seed = 1234) {
    const int c = model.n_components;
    const int na = model.n_aux_components;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);

    std::vector<double> x(static_cast<std::size_t>(dim));
    std::vector<double> u(static_cast<std::size_t>(c));
    std::vector<double> gu(static_cast<std::size_t>(c) * dim);
    std::vector<double> a(static_cast<std::size_t>(na));
    std::vector<double> ga(static_cast<std::size_t>(na) * dim);

    std::vector<double> f0p(u.size()), f0m(u.size());
    std::vector<double> f1p(gu.size()), f1m(gu.size());
    std::vector<double> f00(u.size() * u.size());
    std::vector<double> f01(u.size() * gu.size());
    std::vector<double> f10(gu.size() * u.size());
    std::vector<double> f11(gu.size() * gu.size());

    DerivativeCheck check;
    auto record = [&](int block, double analytic, double fd) {
        const double scale = std::max({1.0, std::abs(analytic), std::abs(fd)});
        const double rel = std::abs(fd - analytic) / scale;
        check.block_error[static_cast<std::size_t>(block)] =
            std::max(check.block_error[static_cast<std::size_t>(block)], rel);
        check.max_rel_error = std::max(check.max_rel_error, rel);
    };

    for (int sample = 0; sample < num_samples; ++sample) {
        for (auto& e : x) e = unit(rng);
        for (auto& e : u) e = sym(rng);
        for (auto& e : gu) e = sym(rng);
        for (auto& e : a) e = 0.5 + unit(rng); // keep coefficients away from zero
        for (auto& e : ga) e = sym(rng);
        const PointValues v{dim, c, x, u, gu, a, ga};

        detail::eval_block(model.f00, v, f00);
        detail::eval_block(model.f01, v, f01);
        detail::eval_block(model.f10, v, f10);
        detail::eval_block(model.f11, v, f11);

        for (int j = 0; j < c; ++j) {
            const double saved = u[static_cast<std::size_t>(j)];
            u[static_cast<std::size_t>(j)] = saved + step;
            detail::eval_block(model.f0, v, f0p);
            detail::eval_block(model.f1, v, f1p);
            u[static_cast<std::size_t>(j)] = saved - step;
            detail::eval_block(model.f0, v, f0m);
            detail::eval_block(model.f1, v, f1m);
            u[static_cast<std::size_t>(j)] = saved;
            for (int i = 0; i < c; ++i)
                record(0, f00[static_cast<std::size_t>(i * c + j)],
                       (f0p[static_cast<std::size_t>(i)] - f0m[static_cast<std::size_t>(i)]) / (2 * step));
            for (int i = 0; i < c * dim; ++i)
                record(2, f10[static_cast<std::size_t>(i * c + j)],
                       (f1p[static_cast<std::size_t>(i)] - f1m[static_cast<std::size_t>(i)]) / (2 * step));
        }
        for (int j = 0; j < c * dim; ++j) {
            const double saved = gu[static_cast<std::size_t>(j)];
            gu[static_cast<std::size_t>(j)] = saved + step;
            detail::eval_block(model.f0, v, f0p);
            detail::eval_block(model.f1, v, f1p);
            gu[static_cast<std::size_t>(j)] = saved - step;
            detail::eval_block(model.f0, v, f0m);
            detail::eval_block(model.f1, v, f1m);
            gu[static_cast<std::size_t>(j)] = saved;
            for (int i = 0; i < c; ++i)
                record(1, f01[static_cast<std::size_t>(i * c * dim + j)],
                       (f0p[static_cast<std::size_t>(i)] - f0m[static_cast<std::size_t>(i)]) / (2 * step));
            for (int i = 0; i < c * dim; ++i)
                record(3, f11[static_cast<std::size_t>(i * c * dim + j)],
                       (f1p[static_cast<std::size_t>(i)] - f1m[static_cast<std::size_t>(i)]) / (2 * step));
        }
    }
    check.passed = check.max_rel_error <= tol;
    return check;
}

} // namespace femplex
