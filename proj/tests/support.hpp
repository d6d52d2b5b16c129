#pragma once

// Helpers shared by the test suites: canned pointwise models beyond the
// library ones, discretized-problem setup, and nodal interpolation.

#include "femplex/assembly.hpp"
#include "femplex/discretization.hpp"
#include "femplex/layout.hpp"
#include "femplex/mesh.hpp"
#include "femplex/physics.hpp"

#include <random>
#include <utility>
#include <vector>

namespace femtest {

using namespace femplex;

/// Diffusion with a spatially varying coefficient carried in the aux field:
/// f1 = a * grad u.
inline PointwiseModel model_variable_poisson(SpatialFn forcing = {}) {
    PointwiseModel m;
    m.name = "variable-poisson";
    m.n_aux_components = 1;
    m.spd = true;
    m.f0 = [g = std::move(forcing)](const PointValues& v, std::span<double> f0) {
        f0[0] = g ? -g(v.x) : 0.0;
    };
    m.f1 = [](const PointValues& v, std::span<double> f1) {
        for (int d = 0; d < v.dim; ++d)
            f1[static_cast<std::size_t>(d)] = v.a[0] * v.grad_u[static_cast<std::size_t>(d)];
    };
    m.f11 = [](const PointValues& v, std::span<double> f11) {
        for (int d = 0; d < v.dim; ++d) f11[static_cast<std::size_t>(d * v.dim + d)] = v.a[0];
    };
    return m;
}

/// Two coupled components with every derivative block nonzero:
///   f0 = (u0*u1, u1 + du0/dx)      f1 = (grad u0 + u1*ones, grad u1)
inline PointwiseModel model_two_component() {
    PointwiseModel m;
    m.name = "two-component";
    m.n_components = 2;
    m.f0 = [](const PointValues& v, std::span<double> f0) {
        f0[0] = v.u[0] * v.u[1];
        f0[1] = v.u[1] + v.grad_u[0];
    };
    m.f1 = [](const PointValues& v, std::span<double> f1) {
        for (int d = 0; d < v.dim; ++d) {
            f1[static_cast<std::size_t>(d)] = v.grad_u[static_cast<std::size_t>(d)] + v.u[1];
            f1[static_cast<std::size_t>(v.dim + d)] = v.grad_u[static_cast<std::size_t>(v.dim + d)];
        }
    };
    m.f00 = [](const PointValues& v, std::span<double> f00) {
        f00[0] = v.u[1];
        f00[1] = v.u[0];
        f00[3] = 1.0;
    };
    m.f01 = [](const PointValues& v, std::span<double> f01) {
        f01[static_cast<std::size_t>((1 * 2 + 0) * v.dim + 0)] = 1.0;
    };
    m.f10 = [](const PointValues& v, std::span<double> f10) {
        for (int d = 0; d < v.dim; ++d) f10[static_cast<std::size_t>((0 * v.dim + d) * 2 + 1)] = 1.0;
    };
    m.f11 = [](const PointValues& v, std::span<double> f11) {
        const int cd = 2 * v.dim;
        for (int i = 0; i < cd; ++i) f11[static_cast<std::size_t>(i * cd + i)] = 1.0;
    };
    return m;
}

/// A mesh together with a section/global map for one element. Keep the
/// instance alive (and in place) while assemblers reference it.
struct Problem {
    MeshPlex mesh;
    Section section;
    GlobalMap gmap;
};

inline Problem make_problem(MeshPlex mesh, Element element, int components = 1,
                            bool dirichlet_boundary = true) {
    Problem p{std::move(mesh), {}, {}};
    Section s = create_section(p.mesh, {{element_slots_per_depth(element), components}});
    if (dirichlet_boundary) {
        auto [sec, gmap] = mark_boundary_constrained(p.mesh, std::move(s), 0);
        p.section = std::move(sec);
        p.gmap = std::move(gmap);
    } else {
        p.gmap = build_global_map(s);
        p.section = std::move(s);
    }
    return p;
}

inline std::vector<double> random_vector(std::size_t n, unsigned seed, double lo = -1.0,
                                         double hi = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (auto& e : v) e = dist(rng);
    return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

inline double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double e : a) s += e * e;
    return std::sqrt(s);
}

} // namespace femtest
