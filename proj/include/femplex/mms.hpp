#pragma once

#include "femplex/assembly.hpp"
#include "femplex/solver.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace femplex {

/// L2 distance between a discrete scalar field and a reference function,
/// integrated cell by cell with a rule of degree 2*(element degree)+2 so the
/// quadrature error stays below the discretization error being measured.
inline double l2_error(const MeshPlex& mesh, const Section& section, const GlobalMap& gmap,
                       Element element, std::span<const double> u_global, const BoundaryFn& bc,
                       const SpatialFn& reference) {
    if (section.num_fields() != 1 || section.components(0) != 1)
        throw std::invalid_argument("l2_error expects a scalar single-field section");
    const auto u_local = global_to_local(mesh, section, gmap, u_global, bc);
    const auto rule = make_quadrature(element.shape, 2 * element.degree + 2);
    const auto tab = tabulate(element, rule);
    const Section coord_section = coordinate_section(mesh);

    double err2 = 0.0;
    std::vector<double> u_e;
    const auto [c0, c1] = mesh.height_stratum(0);
    for (PointId cell = c0; cell < c1; ++cell) {
        const auto geo = compute_cell_geometry(mesh, coord_section, mesh.coordinates(), cell, rule);
        u_e.clear();
        detail::for_each_closure_dof(mesh, section, cell,
                                     [&](int i) { u_e.push_back(u_local[static_cast<std::size_t>(i)]); });
        for (int q = 0; q < tab.nq; ++q) {
            double uh = 0.0;
            for (int i = 0; i < tab.nb; ++i)
                uh += tab.basis(q, i) * u_e[static_cast<std::size_t>(i)];
            const double diff = uh - reference(geo.point(q));
            err2 += geo.scaling[static_cast<std::size_t>(q)] * diff * diff;
        }
    }
    return std::sqrt(err2);
}

/// A model paired with the exact solution its forcing manufactures; the
/// exact solution also provides the boundary values.
struct ManufacturedCase {
    PointwiseModel model;
    SpatialFn exact;
};

/// u = prod_d sin(pi x_d), forcing dim*pi^2*u.
inline ManufacturedCase manufactured_sine(int dim) {
    constexpr double pi = std::numbers::pi;
    const SpatialFn exact = [dim](std::span<const double> x) {
        double u = 1.0;
        for (int d = 0; d < dim; ++d) u *= std::sin(pi * x[static_cast<std::size_t>(d)]);
        return u;
    };
    ManufacturedCase mc;
    mc.model = model_poisson(
        [dim, exact](std::span<const double> x) { return dim * pi * pi * exact(x); });
    mc.model.exact_solution = exact;
    mc.exact = exact;
    return mc;
}

/// u = sum_d x_d, zero forcing. In the span of every supported element.
inline ManufacturedCase manufactured_linear(int dim) {
    const SpatialFn exact = [dim](std::span<const double> x) {
        double u = 0.0;
        for (int d = 0; d < dim; ++d) u += x[static_cast<std::size_t>(d)];
        return u;
    };
    ManufacturedCase mc;
    mc.model = model_poisson();
    mc.model.exact_solution = exact;
    mc.exact = exact;
    return mc;
}

/// Bratu operator with the sine product manufactured back in: the forcing
/// g = dim*pi^2*u_exact - lambda*exp(u_exact) makes u_exact solve
/// -div(grad u) - lambda*exp(u) = g.
inline ManufacturedCase manufactured_bratu(double lambda, int dim) {
    constexpr double pi = std::numbers::pi;
    const SpatialFn exact = [dim](std::span<const double> x) {
        double u = 1.0;
        for (int d = 0; d < dim; ++d) u *= std::sin(pi * x[static_cast<std::size_t>(d)]);
        return u;
    };
    ManufacturedCase mc;
    mc.model = model_bratu(lambda);
    const PointFn base_f0 = mc.model.f0;
    mc.model.f0 = [base_f0, exact, dim, lambda](const PointValues& v, std::span<double> f0) {
        base_f0(v, f0);
        const double ue = exact(v.x);
        f0[0] -= dim * pi * pi * ue - lambda * std::exp(ue);
    };
    mc.model.residual_flops_per_qp += 6;
    mc.model.exact_solution = exact;
    mc.exact = exact;
    return mc;
}

/// u = sum_d x_d^2, forcing -2*dim.
inline ManufacturedCase manufactured_quadratic(int dim) {
    const SpatialFn exact = [dim](std::span<const double> x) {
        double u = 0.0;
        for (int d = 0; d < dim; ++d) u += x[static_cast<std::size_t>(d)] * x[static_cast<std::size_t>(d)];
        return u;
    };
    ManufacturedCase mc;
    mc.model = model_poisson([dim](std::span<const double>) { return -2.0 * dim; });
    mc.model.exact_solution = exact;
    mc.exact = exact;
    return mc;
}

struct ConvergenceLevel {
    int n = 0;               ///< refinement parameter passed to the mesh factory
    double h = 0.0;          ///< 1 / n
    int num_global = 0;      ///< unconstrained dofs
    double error = 0.0;      ///< L2 error against the exact solution
    double seconds = 0.0;    ///< assemble + solve wall time
    int newton_iterations = 0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceLevel> levels;
    /// rates[i] = log(e_i / e_{i+1}) / log(h_i / h_{i+1})
    std::vector<double> rates;
};

struct ConvergenceOptions {
    AssemblerOptions assembler;
    NewtonOptions newton;
    bool record_time = true;
};

using MeshFactory = std::function<MeshPlex(int)>;

/// Solve the manufactured problem on a family of meshes and report L2
/// errors and observed orders between consecutive levels.
inline ConvergenceStudy run_convergence(const MeshFactory& make_mesh, Element element,
                                        const ManufacturedCase& mc, std::span<const int> ns,
                                        ConvergenceOptions opts = {}) {
    ConvergenceStudy study;
    for (const int n : ns) {
        if (n < 1) throw std::invalid_argument("refinement parameter must be >= 1");
        const MeshPlex mesh = make_mesh(n);
        const Section base = create_section(mesh, {{element_slots_per_depth(element), 1}});
        const auto [section, gmap] = mark_boundary_constrained(mesh, base, 0);
        const BoundaryFn bc = [&mc](std::span<const double> x, int, int) { return mc.exact(x); };

        Assembler assembler(mesh, section, gmap, element, mc.model, opts.assembler);
        assembler.set_boundary_values(bc);

        const auto start = std::chrono::steady_clock::now();
        const std::vector<double> u0(static_cast<std::size_t>(gmap.num_global), 0.0);
        const NewtonReport report = newton_solve(assembler, u0, opts.newton);
        const auto stop = std::chrono::steady_clock::now();
        if (!report.converged)
            throw std::runtime_error("nonlinear solve failed at refinement " + std::to_string(n) +
                                     " (" + to_string(report.reason) + ")");

        ConvergenceLevel level;
        level.n = n;
        level.h = 1.0 / n;
        level.num_global = gmap.num_global;
        level.error = l2_error(mesh, section, gmap, element, report.solution, bc, mc.exact);
        level.newton_iterations = report.iterations;
        if (opts.record_time)
            level.seconds = std::chrono::duration<double>(stop - start).count();
        study.levels.push_back(level);
    }
    for (std::size_t i = 0; i + 1 < study.levels.size(); ++i) {
        const auto& a = study.levels[i];
        const auto& b = study.levels[i + 1];
        study.rates.push_back(std::log(a.error / b.error) / std::log(a.h / b.h));
    }
    return study;
}

} // namespace femplex
