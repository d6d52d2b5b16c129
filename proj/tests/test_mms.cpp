#include "femplex/mms.hpp"

#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace femplex;
using namespace femtest;

TEST_CASE("interpolant of a linear function has vanishing error") {
    for (const Element element : {Element{CellShape::triangle, 1}, Element{CellShape::triangle, 2},
                                  Element{CellShape::quad, 1}}) {
        CAPTURE(shape_name(element.shape), element.degree);
        auto prob = make_problem(element.shape == CellShape::quad ? unit_square_quads(3)
                                                                  : unit_square_triangles(3),
                                 element);
        const SpatialFn f = [](std::span<const double> x) { return x[0] + x[1]; };
        const BoundaryFn bc = [&](std::span<const double> x, int, int) { return f(x); };
        const auto u = interpolate_global(prob.mesh, prob.section, prob.gmap, f);
        CHECK(l2_error(prob.mesh, prob.section, prob.gmap, element, u, bc, f) < 1e-14);
    }
}

TEST_CASE("error of the zero field equals the reference norm") {
    // ||prod sin(pi x_d)||_L2 over the unit domain is (1/sqrt 2)^dim.
    {
        auto prob = make_problem(unit_interval_mesh(16), {CellShape::segment, 1});
        const auto mc = manufactured_sine(1);
        const std::vector<double> zero(static_cast<std::size_t>(prob.gmap.num_global), 0.0);
        const double err = l2_error(prob.mesh, prob.section, prob.gmap, {CellShape::segment, 1},
                                    zero, {}, mc.exact);
        CHECK(err == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    }
    {
        auto prob = make_problem(unit_square_triangles(8), {CellShape::triangle, 1});
        const auto mc = manufactured_sine(2);
        const std::vector<double> zero(static_cast<std::size_t>(prob.gmap.num_global), 0.0);
        const double err = l2_error(prob.mesh, prob.section, prob.gmap, {CellShape::triangle, 1},
                                    zero, {}, mc.exact);
        CHECK(err == Catch::Approx(0.5).epsilon(1e-6));
    }
}

TEST_CASE("solutions in the trial space are recovered exactly") {
    const int ns[] = {4};
    for (const Element element : {Element{CellShape::triangle, 1}, Element{CellShape::triangle, 2},
                                  Element{CellShape::quad, 1}}) {
        CAPTURE(shape_name(element.shape), element.degree);
        const MeshFactory factory = element.shape == CellShape::quad ? unit_square_quads
                                                                     : unit_square_triangles;
        const auto study = run_convergence(factory, element, manufactured_linear(2), ns);
        CHECK(study.levels[0].error < 1e-10);
    }
    // x^2 + y^2 lies in the quadratic triangle space.
    const auto study = run_convergence(unit_square_triangles, {CellShape::triangle, 2},
                                       manufactured_quadratic(2), ns);
    CHECK(study.levels[0].error < 1e-10);
}

TEST_CASE("linear elements converge at second order") {
    const int ns[] = {8, 16, 32};
    const auto study = run_convergence(unit_square_triangles, {CellShape::triangle, 1},
                                       manufactured_sine(2), ns);
    REQUIRE(study.rates.size() == 2);
    CAPTURE(study.rates);
    for (const double r : study.rates) CHECK(r == Catch::Approx(2.0).margin(0.15));
    CHECK(study.levels[0].error > study.levels[1].error);
    CHECK(study.levels[1].error > study.levels[2].error);
}

TEST_CASE("quadratic elements converge at third order") {
    const int ns[] = {4, 8, 16};
    const auto study = run_convergence(unit_square_triangles, {CellShape::triangle, 2},
                                       manufactured_sine(2), ns);
    CAPTURE(study.rates);
    for (const double r : study.rates) CHECK(r == Catch::Approx(3.0).margin(0.2));
}

TEST_CASE("bilinear elements converge at second order") {
    const int ns[] = {8, 16, 32};
    const auto study = run_convergence(unit_square_quads, {CellShape::quad, 1},
                                       manufactured_sine(2), ns);
    CAPTURE(study.rates);
    for (const double r : study.rates) CHECK(r == Catch::Approx(2.0).margin(0.15));
}

TEST_CASE("convergence on intervals and tetrahedra") {
    {
        const int ns[] = {8, 16, 32};
        const auto p1 = run_convergence(unit_interval_mesh, {CellShape::segment, 1},
                                        manufactured_sine(1), ns);
        CAPTURE(p1.rates);
        for (const double r : p1.rates) CHECK(r == Catch::Approx(2.0).margin(0.15));
        const auto p2 = run_convergence(unit_interval_mesh, {CellShape::segment, 2},
                                        manufactured_sine(1), ns);
        CAPTURE(p2.rates);
        for (const double r : p2.rates) CHECK(r == Catch::Approx(3.0).margin(0.2));
    }
    {
        const int ns[] = {2, 4, 8};
        const auto study = run_convergence(unit_cube_tets, {CellShape::tetrahedron, 1},
                                           manufactured_sine(3), ns);
        CAPTURE(study.rates);
        CHECK(study.rates.back() == Catch::Approx(2.0).margin(0.4));
    }
}

TEST_CASE("study records level metadata") {
    const int ns[] = {4, 8};
    ConvergenceOptions opts;
    opts.record_time = false;
    const auto study = run_convergence(unit_square_triangles, {CellShape::triangle, 1},
                                       manufactured_sine(2), ns, opts);
    REQUIRE(study.levels.size() == 2);
    REQUIRE(study.rates.size() == 1);
    CHECK(study.levels[0].n == 4);
    CHECK(study.levels[0].h == Catch::Approx(0.25));
    CHECK(study.levels[0].num_global == 9);
    CHECK(study.levels[1].num_global == 49);
    CHECK(study.levels[0].newton_iterations == 1); // linear problem
    CHECK(study.levels[0].seconds == 0.0);

    const double recomputed = std::log(study.levels[0].error / study.levels[1].error) /
                              std::log(study.levels[0].h / study.levels[1].h);
    CHECK(study.rates[0] == Catch::Approx(recomputed));
}

TEST_CASE("convergence study surfaces solver failures") {
    const int ns[] = {4};
    ManufacturedCase mc;
    mc.model = model_bratu(8.0);
    mc.exact = [](std::span<const double>) { return 0.0; };
    CHECK_THROWS_AS(run_convergence(unit_square_triangles, {CellShape::triangle, 1}, mc, ns),
                    std::runtime_error);
    const int bad[] = {0};
    CHECK_THROWS_AS(run_convergence(unit_square_triangles, {CellShape::triangle, 1},
                                    manufactured_linear(2), bad),
                    std::invalid_argument);
}
