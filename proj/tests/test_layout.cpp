#include "femplex/layout.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace femplex;

namespace {

MeshPlex single_triangle() {
    return build_from_cells(2, {{0, 1, 2}}, {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}},
                            CellShape::triangle);
}

MeshPlex two_triangles() {
    return build_from_cells(2, {{0, 1, 2}, {0, 2, 3}},
                            {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}},
                            CellShape::triangle);
}

Section p1(const MeshPlex& m, int components = 1) {
    std::vector<int> slots(static_cast<std::size_t>(m.dim()) + 1, 0);
    slots[0] = 1;
    return create_section(m, {{slots, components}});
}

Section p2(const MeshPlex& m, int components = 1) {
    std::vector<int> slots(static_cast<std::size_t>(m.dim()) + 1, 0);
    slots[0] = 1;
    slots[1] = 1;
    return create_section(m, {{slots, components}});
}

} // namespace

TEST_CASE("section dof counts and closure sizes") {
    const auto m = single_triangle();
    const auto sp2 = p2(m);
    REQUIRE(sp2.closure_size(m, 0) == 6);

    const auto sp1 = p1(m);
    REQUIRE(sp1.closure_size(m, 0) == 3);

    // P2 velocity (2 components) + P1 pressure.
    const auto mixed = create_section(m, {{{1, 1, 0}, 2}, {{1, 0, 0}, 1}});
    REQUIRE(mixed.closure_size(m, 0) == 15);
    REQUIRE(mixed.closure_field_size(m, 0, 0) == 12);
    REQUIRE(mixed.closure_field_size(m, 0, 1) == 3);

    REQUIRE_THROWS_AS(create_section(m, {{{1, 0}, 1}}), std::invalid_argument);
    REQUIRE_THROWS_AS(create_section(m, {{{1, -1, 0}, 1}}), std::invalid_argument);
}

TEST_CASE("offsets are the exclusive prefix sum, field innermost") {
    const auto m = two_triangles();
    const auto sec = create_section(m, {{{1, 1, 0}, 2}, {{1, 0, 0}, 1}});
    int expect = 0;
    for (PointId p = 0; p < m.num_points(); ++p)
        for (int f = 0; f < sec.num_fields(); ++f) {
            REQUIRE(sec.offset(p, f) == expect);
            expect += sec.dof(p, f);
        }
    REQUIRE(sec.total_size() == expect);
}

TEST_CASE("P1 closure extraction is the vertex order") {
    const auto m = single_triangle();
    const auto sec = p1(m);
    const std::vector<double> vec = {10, 20, 30};
    REQUIRE(vec_get_closure(m, sec, vec, 0) == std::vector<double>{10, 20, 30});
}

TEST_CASE("multi-field closure comes back field-contiguous") {
    const auto m = single_triangle();
    const auto sec = create_section(m, {{{1, 0, 0}, 1}, {{1, 0, 0}, 1}});
    // Interleaved by point in the local vector: (f0,f1) per vertex.
    const std::vector<double> vec = {1, 10, 2, 20, 3, 30};
    REQUIRE(vec_get_closure(m, sec, vec, 0) == std::vector<double>{1, 2, 3, 10, 20, 30});
}

TEST_CASE("shared P2 edge dof is seen identically from both cells") {
    const auto m = two_triangles();
    const auto sec = p2(m);
    std::vector<double> vec(static_cast<std::size_t>(sec.total_size()));
    for (std::size_t i = 0; i < vec.size(); ++i) vec[i] = static_cast<double>(i) + 1;
    const auto c0 = vec_get_closure(m, sec, vec, 0);
    const auto c1 = vec_get_closure(m, sec, vec, 1);
    // Shared edge is point 8: third edge slot of T0, first of T1.
    const double shared = vec[static_cast<std::size_t>(sec.offset(8, 0))];
    REQUIRE(c0[2] == shared);
    REQUIRE(c1[0] == shared);
}

TEST_CASE("set/get closure are mutually inverse") {
    const auto tri = two_triangles();
    const auto quadmesh = unit_square_quads(2);
    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);

    const auto roundtrip = [&](const MeshPlex& m, const Section& sec) {
        const auto [c0, c1] = m.height_stratum(0);
        for (PointId cell = c0; cell < c1; ++cell) {
            std::vector<double> values(static_cast<std::size_t>(sec.closure_size(m, cell)));
            for (auto& v : values) v = dist(rng);
            std::vector<double> vec(static_cast<std::size_t>(sec.total_size()), 0.0);
            vec_set_closure_add(m, sec, vec, cell, values);
            REQUIRE(vec_get_closure(m, sec, vec, cell) == values);
        }
    };
    for (int rep = 0; rep < 20; ++rep) {
        roundtrip(tri, p1(tri));
        roundtrip(tri, p2(tri));
        roundtrip(tri, create_section(tri, {{{1, 1, 0}, 2}, {{1, 0, 0}, 1}}));
        roundtrip(quadmesh, p2(quadmesh, 2));
    }
}

TEST_CASE("accumulation is additive") {
    const auto m = single_triangle();
    const auto sec = p1(m);
    std::vector<double> vec(3, 0.0);
    const std::vector<double> elem = {1, 2, 3};
    vec_set_closure_add(m, sec, vec, 0, elem);
    vec_set_closure_add(m, sec, vec, 0, elem);
    REQUIRE(vec == std::vector<double>{2, 4, 6});
}

TEST_CASE("shared edge accumulates both cells") {
    const auto m = two_triangles();
    const auto sec = p2(m);
    std::vector<double> vec(static_cast<std::size_t>(sec.total_size()), 0.0);
    // T0's closure: edges 6,7,8 then vertices; value slots 0..5.
    std::vector<double> e0 = {0, 0, 1.0, 0, 0, 0}; // edge 8 slot for T0
    std::vector<double> e1 = {2.0, 0, 0, 0, 0, 0}; // edge 8 slot for T1
    vec_set_closure_add(m, sec, vec, 0, e0);
    vec_set_closure_add(m, sec, vec, 1, e1);
    REQUIRE(vec[static_cast<std::size_t>(sec.offset(8, 0))] == 3.0);
}

TEST_CASE("negative orientation reverses multi-dof edge slots") {
    const auto m = two_triangles();
    const auto sec = create_section(m, {{{0, 2, 0}, 1}});
    std::vector<double> vec(static_cast<std::size_t>(sec.total_size()), 0.0);
    // T1 traverses the shared edge forward; write through T1.
    vec_set_closure_add(m, sec, vec, 1, std::vector<double>{1, 2, 3, 4, 5, 6});
    const auto seen = vec_get_closure(m, sec, vec, 0);
    // T0 traverses it backward: slots come back reversed.
    REQUIRE(seen[4] == 2.0);
    REQUIRE(seen[5] == 1.0);
    // Round trip through T0 still inverts exactly.
    std::vector<double> vec2(static_cast<std::size_t>(sec.total_size()), 0.0);
    vec_set_closure_add(m, sec, vec2, 0, seen);
    REQUIRE(vec_get_closure(m, sec, vec2, 0) == seen);
}

TEST_CASE("coordinate section extracts cell geometry in vertex order") {
    const auto m = two_triangles();
    const auto coords = coordinate_section(m);
    const auto xy = vec_get_closure(m, coords, m.coordinates(), 1);
    REQUIRE(xy == std::vector<double>{0, 0, 1, 1, 0, 1});
}

TEST_CASE("global map covers unconstrained dofs") {
    const auto m = unit_interval_mesh(4);
    auto sec = p1(m);
    const auto gmap0 = build_global_map(sec);
    REQUIRE(gmap0.num_global == sec.total_size());

    const auto [csec, gmap] = mark_boundary_constrained(m, sec, 0);
    REQUIRE(csec.num_constrained() == 2);
    REQUIRE(gmap.num_global == 3);
    std::vector<int> hits(3, 0);
    for (auto g : gmap.local_to_global)
        if (g != GlobalMap::kConstrained) ++hits[static_cast<std::size_t>(g)];
    REQUIRE(hits == std::vector<int>{1, 1, 1});
}

TEST_CASE("boundary marking on the unit square") {
    const auto m = unit_square_triangles(2);
    const auto [s1, g1] = mark_boundary_constrained(m, p1(m), 0);
    REQUIRE(s1.num_constrained() == 8);
    REQUIRE(g1.num_global == 1);

    const auto [s2, g2] = mark_boundary_constrained(m, p2(m), 0);
    REQUIRE(s2.num_constrained() == 16);
}

TEST_CASE("global_to_local with no constraints is the identity embedding") {
    const auto m = unit_interval_mesh(3);
    const auto sec = p1(m);
    const auto gmap = build_global_map(sec);
    const std::vector<double> g = {4, 5, 6, 7};
    const auto local = global_to_local(m, sec, gmap, g, nullptr);
    REQUIRE(local == g);
}

TEST_CASE("boundary values fill constrained dofs at dof locations") {
    const auto m = unit_interval_mesh(2);
    const auto [sec, gmap] = mark_boundary_constrained(m, p1(m), 0);
    const std::vector<double> g = {0.25};
    const auto local = global_to_local(m, sec, gmap, g,
                                       [](std::span<const double> x, int, int) { return x[0]; });
    // Vertices are points 2,3,4 at x = 0, 0.5, 1.
    REQUIRE(local == std::vector<double>{0.0, 0.25, 1.0});
}

TEST_CASE("P2 boundary edge dofs evaluate bc at edge midpoints") {
    const auto m = unit_square_triangles(2);
    const auto [sec, gmap] = mark_boundary_constrained(m, p2(m), 0);
    std::vector<double> g(static_cast<std::size_t>(gmap.num_global), 0.0);
    const auto local = global_to_local(m, sec, gmap, g,
                                       [](std::span<const double> x, int, int) { return x[0] + x[1]; });
    const auto [es, ee] = m.height_stratum(1);
    int checked = 0;
    for (PointId e = es; e < ee; ++e) {
        if (m.support(e).size() != 1) continue;
        const auto mid = m.point_centroid(e);
        REQUIRE(local[static_cast<std::size_t>(sec.offset(e, 0))] ==
                Catch::Approx(mid[0] + mid[1]).margin(1e-15));
        ++checked;
    }
    REQUIRE(checked == 8);
}

TEST_CASE("constrained residual entries never reach the global vector") {
    const auto m = unit_interval_mesh(4);
    const auto [sec, gmap] = mark_boundary_constrained(m, p1(m), 0);
    std::vector<double> local(static_cast<std::size_t>(sec.total_size()), 1.0);
    for (int i = 0; i < sec.total_size(); ++i)
        if (sec.is_constrained(i)) local[static_cast<std::size_t>(i)] = std::nan("");
    std::vector<double> g(static_cast<std::size_t>(gmap.num_global), 0.0);
    local_to_global_add(gmap, local, g);
    for (double v : g) REQUIRE(std::isfinite(v));

    std::vector<double> zero(local.size(), 0.0);
    std::vector<double> g2(g.size(), 7.0);
    local_to_global_add(gmap, zero, g2);
    REQUIRE(g2 == std::vector<double>(g.size(), 7.0));
}

TEST_CASE("global/local round trip without constraints") {
    const auto m = unit_square_quads(2);
    const auto sec = p1(m);
    const auto gmap = build_global_map(sec);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> g(static_cast<std::size_t>(gmap.num_global));
    for (auto& v : g) v = dist(rng);
    const auto local = global_to_local(m, sec, gmap, g, nullptr);
    std::vector<double> back(g.size(), 0.0);
    local_to_global_add(gmap, local, back);
    REQUIRE(back == g);
}

TEST_CASE("closure sizes bound the local size") {
    const auto m = unit_square_triangles(2);
    const auto sec = p2(m);
    const auto [c0, c1] = m.height_stratum(0);
    int total = 0;
    for (PointId cell = c0; cell < c1; ++cell) total += sec.closure_size(m, cell);
    REQUIRE(total >= sec.total_size());
}
