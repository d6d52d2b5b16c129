#include "femplex/mesh.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>
#include <sstream>

using namespace femplex;

namespace {

MeshPlex single_triangle() {
    return build_from_cells(2, {{0, 1, 2}}, {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}},
                            CellShape::triangle);
}

MeshPlex two_triangles() {
    // Unit square split by the main diagonal.
    return build_from_cells(2, {{0, 1, 2}, {0, 2, 3}},
                            {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}},
                            CellShape::triangle);
}

void check_transpose(const MeshPlex& m) {
    for (PointId p = 0; p < m.num_points(); ++p) {
        for (PointId q : m.cone(p).points) {
            const auto sup = m.support(q);
            REQUIRE(std::find(sup.begin(), sup.end(), p) != sup.end());
        }
        for (PointId q : m.support(p)) {
            const auto cn = m.cone(q).points;
            REQUIRE(std::find(cn.begin(), cn.end(), p) != cn.end());
        }
        const auto sup = m.support(p);
        REQUIRE(std::is_sorted(sup.begin(), sup.end()));
    }
}

void check_strata_partition(const MeshPlex& m) {
    std::vector<int> seen_h(m.num_points(), 0), seen_d(m.num_points(), 0);
    for (int l = 0; l <= m.dim(); ++l) {
        const auto [hs, he] = m.height_stratum(l);
        for (PointId p = hs; p < he; ++p) ++seen_h[p];
        const auto [ds, de] = m.depth_stratum(l);
        for (PointId p = ds; p < de; ++p) ++seen_d[p];
    }
    for (PointId p = 0; p < m.num_points(); ++p) {
        REQUIRE(seen_h[p] == 1);
        REQUIRE(seen_d[p] == 1);
        REQUIRE(m.depth(p) + m.height(p) == m.dim());
    }
}

} // namespace

TEST_CASE("single triangle interpolates to 7 DAG points") {
    const auto m = single_triangle();
    REQUIRE(m.num_points() == 7);
    REQUIRE(m.num_cells() == 1);
    REQUIRE(m.num_vertices() == 3);
    REQUIRE(m.num_edges() == 3);
    // Numbering convention: cell 0, vertices 1..3, edges 4..6.
    REQUIRE(m.cone(0).points[0] == 4);
    REQUIRE(m.cone(0).points[2] == 6);
}

TEST_CASE("two triangles share the diagonal edge") {
    const auto m = two_triangles();
    REQUIRE(m.num_points() == 11);
    REQUIRE(m.num_cells() == 2);
    REQUIRE(m.num_vertices() == 4);
    REQUIRE(m.num_edges() == 5);
}

TEST_CASE("1D mesh with 2 cells") {
    const auto m = unit_interval_mesh(2);
    REQUIRE(m.num_points() == 5);
    for (PointId c = 0; c < m.num_cells(); ++c) REQUIRE(m.cone(c).size() == 2);
    const auto [ds, de] = m.depth_stratum(1);
    REQUIRE(de - ds == 2); // cells at depth 1
}

TEST_CASE("height strata") {
    const auto m1 = single_triangle();
    auto [cs, ce] = m1.height_stratum(0);
    REQUIRE(ce - cs == 1);
    auto [vs, ve] = m1.height_stratum(2);
    REQUIRE(ve - vs == 3);

    const auto m2 = two_triangles();
    auto [es, ee] = m2.height_stratum(1);
    REQUIRE(ee - es == 5);

    REQUIRE_THROWS_AS(m1.height_stratum(3), std::out_of_range);
    REQUIRE_THROWS_AS(m1.height_stratum(-1), std::out_of_range);
}

TEST_CASE("depth strata") {
    const auto m = single_triangle();
    auto [vs, ve] = m.depth_stratum(0);
    REQUIRE(ve - vs == 3);
    auto [cs, ce] = m.depth_stratum(2);
    REQUIRE(ce - cs == 1);
}

TEST_CASE("cone and support") {
    const auto m = two_triangles();
    // T0 = (v0,v1,v2): edges (0,1) -> 6, (1,2) -> 7, (2,0) stored (0,2) -> 8.
    const auto c0 = m.cone(0);
    REQUIRE(c0.size() == 3);
    REQUIRE(c0.points[0] == 6);
    REQUIRE(c0.points[1] == 7);
    REQUIRE(c0.points[2] == 8);
    REQUIRE(c0.orientations[0] == 0);
    REQUIRE(c0.orientations[1] == 0);
    REQUIRE(c0.orientations[2] == -1); // traversed backward

    // Shared edge (v0,v2) = point 8 is covered by both cells.
    const auto sup = m.support(8);
    REQUIRE(sup.size() == 2);
    REQUIRE(sup[0] == 0);
    REQUIRE(sup[1] == 1);

    // Vertices cover nothing.
    REQUIRE(m.cone(2).size() == 0);

    REQUIRE_THROWS_AS(m.cone(99), std::out_of_range);
    REQUIRE_THROWS_AS(m.support(-1), std::out_of_range);
}

TEST_CASE("transitive closure of a triangle cell") {
    const auto m = single_triangle();
    const auto cl = m.transitive_closure(0);
    REQUIRE(cl.size() == 7);
    REQUIRE(cl[0] == ClosurePoint{0, 0});
    // Edges in cone order, then vertices in the cell's vertex order.
    REQUIRE(cl[1].point == 4);
    REQUIRE(cl[2].point == 5);
    REQUIRE(cl[3].point == 6);
    REQUIRE(cl[4].point == 1);
    REQUIRE(cl[5].point == 2);
    REQUIRE(cl[6].point == 3);
}

TEST_CASE("closure of edge and vertex") {
    const auto m = single_triangle();
    const auto cl = m.transitive_closure(4); // edge (v0,v1)
    REQUIRE(cl.size() == 3);
    REQUIRE(cl[0].point == 4);
    REQUIRE(cl[1].point == 1);
    REQUIRE(cl[2].point == 2);

    const auto cv = m.transitive_closure(2);
    REQUIRE(cv.size() == 1);
    REQUIRE(cv[0] == ClosurePoint{2, 0});
}

TEST_CASE("closure vertices follow each cell's own vertex order") {
    const auto m = two_triangles();
    // T1 = (v0,v2,v3): vertices 2, 4, 5 in that order.
    const auto cl = m.transitive_closure(1);
    REQUIRE(cl.size() == 7);
    REQUIRE(cl[4].point == 2);
    REQUIRE(cl[5].point == 4);
    REQUIRE(cl[6].point == 5);
}

TEST_CASE("cone/support transpose on generated meshes") {
    check_transpose(unit_interval_mesh(5));
    check_transpose(unit_square_triangles(4));
    check_transpose(unit_square_quads(3));
    check_transpose(unit_cube_tets(2));
}

TEST_CASE("strata partition the point range") {
    check_strata_partition(unit_interval_mesh(4));
    check_strata_partition(unit_square_triangles(3));
    check_strata_partition(unit_square_quads(3));
    check_strata_partition(unit_cube_tets(2));
}

TEST_CASE("closure sizes per cell shape") {
    const auto tri = unit_square_triangles(3);
    auto [tc0, tc1] = tri.height_stratum(0);
    for (PointId c = tc0; c < tc1; ++c) REQUIRE(tri.transitive_closure(c).size() == 7);

    const auto quad = unit_square_quads(3);
    auto [qc0, qc1] = quad.height_stratum(0);
    for (PointId c = qc0; c < qc1; ++c) REQUIRE(quad.transitive_closure(c).size() == 9);

    const auto tet = unit_cube_tets(2);
    auto [xc0, xc1] = tet.height_stratum(0);
    for (PointId c = xc0; c < xc1; ++c) REQUIRE(tet.transitive_closure(c).size() == 15);
}

TEST_CASE("generator point counts") {
    const auto interval = unit_interval_mesh(3);
    REQUIRE(interval.num_points() == 7);

    const auto tri = unit_square_triangles(2);
    REQUIRE(tri.num_cells() == 8);
    REQUIRE(tri.num_vertices() == 9);
    REQUIRE(tri.num_edges() == 16);

    const auto quad = unit_square_quads(2);
    REQUIRE(quad.num_cells() == 4);
    REQUIRE(quad.num_vertices() == 9);
    REQUIRE(quad.num_edges() == 12);

    // One cube: 6 tets, 8 vertices, 18 faces, 19 edges. Euler: 8-19+18-6 = 1.
    const auto tet = unit_cube_tets(1);
    REQUIRE(tet.num_cells() == 6);
    REQUIRE(tet.num_vertices() == 8);
    REQUIRE(tet.num_faces() == 18);
    REQUIRE(tet.num_edges() == 19);
    REQUIRE(tet.num_points() == 51);
}

TEST_CASE("tet closure lists the cell's own vertices in order") {
    // Two tets sharing face (v1,v2,v3); the second sees the stored loop
    // through a nontrivial dihedral tag.
    const auto m = build_from_cells(3, {{0, 1, 2, 3}, {1, 2, 3, 4}},
                                    {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}},
                                    CellShape::tetrahedron);
    for (PointId c = 0; c < 2; ++c) {
        const auto cl = m.transitive_closure(c);
        REQUIRE(cl.size() == 15);
        std::vector<PointId> verts;
        for (const auto& cp : cl)
            if (m.depth(cp.point) == 0) verts.push_back(cp.point);
        const std::vector<PointId> expect =
            c == 0 ? std::vector<PointId>{2, 3, 4, 5} : std::vector<PointId>{3, 4, 5, 6};
        REQUIRE(verts == expect);
    }
    check_transpose(m);
    check_strata_partition(m);
}

TEST_CASE("construction is deterministic") {
    const auto a = unit_square_triangles(3);
    const auto b = unit_square_triangles(3);
    REQUIRE(a.num_points() == b.num_points());
    for (PointId p = 0; p < a.num_points(); ++p) {
        const auto ca = a.cone(p), cb = b.cone(p);
        REQUIRE(std::equal(ca.points.begin(), ca.points.end(), cb.points.begin(), cb.points.end()));
        REQUIRE(a.transitive_closure(p) == b.transitive_closure(p));
    }
}

TEST_CASE("hybrid quad+triangle mesh") {
    // Quad (0,1,2,3) and triangle (1,4,2) glued along edge (1,2).
    const auto m = build_from_cells(
        2, {{0, 1, 2, 3}, {1, 4, 2}},
        {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {2, 0.5}},
        {CellShape::quad, CellShape::triangle});
    REQUIRE(m.num_cells() == 2);
    REQUIRE(m.num_edges() == 6);
    REQUIRE(m.num_points() == 13);
    REQUIRE(m.transitive_closure(0).size() == 9);
    REQUIRE(m.transitive_closure(1).size() == 7);
    check_transpose(m);
    check_strata_partition(m);
}

TEST_CASE("construction errors") {
    const std::vector<std::vector<double>> coords = {{0, 0}, {1, 0}, {0, 1}};
    REQUIRE_THROWS_AS(build_from_cells(2, {{0, 1, 5}}, coords, CellShape::triangle),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(build_from_cells(2, {{0, 1, 2}, {2, 0, 1}}, coords, CellShape::triangle),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(build_from_cells(2, {{0, 1, 2}, {0, 1, 2, 2}}, coords, CellShape::triangle),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(build_from_cells(2, {{0, 1, 1}}, coords, CellShape::triangle),
                      std::invalid_argument);
}

TEST_CASE("ascii mesh reader") {
    std::istringstream in("2 4 2 triangle\n"
                          "0 0\n1 0\n1 1\n0 1\n"
                          "0 1 2\n0 2 3\n");
    const auto m = read_mesh(in);
    REQUIRE(m.num_points() == 11);
    REQUIRE(m.num_cells() == 2);
    REQUIRE(m.vertex_coordinates(4)[0] == 1.0);
    REQUIRE(m.vertex_coordinates(4)[1] == 1.0);

    std::istringstream bad("2 3 1 pentagon\n");
    REQUIRE_THROWS_AS(read_mesh(bad), std::runtime_error);
    std::istringstream truncated("2 3 1 triangle\n0 0\n1 0\n");
    REQUIRE_THROWS_AS(read_mesh(truncated), std::runtime_error);
}

TEST_CASE("point centroids") {
    const auto m = single_triangle();
    const auto mid = m.point_centroid(4); // edge (v0,v1)
    REQUIRE(mid[0] == Catch::Approx(0.5));
    REQUIRE(mid[1] == Catch::Approx(0.0));
    const auto cc = m.point_centroid(0);
    REQUIRE(cc[0] == Catch::Approx(1.0 / 3.0));
    REQUIRE(cc[1] == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("oriented cone traversal convention") {
    // o = 0 is stored order; o = -1 full reversal for any cone size.
    REQUIRE(oriented_cone_index(0, 0, 2) == 0);
    REQUIRE(oriented_cone_index(-1, 0, 2) == 1);
    REQUIRE(oriented_cone_index(-1, 1, 2) == 0);
    REQUIRE(oriented_cone_index(-1, 0, 3) == 2);
    REQUIRE(oriented_cone_index(1, 0, 3) == 1);
    REQUIRE(reverse_orientation(reverse_orientation(-2)) == -2);
    REQUIRE(compose_orientation(-1, 0) == -1);
    REQUIRE(compose_orientation(-1, -1) == 0);
    REQUIRE(compose_orientation(1, -1) == -1);
}
