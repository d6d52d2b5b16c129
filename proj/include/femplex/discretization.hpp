#pragma once

#include "femplex/layout.hpp"
#include "femplex/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace femplex {

/// Quadrature on a reference cell. Reference cells: segment [0,1], triangle
/// {(0,0),(1,0),(0,1)}, quad [0,1]^2, tetrahedron with unit legs.
struct QuadratureRule {
    CellShape shape = CellShape::segment;
    int degree = 0; ///< highest total polynomial degree integrated exactly
    int dim = 1;
    std::vector<double> points;  ///< nq x dim, row major
    std::vector<double> weights; ///< nq

    int num_points() const { return static_cast<int>(weights.size()); }
    std::span<const double> point(int q) const {
        return {points.data() + static_cast<std::size_t>(q) * dim, static_cast<std::size_t>(dim)};
    }
};

namespace detail {

/// Gauss nodes/weights for the weight (1-x)^alpha on [0,1] via the
/// Golub-Welsch eigenvalue method (alpha = 0 is plain Gauss-Legendre).
/// n points integrate (1-x)^alpha * p(x) exactly for deg p <= 2n-1.
inline void gauss_jacobi_01(int n, int alpha, std::vector<double>& nodes, std::vector<double>& weights) {
    const double a = alpha, b = 0.0;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const double s = 2 * k + a + b;
        jac(k, k) = k == 0 ? (b - a) / (a + b + 2) : (b * b - a * a) / (s * (s + 2));
        if (k > 0) {
            const double num = 4.0 * k * (k + a) * (k + b) * (k + a + b);
            const double den = s * s * (s + 1) * (s - 1);
            jac(k, k - 1) = jac(k - 1, k) = std::sqrt(num / den);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
    // Total mass of (1-x)^a (1+x)^b on [-1,1] with integer a, b = 0.
    double mu0 = 2.0;
    for (int i = 1; i <= alpha; ++i) mu0 *= 2.0 * i / (i + 1.0);
    nodes.resize(static_cast<std::size_t>(n));
    weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        nodes[static_cast<std::size_t>(i)] = 0.5 * (eig.eigenvalues()(i) + 1.0);
        const double v0 = eig.eigenvectors()(0, i);
        weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0 / std::pow(2.0, alpha + 1);
    }
}

inline QuadratureRule segment_rule(int degree) {
    QuadratureRule rule{CellShape::segment, degree, 1, {}, {}};
    std::vector<double> x, w;
    gauss_jacobi_01((degree + 2) / 2, 0, x, w);
    rule.points = x;
    rule.weights = w;
    return rule;
}

/// Collapsed-coordinate (conical product) rule, exact to any degree.
inline QuadratureRule conical_triangle(int degree) {
    const int n = (degree + 2) / 2;
    std::vector<double> u, wu, v, wv;
    gauss_jacobi_01(n, 0, u, wu);
    gauss_jacobi_01(n, 1, v, wv);
    QuadratureRule rule{CellShape::triangle, degree, 2, {}, {}};
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            rule.points.push_back(u[static_cast<std::size_t>(i)] * (1.0 - v[static_cast<std::size_t>(j)]));
            rule.points.push_back(v[static_cast<std::size_t>(j)]);
            rule.weights.push_back(wu[static_cast<std::size_t>(i)] * wv[static_cast<std::size_t>(j)]);
        }
    return rule;
}

inline QuadratureRule conical_tet(int degree) {
    const int n = (degree + 2) / 2;
    std::vector<double> u, wu, v, wv, w, ww;
    gauss_jacobi_01(n, 0, u, wu);
    gauss_jacobi_01(n, 1, v, wv);
    gauss_jacobi_01(n, 2, w, ww);
    QuadratureRule rule{CellShape::tetrahedron, degree, 3, {}, {}};
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double z = w[static_cast<std::size_t>(k)];
                const double y = v[static_cast<std::size_t>(j)] * (1.0 - z);
                const double x = u[static_cast<std::size_t>(i)] * (1.0 - v[static_cast<std::size_t>(j)]) * (1.0 - z);
                rule.points.insert(rule.points.end(), {x, y, z});
                rule.weights.push_back(wu[static_cast<std::size_t>(i)] * wv[static_cast<std::size_t>(j)] *
                                       ww[static_cast<std::size_t>(k)]);
            }
    return rule;
}

} // namespace detail

/// Quadrature factory. Segment and quad rules are Gauss(-Legendre) tensor
/// rules of any degree; triangles use the classic symmetric 1/3/6-point
/// rules through degree 4 and collapsed-coordinate Gauss-Jacobi products
/// beyond; tetrahedra use the centroid and 4-point symmetric rules through
/// degree 2, then Gauss-Jacobi products.
inline QuadratureRule make_quadrature(CellShape shape, int degree) {
    if (degree < 1) throw std::invalid_argument("quadrature degree must be >= 1");
    switch (shape) {
    case CellShape::segment:
        return detail::segment_rule(degree);
    case CellShape::quad: {
        const auto line = detail::segment_rule(degree);
        QuadratureRule rule{CellShape::quad, degree, 2, {}, {}};
        for (int j = 0; j < line.num_points(); ++j)
            for (int i = 0; i < line.num_points(); ++i) {
                rule.points.push_back(line.points[static_cast<std::size_t>(i)]);
                rule.points.push_back(line.points[static_cast<std::size_t>(j)]);
                rule.weights.push_back(line.weights[static_cast<std::size_t>(i)] *
                                       line.weights[static_cast<std::size_t>(j)]);
            }
        return rule;
    }
    case CellShape::triangle: {
        if (degree == 1)
            return {CellShape::triangle, 1, 2, {1.0 / 3.0, 1.0 / 3.0}, {0.5}};
        if (degree == 2)
            return {CellShape::triangle, 2, 2,
                    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0},
                    {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
        if (degree <= 4) {
            const double b1 = 0.091576213509770743;
            const double w1 = 0.10995174365532187 * 0.5;
            const double b2 = 0.44594849091596489;
            const double w2 = 0.22338158967801147 * 0.5;
            QuadratureRule rule{CellShape::triangle, 4, 2, {}, {}};
            for (const auto [b, w] : {std::pair{b1, w1}, std::pair{b2, w2}}) {
                rule.points.insert(rule.points.end(), {b, b, 1 - 2 * b, b, b, 1 - 2 * b});
                rule.weights.insert(rule.weights.end(), {w, w, w});
            }
            return rule;
        }
        return detail::conical_triangle(degree);
    }
    case CellShape::tetrahedron: {
        if (degree == 1)
            return {CellShape::tetrahedron, 1, 3, {0.25, 0.25, 0.25}, {1.0 / 6.0}};
        if (degree == 2) {
            const double a = (5.0 - std::sqrt(5.0)) / 20.0;
            const double b = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
            QuadratureRule rule{CellShape::tetrahedron, 2, 3, {}, {}};
            rule.points = {a, a, a, b, a, a, a, b, a, a, a, b};
            rule.weights.assign(4, 1.0 / 24.0);
            return rule;
        }
        return detail::conical_tet(degree);
    }
    }
    throw std::invalid_argument("unsupported quadrature shape");
}

// ---------------------------------------------------------------------------

/// A Lagrange element: P1/P2 on simplices, Q1 on quads.
struct Element {
    CellShape shape;
    int degree;
};

inline bool element_supported(Element e) {
    switch (e.shape) {
    case CellShape::segment:
    case CellShape::triangle: return e.degree == 1 || e.degree == 2;
    case CellShape::quad: return e.degree == 1;
    case CellShape::tetrahedron: return e.degree == 1;
    }
    return false;
}

inline void check_element(Element e) {
    if (!element_supported(e))
        throw std::invalid_argument("unsupported element: " + shape_name(e.shape) + " degree " +
                                    std::to_string(e.degree));
}

/// Dof slots per point depth for a section carrying this element.
inline std::vector<int> element_slots_per_depth(Element e) {
    check_element(e);
    std::vector<int> slots(static_cast<std::size_t>(shape_dim(e.shape)) + 1, 0);
    slots[0] = 1;
    if (e.degree == 2) slots[1] = 1; // one dof per edge (the 1D "edge" is the cell)
    return slots;
}

inline int element_num_nodes(Element e) {
    check_element(e);
    switch (e.shape) {
    case CellShape::segment: return e.degree + 1;
    case CellShape::triangle: return e.degree == 1 ? 3 : 6;
    case CellShape::quad: return 4;
    case CellShape::tetrahedron: return 4;
    }
    return 0;
}

/// Quadrature degree used for assembly: 2 * basis degree.
inline int default_quadrature_degree(Element e) { return 2 * e.degree; }

/// Basis values and reference derivatives at quadrature points. Node order
/// follows the transitive-closure dof order of the matching section: cell
/// slots, then edge slots in cone order, then vertex slots in cell vertex
/// order.
struct Tabulation {
    int nq = 0;
    int nb = 0;
    int dim = 0;
    std::vector<double> B;     ///< nq x nb
    std::vector<double> D;     ///< nq x nb x dim
    std::vector<double> nodes; ///< nb x dim reference coordinates

    double basis(int q, int i) const { return B[static_cast<std::size_t>(q * nb + i)]; }
    double deriv(int q, int i, int d) const {
        return D[static_cast<std::size_t>((q * nb + i) * dim + d)];
    }
};

namespace detail {

template <typename Eval>
Tabulation tabulate_impl(int dim, int nb, const std::vector<double>& nodes,
                         const QuadratureRule& rule, Eval&& eval) {
    Tabulation tab;
    tab.nq = rule.num_points();
    tab.nb = nb;
    tab.dim = dim;
    tab.nodes = nodes;
    tab.B.resize(static_cast<std::size_t>(tab.nq) * nb);
    tab.D.resize(static_cast<std::size_t>(tab.nq) * nb * dim);
    std::vector<double> val(static_cast<std::size_t>(nb));
    std::vector<double> grad(static_cast<std::size_t>(nb) * dim);
    for (int q = 0; q < tab.nq; ++q) {
        eval(rule.point(q), val, grad);
        for (int i = 0; i < nb; ++i) {
            tab.B[static_cast<std::size_t>(q * nb + i)] = val[static_cast<std::size_t>(i)];
            for (int d = 0; d < dim; ++d)
                tab.D[static_cast<std::size_t>((q * nb + i) * dim + d)] =
                    grad[static_cast<std::size_t>(i * dim + d)];
        }
    }
    return tab;
}

} // namespace detail

inline Tabulation tabulate(Element e, const QuadratureRule& rule) {
    check_element(e);
    if (rule.shape != e.shape) throw std::invalid_argument("rule/element shape mismatch");
    switch (e.shape) {
    case CellShape::segment:
        if (e.degree == 1)
            return detail::tabulate_impl(1, 2, {0.0, 1.0}, rule,
                                         [](std::span<const double> p, auto& v, auto& g) {
                                             const double x = p[0];
                                             v = {1.0 - x, x};
                                             g = {-1.0, 1.0};
                                         });
        // Closure order puts the cell (midpoint) dof first.
        return detail::tabulate_impl(1, 3, {0.5, 0.0, 1.0}, rule,
                                     [](std::span<const double> p, auto& v, auto& g) {
                                         const double x = p[0];
                                         v = {4 * x * (1 - x), (1 - x) * (1 - 2 * x), x * (2 * x - 1)};
                                         g = {4 - 8 * x, 4 * x - 3, 4 * x - 1};
                                     });
    case CellShape::triangle:
        if (e.degree == 1)
            return detail::tabulate_impl(2, 3, {0, 0, 1, 0, 0, 1}, rule,
                                         [](std::span<const double> p, auto& v, auto& g) {
                                             v = {1.0 - p[0] - p[1], p[0], p[1]};
                                             g = {-1, -1, 1, 0, 0, 1};
                                         });
        // Edge midpoints (cone order), then vertices.
        return detail::tabulate_impl(
            2, 6, {0.5, 0, 0.5, 0.5, 0, 0.5, 0, 0, 1, 0, 0, 1}, rule,
            [](std::span<const double> p, auto& v, auto& g) {
                const double x = p[0], y = p[1], l0 = 1 - x - y;
                v = {4 * l0 * x, 4 * x * y, 4 * y * l0,
                     l0 * (2 * l0 - 1), x * (2 * x - 1), y * (2 * y - 1)};
                g = {4 * (l0 - x), -4 * x,
                     4 * y,        4 * x,
                     -4 * y,       4 * (l0 - y),
                     1 - 4 * l0,   1 - 4 * l0,
                     4 * x - 1,    0,
                     0,            4 * y - 1};
            });
    case CellShape::quad:
        return detail::tabulate_impl(2, 4, {0, 0, 1, 0, 1, 1, 0, 1}, rule,
                                     [](std::span<const double> p, auto& v, auto& g) {
                                         const double x = p[0], y = p[1];
                                         v = {(1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y};
                                         g = {-(1 - y), -(1 - x), (1 - y), -x, y, x, -y, (1 - x)};
                                     });
    case CellShape::tetrahedron:
        return detail::tabulate_impl(3, 4, {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1}, rule,
                                     [](std::span<const double> p, auto& v, auto& g) {
                                         v = {1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]};
                                         g = {-1, -1, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1};
                                     });
    }
    throw std::invalid_argument("unsupported element");
}

// ---------------------------------------------------------------------------

/// Per-quadrature-point geometry of one cell: physical coordinates, inverse
/// Jacobian of the reference-to-physical map, and |det J| * w scaling.
struct CellGeometry {
    int nq = 0;
    int dim = 0;
    std::vector<double> x;       ///< nq x dim
    std::vector<double> jac_inv; ///< nq x dim x dim, row major
    std::vector<double> scaling; ///< nq

    std::span<const double> point(int q) const {
        return {x.data() + static_cast<std::size_t>(q) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const double> inverse_jacobian(int q) const {
        return {jac_inv.data() + static_cast<std::size_t>(q) * dim * dim,
                static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim)};
    }
};

namespace detail {

inline double invert_jacobian(int dim, const double* J, double* Jinv) {
    if (dim == 1) {
        const double det = J[0];
        if (det <= 0) return det;
        Jinv[0] = 1.0 / det;
        return det;
    }
    if (dim == 2) {
        const double det = J[0] * J[3] - J[1] * J[2];
        if (det <= 0) return det;
        const double inv = 1.0 / det;
        Jinv[0] = J[3] * inv;
        Jinv[1] = -J[1] * inv;
        Jinv[2] = -J[2] * inv;
        Jinv[3] = J[0] * inv;
        return det;
    }
    const double det = J[0] * (J[4] * J[8] - J[5] * J[7]) - J[1] * (J[3] * J[8] - J[5] * J[6]) +
                       J[2] * (J[3] * J[7] - J[4] * J[6]);
    if (det <= 0) return det;
    const double inv = 1.0 / det;
    Jinv[0] = (J[4] * J[8] - J[5] * J[7]) * inv;
    Jinv[1] = (J[2] * J[7] - J[1] * J[8]) * inv;
    Jinv[2] = (J[1] * J[5] - J[2] * J[4]) * inv;
    Jinv[3] = (J[5] * J[6] - J[3] * J[8]) * inv;
    Jinv[4] = (J[0] * J[8] - J[2] * J[6]) * inv;
    Jinv[5] = (J[2] * J[3] - J[0] * J[5]) * inv;
    Jinv[6] = (J[3] * J[7] - J[4] * J[6]) * inv;
    Jinv[7] = (J[1] * J[6] - J[0] * J[7]) * inv;
    Jinv[8] = (J[0] * J[4] - J[1] * J[3]) * inv;
    return det;
}

} // namespace detail

/// Geometry of `cell` at the rule's points, from vertex coordinates pulled
/// through the coordinate section (affine for simplices, bilinear for
/// quads). Throws on non-positive |det J|.
inline CellGeometry compute_cell_geometry(const MeshPlex& mesh, const Section& coord_section,
                                          std::span<const double> coord_vec, PointId cell,
                                          const QuadratureRule& rule) {
    const CellShape shape = mesh.cell_shape(cell);
    const auto verts = vec_get_closure(mesh, coord_section, coord_vec, cell);
    const int dim = mesh.dim();
    const int nv = shape_num_vertices(shape);
    const Tabulation geo = tabulate({shape, 1}, rule);

    CellGeometry g;
    g.nq = rule.num_points();
    g.dim = dim;
    g.x.assign(static_cast<std::size_t>(g.nq) * dim, 0.0);
    g.jac_inv.assign(static_cast<std::size_t>(g.nq) * dim * dim, 0.0);
    g.scaling.assign(static_cast<std::size_t>(g.nq), 0.0);

    std::vector<double> J(static_cast<std::size_t>(dim) * dim);
    for (int q = 0; q < g.nq; ++q) {
        std::fill(J.begin(), J.end(), 0.0);
        for (int i = 0; i < nv; ++i)
            for (int r = 0; r < dim; ++r) {
                const double vr = verts[static_cast<std::size_t>(i * dim + r)];
                g.x[static_cast<std::size_t>(q * dim + r)] += geo.basis(q, i) * vr;
                for (int c = 0; c < dim; ++c)
                    J[static_cast<std::size_t>(r * dim + c)] += vr * geo.deriv(q, i, c);
            }
        const double det = detail::invert_jacobian(dim, J.data(),
                                                   g.jac_inv.data() + static_cast<std::size_t>(q) * dim * dim);
        if (det <= 0.0)
            throw std::runtime_error("inverted cell " + std::to_string(cell) +
                                     " (det J = " + std::to_string(det) + ")");
        g.scaling[static_cast<std::size_t>(q)] = det * rule.weights[static_cast<std::size_t>(q)];
    }
    return g;
}

} // namespace femplex
