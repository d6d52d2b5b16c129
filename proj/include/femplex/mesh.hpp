#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace femplex {

using PointId = std::int32_t;

/// Orientation tag for a cone of size n.
///
/// Tags encode how a covering point traverses the stored cone order of one
/// of its cone members:
///   o in [0, n)   : start at index o, walk forward:   i -> (o + i) mod n
///   o in [-n, -1] : let s = -(o+1); walk backward:    i -> (s - 1 - i) mod n
/// so o = 0 is the stored order and every negative tag is a reversed
/// traversal. For edges (n = 2) the only tags produced are 0 and -1.
using Orientation = std::int32_t;

enum class CellShape { segment, triangle, quad, tetrahedron };

inline int shape_dim(CellShape s) {
    switch (s) {
    case CellShape::segment: return 1;
    case CellShape::triangle:
    case CellShape::quad: return 2;
    case CellShape::tetrahedron: return 3;
    }
    throw std::invalid_argument("unknown cell shape");
}

inline int shape_num_vertices(CellShape s) {
    switch (s) {
    case CellShape::segment: return 2;
    case CellShape::triangle: return 3;
    case CellShape::quad: return 4;
    case CellShape::tetrahedron: return 4;
    }
    throw std::invalid_argument("unknown cell shape");
}

inline std::string shape_name(CellShape s) {
    switch (s) {
    case CellShape::segment: return "segment";
    case CellShape::triangle: return "triangle";
    case CellShape::quad: return "quad";
    case CellShape::tetrahedron: return "tet";
    }
    return "?";
}

/// Index into a cone of size n under orientation o. See Orientation.
inline int oriented_cone_index(Orientation o, int i, int n) {
    if (o >= 0) return (o + i) % n;
    const int s = -(o + 1);
    return ((s - 1 - i) % n + n) % n;
}

/// Tag of the traversal opposite to o (an involution).
inline Orientation reverse_orientation(Orientation o) { return -(o + 1); }

/// Orientation seen through an outer traversal: reflections flip the
/// direction of every cone member, rotations leave it unchanged.
inline Orientation compose_orientation(Orientation outer, Orientation inner) {
    return outer >= 0 ? inner : reverse_orientation(inner);
}

/// One entry of a transitive closure: a DAG point and the orientation with
/// which the closure's root traverses it.
struct ClosurePoint {
    PointId point;
    Orientation orientation;
    friend bool operator==(const ClosurePoint&, const ClosurePoint&) = default;
};

struct ConeView {
    std::span<const PointId> points;
    std::span<const Orientation> orientations;
    int size() const { return static_cast<int>(points.size()); }
};

/// Unstructured mesh topology as a Hasse diagram: one unified index space of
/// points (cells, faces, edges, vertices) with covering arrows ("cones") and
/// their transposes ("supports").
///
/// Point numbering is stable and documented: cells occupy [0, nC), vertices
/// [nC, nC + nV), then faces (3D only), then edges, each block in first
/// encounter order during construction. Every height (and depth) stratum is
/// therefore one contiguous index range.
///
/// Edges store their cone as (lower vertex id, higher vertex id); a covering
/// point records orientation -1 when it traverses the edge backward.
/// Triangular faces store the creating cell's vertex loop; other cells
/// record the dihedral tag mapping the stored loop onto their own.
///
/// Immutable after construction; concurrent reads are safe.
class MeshPlex {
public:
    int dim() const { return dim_; }
    PointId num_points() const { return num_points_; }
    PointId num_cells() const { return num_cells_; }
    PointId num_vertices() const { return num_vertices_; }
    PointId num_faces() const { return num_faces_; }
    PointId num_edges() const { return num_edges_; }

    bool valid_point(PointId p) const { return p >= 0 && p < num_points_; }

    ConeView cone(PointId p) const {
        check_point(p);
        return {{cone_points_.data() + cone_offsets_[p],
                 static_cast<std::size_t>(cone_offsets_[p + 1] - cone_offsets_[p])},
                {cone_orients_.data() + cone_offsets_[p],
                 static_cast<std::size_t>(cone_offsets_[p + 1] - cone_offsets_[p])}};
    }

    /// Points covering p, in ascending point order.
    std::span<const PointId> support(PointId p) const {
        check_point(p);
        return {support_points_.data() + support_offsets_[p],
                static_cast<std::size_t>(support_offsets_[p + 1] - support_offsets_[p])};
    }

    int depth(PointId p) const {
        check_point(p);
        return depth_[p];
    }
    int height(PointId p) const {
        check_point(p);
        return height_[p];
    }

    /// Contiguous range [start, end) of all points at height h.
    std::pair<PointId, PointId> height_stratum(int h) const {
        if (h < 0 || h > dim_) throw std::out_of_range("height stratum out of range");
        return height_strata_[static_cast<std::size_t>(h)];
    }

    std::pair<PointId, PointId> depth_stratum(int d) const {
        if (d < 0 || d > dim_) throw std::out_of_range("depth stratum out of range");
        return depth_strata_[static_cast<std::size_t>(d)];
    }

    /// Breadth-first transitive closure through cones, starting at p (which
    /// comes first with orientation 0). First occurrence wins; orientations
    /// are composed along the discovery path.
    std::vector<ClosurePoint> transitive_closure(PointId p) const {
        check_point(p);
        std::vector<ClosurePoint> out;
        out.reserve(16);
        out.push_back({p, 0});
        std::vector<char> seen(static_cast<std::size_t>(num_points_), 0);
        seen[static_cast<std::size_t>(p)] = 1;
        std::size_t head = 0;
        while (head < out.size()) {
            const auto [q, oq] = out[head++];
            const ConeView cv = cone(q);
            const int n = cv.size();
            for (int i = 0; i < n; ++i) {
                const int j = oriented_cone_index(oq, i, n);
                const PointId r = cv.points[j];
                if (seen[static_cast<std::size_t>(r)]) continue;
                seen[static_cast<std::size_t>(r)] = 1;
                // A point with an empty cone has no traversal order; its
                // composed tag is normalized to 0.
                const Orientation ro = cone_offsets_[static_cast<std::size_t>(r) + 1] ==
                                               cone_offsets_[static_cast<std::size_t>(r)]
                                           ? 0
                                           : compose_orientation(oq, cv.orientations[j]);
                out.push_back({r, ro});
            }
        }
        return out;
    }

    CellShape cell_shape(PointId cell) const {
        if (cell < 0 || cell >= num_cells_) throw std::out_of_range("not a cell point");
        return cell_shapes_[static_cast<std::size_t>(cell)];
    }

    /// Vertex coordinates, nV x dim row major. Vertex v (a DAG point in
    /// [nC, nC+nV)) has coordinates at row v - nC.
    std::span<const double> coordinates() const { return coordinates_; }

    std::span<const double> vertex_coordinates(PointId v) const {
        if (v < num_cells_ || v >= num_cells_ + num_vertices_)
            throw std::out_of_range("not a vertex point");
        return {coordinates_.data() + static_cast<std::size_t>(v - num_cells_) * dim_,
                static_cast<std::size_t>(dim_)};
    }

    /// Centroid of the closure vertices of p (the vertex itself, an edge
    /// midpoint, a face/cell centroid). Used to place Dirichlet data.
    std::array<double, 3> point_centroid(PointId p) const {
        check_point(p);
        std::array<double, 3> c{0.0, 0.0, 0.0};
        int count = 0;
        for (const auto& cp : transitive_closure(p)) {
            if (depth_[cp.point] != 0) continue;
            const auto x = vertex_coordinates(cp.point);
            for (int d = 0; d < dim_; ++d) c[static_cast<std::size_t>(d)] += x[static_cast<std::size_t>(d)];
            ++count;
        }
        for (int d = 0; d < dim_; ++d) c[static_cast<std::size_t>(d)] /= count;
        return c;
    }

    friend MeshPlex build_from_cells(int dim, const std::vector<std::vector<PointId>>& cell_vertices,
                                     const std::vector<std::vector<double>>& vertex_coords,
                                     const std::vector<CellShape>& cell_shapes);

private:
    MeshPlex() = default;

    void check_point(PointId p) const {
        if (!valid_point(p)) throw std::out_of_range("invalid mesh point " + std::to_string(p));
    }

    int dim_ = 0;
    PointId num_points_ = 0;
    PointId num_cells_ = 0;
    PointId num_vertices_ = 0;
    PointId num_faces_ = 0;
    PointId num_edges_ = 0;
    std::vector<std::int32_t> cone_offsets_;
    std::vector<PointId> cone_points_;
    std::vector<Orientation> cone_orients_;
    std::vector<std::int32_t> support_offsets_;
    std::vector<PointId> support_points_;
    std::vector<std::int32_t> depth_;
    std::vector<std::int32_t> height_;
    std::vector<std::pair<PointId, PointId>> height_strata_;
    std::vector<std::pair<PointId, PointId>> depth_strata_;
    std::vector<CellShape> cell_shapes_;
    std::vector<double> coordinates_;
};

namespace detail {

/// Vertex loop of a stored polygon loop traversed under orientation o:
/// o >= 0 starts at loop[o] ascending, o < 0 starts at loop[-(o+1)]
/// descending (consistent with oriented_cone_index acting on the cone of
/// boundary edges).
inline std::vector<PointId> oriented_loop(std::span<const PointId> loop, Orientation o) {
    const int n = static_cast<int>(loop.size());
    std::vector<PointId> out(static_cast<std::size_t>(n));
    if (o >= 0) {
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = loop[static_cast<std::size_t>((o + i) % n)];
    } else {
        const int s = -(o + 1);
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = loop[static_cast<std::size_t>(((s - i) % n + n) % n)];
    }
    return out;
}

/// Dihedral tag mapping the stored loop onto the wanted loop.
inline Orientation match_loop(std::span<const PointId> stored, std::span<const PointId> wanted) {
    const int n = static_cast<int>(stored.size());
    for (Orientation o = -n; o < n; ++o) {
        const auto walk = oriented_loop(stored, o);
        if (std::equal(walk.begin(), walk.end(), wanted.begin(), wanted.end())) return o;
    }
    throw std::logic_error("face loops do not match");
}

struct InterpolationScratch {
    std::map<std::pair<PointId, PointId>, PointId> edge_ids;
    std::map<std::array<PointId, 3>, PointId> face_ids;
    std::vector<std::array<PointId, 3>> face_loops;
};

} // namespace detail

/// Build a fully interpolated mesh DAG from per-cell vertex tuples. Vertex
/// ids in the input index vertex_coords; in the DAG they are shifted by the
/// cell count. Intermediate entities (edges, and faces in 3D) are created in
/// first encounter order and deduplicated.
inline MeshPlex build_from_cells(int dim, const std::vector<std::vector<PointId>>& cell_vertices,
                                 const std::vector<std::vector<double>>& vertex_coords,
                                 const std::vector<CellShape>& cell_shapes) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("dim must be 1, 2, or 3");
    const PointId nC = static_cast<PointId>(cell_vertices.size());
    const PointId nV = static_cast<PointId>(vertex_coords.size());
    if (nC == 0) throw std::invalid_argument("mesh needs at least one cell");
    if (cell_shapes.size() != cell_vertices.size())
        throw std::invalid_argument("one shape per cell required");

    for (const auto& xc : vertex_coords)
        if (static_cast<int>(xc.size()) != dim)
            throw std::invalid_argument("vertex coordinate arity does not match dim");

    std::map<std::vector<PointId>, PointId> seen_cells;
    for (PointId c = 0; c < nC; ++c) {
        const auto& verts = cell_vertices[static_cast<std::size_t>(c)];
        const CellShape shape = cell_shapes[static_cast<std::size_t>(c)];
        if (shape_dim(shape) != dim)
            throw std::invalid_argument("cell shape dimension does not match mesh dim");
        if (static_cast<int>(verts.size()) != shape_num_vertices(shape))
            throw std::invalid_argument("cell " + std::to_string(c) + " has wrong vertex count for its shape");
        for (PointId v : verts)
            if (v < 0 || v >= nV)
                throw std::invalid_argument("dangling vertex index in cell " + std::to_string(c));
        std::vector<PointId> key = verts;
        std::sort(key.begin(), key.end());
        if (std::adjacent_find(key.begin(), key.end()) != key.end())
            throw std::invalid_argument("repeated vertex in cell " + std::to_string(c));
        if (!seen_cells.emplace(std::move(key), c).second)
            throw std::invalid_argument("duplicate cell " + std::to_string(c));
    }

    MeshPlex mesh;
    mesh.dim_ = dim;
    mesh.num_cells_ = nC;
    mesh.num_vertices_ = nV;
    mesh.cell_shapes_ = cell_shapes;
    mesh.coordinates_.resize(static_cast<std::size_t>(nV) * dim);
    for (PointId v = 0; v < nV; ++v)
        for (int d = 0; d < dim; ++d)
            mesh.coordinates_[static_cast<std::size_t>(v) * dim + d] =
                vertex_coords[static_cast<std::size_t>(v)][static_cast<std::size_t>(d)];

    // Cones are collected per point, then packed. Vertex DAG ids are input
    // ids shifted past the cell block.
    const auto vid = [nC](PointId v) { return nC + v; };

    std::vector<std::vector<PointId>> cones;
    std::vector<std::vector<Orientation>> orients;
    cones.resize(static_cast<std::size_t>(nC + nV));
    orients.resize(static_cast<std::size_t>(nC + nV));

    detail::InterpolationScratch scratch;
    PointId next_id = nC + nV;

    const auto get_edge = [&](PointId a, PointId b, Orientation& o) {
        const PointId lo = std::min(a, b), hi = std::max(a, b);
        o = (a == lo) ? 0 : -1;
        const auto [it, inserted] = scratch.edge_ids.try_emplace({lo, hi}, next_id);
        if (inserted) {
            cones.push_back({vid(lo), vid(hi)});
            orients.push_back({0, 0});
            ++next_id;
        }
        return it->second;
    };

    if (dim == 1) {
        for (PointId c = 0; c < nC; ++c) {
            const auto& v = cell_vertices[static_cast<std::size_t>(c)];
            cones[static_cast<std::size_t>(c)] = {vid(v[0]), vid(v[1])};
            orients[static_cast<std::size_t>(c)] = {0, 0};
        }
    } else if (dim == 2) {
        for (PointId c = 0; c < nC; ++c) {
            const auto& v = cell_vertices[static_cast<std::size_t>(c)];
            const int nv = static_cast<int>(v.size());
            for (int i = 0; i < nv; ++i) {
                Orientation o;
                const PointId e = get_edge(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>((i + 1) % nv)], o);
                cones[static_cast<std::size_t>(c)].push_back(e);
                orients[static_cast<std::size_t>(c)].push_back(o);
            }
        }
        mesh.num_edges_ = next_id - nC - nV;
    } else {
        // Tetrahedra: faces first (one contiguous block), then edges.
        for (PointId c = 0; c < nC; ++c) {
            const auto& v = cell_vertices[static_cast<std::size_t>(c)];
            const std::array<std::array<PointId, 3>, 4> loops = {{{v[0], v[1], v[2]},
                                                                  {v[0], v[3], v[1]},
                                                                  {v[0], v[2], v[3]},
                                                                  {v[1], v[3], v[2]}}};
            for (const auto& loop : loops) {
                std::array<PointId, 3> key = loop;
                std::sort(key.begin(), key.end());
                const auto [it, inserted] = scratch.face_ids.try_emplace(key, next_id);
                if (inserted) {
                    scratch.face_loops.push_back(loop);
                    cones.emplace_back();
                    orients.emplace_back();
                    ++next_id;
                }
                const auto& stored = scratch.face_loops[static_cast<std::size_t>(it->second - nC - nV)];
                cones[static_cast<std::size_t>(c)].push_back(it->second);
                orients[static_cast<std::size_t>(c)].push_back(detail::match_loop(stored, loop));
            }
        }
        mesh.num_faces_ = next_id - nC - nV;
        for (PointId f = 0; f < mesh.num_faces_; ++f) {
            const auto loop = scratch.face_loops[static_cast<std::size_t>(f)];
            for (int i = 0; i < 3; ++i) {
                Orientation o;
                const PointId e = get_edge(loop[static_cast<std::size_t>(i)], loop[static_cast<std::size_t>((i + 1) % 3)], o);
                cones[static_cast<std::size_t>(nC + nV + f)].push_back(e);
                orients[static_cast<std::size_t>(nC + nV + f)].push_back(o);
            }
        }
        mesh.num_edges_ = next_id - nC - nV - mesh.num_faces_;
    }

    const PointId nP = next_id;
    mesh.num_points_ = nP;
    mesh.cone_offsets_.assign(static_cast<std::size_t>(nP) + 1, 0);
    for (PointId p = 0; p < nP; ++p)
        mesh.cone_offsets_[static_cast<std::size_t>(p) + 1] =
            mesh.cone_offsets_[static_cast<std::size_t>(p)] + static_cast<std::int32_t>(cones[static_cast<std::size_t>(p)].size());
    mesh.cone_points_.reserve(static_cast<std::size_t>(mesh.cone_offsets_.back()));
    mesh.cone_orients_.reserve(static_cast<std::size_t>(mesh.cone_offsets_.back()));
    for (PointId p = 0; p < nP; ++p) {
        mesh.cone_points_.insert(mesh.cone_points_.end(), cones[static_cast<std::size_t>(p)].begin(),
                                 cones[static_cast<std::size_t>(p)].end());
        mesh.cone_orients_.insert(mesh.cone_orients_.end(), orients[static_cast<std::size_t>(p)].begin(),
                                  orients[static_cast<std::size_t>(p)].end());
    }

    // Supports: exact transpose of cones, ascending point order per row.
    mesh.support_offsets_.assign(static_cast<std::size_t>(nP) + 1, 0);
    for (PointId q : mesh.cone_points_) ++mesh.support_offsets_[static_cast<std::size_t>(q) + 1];
    for (PointId p = 0; p < nP; ++p)
        mesh.support_offsets_[static_cast<std::size_t>(p) + 1] += mesh.support_offsets_[static_cast<std::size_t>(p)];
    mesh.support_points_.resize(static_cast<std::size_t>(mesh.cone_points_.size()));
    {
        std::vector<std::int32_t> cursor(mesh.support_offsets_.begin(), mesh.support_offsets_.end() - 1);
        for (PointId p = 0; p < nP; ++p)
            for (std::int32_t k = mesh.cone_offsets_[static_cast<std::size_t>(p)];
                 k < mesh.cone_offsets_[static_cast<std::size_t>(p) + 1]; ++k) {
                const PointId q = mesh.cone_points_[static_cast<std::size_t>(k)];
                mesh.support_points_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(q)]++)] = p;
            }
        // Rows come out ascending already because sources are visited in
        // ascending order; keep the sort as a guarantee.
        for (PointId p = 0; p < nP; ++p)
            std::sort(mesh.support_points_.begin() + mesh.support_offsets_[static_cast<std::size_t>(p)],
                      mesh.support_points_.begin() + mesh.support_offsets_[static_cast<std::size_t>(p) + 1]);
    }

    // Strata from the DAG itself: depth = longest chain down to vertices,
    // height = longest chain up to cells.
    mesh.depth_.assign(static_cast<std::size_t>(nP), -1);
    mesh.height_.assign(static_cast<std::size_t>(nP), -1);
    for (PointId p = nP - 1; p >= 0; --p) {
        // cone targets always have larger index than cells and smaller
        // index blocks are processed later; recurse explicitly instead.
        if (mesh.depth_[static_cast<std::size_t>(p)] >= 0) continue;
        std::vector<PointId> stack{p};
        while (!stack.empty()) {
            const PointId q = stack.back();
            const auto cv = mesh.cone(q);
            int d = 0;
            bool ready = true;
            for (PointId r : cv.points) {
                if (mesh.depth_[static_cast<std::size_t>(r)] < 0) {
                    stack.push_back(r);
                    ready = false;
                } else {
                    d = std::max(d, mesh.depth_[static_cast<std::size_t>(r)] + 1);
                }
            }
            if (ready) {
                mesh.depth_[static_cast<std::size_t>(q)] = cv.size() == 0 ? 0 : d;
                stack.pop_back();
            }
        }
    }
    for (PointId p = 0; p < nP; ++p) {
        if (mesh.height_[static_cast<std::size_t>(p)] >= 0) continue;
        std::vector<PointId> stack{p};
        while (!stack.empty()) {
            const PointId q = stack.back();
            const auto sup = mesh.support(q);
            int h = 0;
            bool ready = true;
            for (PointId r : sup) {
                if (mesh.height_[static_cast<std::size_t>(r)] < 0) {
                    stack.push_back(r);
                    ready = false;
                } else {
                    h = std::max(h, mesh.height_[static_cast<std::size_t>(r)] + 1);
                }
            }
            if (ready) {
                mesh.height_[static_cast<std::size_t>(q)] = sup.empty() ? 0 : h;
                stack.pop_back();
            }
        }
    }

    const auto collect_strata = [nP, dim](const std::vector<std::int32_t>& level) {
        std::vector<std::pair<PointId, PointId>> strata(static_cast<std::size_t>(dim) + 1, {0, 0});
        std::vector<bool> found(static_cast<std::size_t>(dim) + 1, false);
        for (PointId p = 0; p < nP; ++p) {
            const int l = level[static_cast<std::size_t>(p)];
            if (l < 0 || l > dim) throw std::logic_error("stratum level out of range");
            auto& [start, end] = strata[static_cast<std::size_t>(l)];
            if (!found[static_cast<std::size_t>(l)]) {
                start = p;
                end = p + 1;
                found[static_cast<std::size_t>(l)] = true;
            } else {
                if (p != end) throw std::logic_error("stratum is not contiguous");
                end = p + 1;
            }
        }
        return strata;
    };
    mesh.height_strata_ = collect_strata(mesh.height_);
    mesh.depth_strata_ = collect_strata(mesh.depth_);
    return mesh;
}

/// Uniform-shape convenience overload; mixed arities require the per-cell
/// shape overload.
inline MeshPlex build_from_cells(int dim, const std::vector<std::vector<PointId>>& cell_vertices,
                                 const std::vector<std::vector<double>>& vertex_coords, CellShape shape) {
    for (const auto& c : cell_vertices)
        if (static_cast<int>(c.size()) != shape_num_vertices(shape))
            throw std::invalid_argument("mixed-arity cells need per-cell shape tags");
    return build_from_cells(dim, cell_vertices,
                            vertex_coords, std::vector<CellShape>(cell_vertices.size(), shape));
}

// ---------------------------------------------------------------------------
// Built-in generators, all on the unit interval/square/cube with h = 1/n.

inline MeshPlex unit_interval_mesh(int n) {
    if (n < 1) throw std::invalid_argument("n must be positive");
    std::vector<std::vector<double>> coords;
    for (int i = 0; i <= n; ++i) coords.push_back({static_cast<double>(i) / n});
    std::vector<std::vector<PointId>> cells;
    for (int i = 0; i < n; ++i) cells.push_back({i, i + 1});
    return build_from_cells(1, cells, coords, CellShape::segment);
}

/// 2 n^2 triangles: each grid square is split by its lower-left to
/// upper-right diagonal, both halves counterclockwise.
inline MeshPlex unit_square_triangles(int n) {
    if (n < 1) throw std::invalid_argument("n must be positive");
    std::vector<std::vector<double>> coords;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            coords.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    const auto v = [n](int i, int j) { return j * (n + 1) + i; };
    std::vector<std::vector<PointId>> cells;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            cells.push_back({v(i, j), v(i + 1, j), v(i + 1, j + 1)});
            cells.push_back({v(i, j), v(i + 1, j + 1), v(i, j + 1)});
        }
    return build_from_cells(2, cells, coords, CellShape::triangle);
}

inline MeshPlex unit_square_quads(int n) {
    if (n < 1) throw std::invalid_argument("n must be positive");
    std::vector<std::vector<double>> coords;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            coords.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    const auto v = [n](int i, int j) { return j * (n + 1) + i; };
    std::vector<std::vector<PointId>> cells;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            cells.push_back({v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)});
    return build_from_cells(2, cells, coords, CellShape::quad);
}

/// 6 n^3 tetrahedra, Kuhn decomposition of each grid cube around its main
/// diagonal. All cells are positively oriented.
inline MeshPlex unit_cube_tets(int n) {
    if (n < 1) throw std::invalid_argument("n must be positive");
    std::vector<std::vector<double>> coords;
    for (int k = 0; k <= n; ++k)
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i)
                coords.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n,
                                  static_cast<double>(k) / n});
    const auto v = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
    // Paths 000 -> 111 by coordinate permutation; odd permutations get two
    // vertices swapped to keep the affine map positively oriented.
    const std::array<std::array<int, 3>, 6> perms = {{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {1, 0, 2}, {2, 1, 0}}};
    const auto parity = [](const std::array<int, 3>& p) {
        int inv = 0;
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b)
                if (p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)]) ++inv;
        return inv % 2;
    };
    std::vector<std::vector<PointId>> cells;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                for (const auto& p : perms) {
                    std::array<int, 3> c = {i, j, k};
                    std::vector<PointId> tet{v(c[0], c[1], c[2])};
                    for (int step = 0; step < 3; ++step) {
                        ++c[static_cast<std::size_t>(p[static_cast<std::size_t>(step)])];
                        tet.push_back(v(c[0], c[1], c[2]));
                    }
                    if (parity(p) == 1) std::swap(tet[1], tet[2]);
                    cells.push_back(std::move(tet));
                }
    return build_from_cells(3, cells, coords, CellShape::tetrahedron);
}

/// Minimal ASCII reader. Line 1: `dim nV nC shape` with shape one of
/// segment|triangle|quad|tet, then nV coordinate lines, then nC vertex
/// tuples.
inline MeshPlex read_mesh(std::istream& in) {
    int dim = 0;
    long nV = 0, nC = 0;
    std::string shape_token;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("mesh file: missing header");
    {
        std::istringstream hs(line);
        if (!(hs >> dim >> nV >> nC >> shape_token))
            throw std::runtime_error("mesh file: malformed header");
    }
    CellShape shape;
    if (shape_token == "segment") shape = CellShape::segment;
    else if (shape_token == "triangle") shape = CellShape::triangle;
    else if (shape_token == "quad") shape = CellShape::quad;
    else if (shape_token == "tet") shape = CellShape::tetrahedron;
    else throw std::runtime_error("mesh file: unknown shape '" + shape_token + "'");

    std::vector<std::vector<double>> coords;
    coords.reserve(static_cast<std::size_t>(nV));
    for (long i = 0; i < nV; ++i) {
        std::vector<double> x(static_cast<std::size_t>(dim));
        for (int d = 0; d < dim; ++d)
            if (!(in >> x[static_cast<std::size_t>(d)]))
                throw std::runtime_error("mesh file: bad coordinate line " + std::to_string(i));
        coords.push_back(std::move(x));
    }
    const int arity = shape_num_vertices(shape);
    std::vector<std::vector<PointId>> cells;
    cells.reserve(static_cast<std::size_t>(nC));
    for (long c = 0; c < nC; ++c) {
        std::vector<PointId> verts(static_cast<std::size_t>(arity));
        for (int k = 0; k < arity; ++k)
            if (!(in >> verts[static_cast<std::size_t>(k)]))
                throw std::runtime_error("mesh file: bad cell line " + std::to_string(c));
        cells.push_back(std::move(verts));
    }
    return build_from_cells(dim, cells, coords, shape);
}

} // namespace femplex
