#pragma once

#include "femplex/mesh.hpp"

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace femplex {

/// Per-field layout request: slots_per_depth[d] dof slots on every point of
/// depth d, each slot carrying `components` values.
struct FieldSpec {
    std::vector<int> slots_per_depth;
    int components = 1;
};

/// Size/offset map over all mesh points: each (point, field) pair owns a
/// contiguous run of the local vector. Offsets are the exclusive prefix sum
/// in (point, field) lexicographic order, field innermost, so all dofs of a
/// point sit together ordered by field.
class Section {
public:
    /// Default-constructed sections are empty; build real ones with
    /// create_section.
    Section() = default;

    int num_fields() const { return static_cast<int>(components_.size()); }
    int components(int field) const { return components_[check_field(field)]; }

    /// Dof slots of `field` at point p (dof count / components).
    int slots(PointId p, int field) const { return entry(p, field).slots; }
    /// Dof count of `field` at point p.
    int dof(PointId p, int field) const {
        return entry(p, field).slots * components_[check_field(field)];
    }
    /// First local-vector index of (p, field).
    int offset(PointId p, int field) const { return entry(p, field).offset; }

    int total_size() const { return total_size_; }

    bool is_constrained(int local_dof) const {
        return constrained_[static_cast<std::size_t>(check_dof(local_dof))] != 0;
    }
    int num_constrained() const { return num_constrained_; }
    void set_constrained(int local_dof) {
        auto& flag = constrained_[static_cast<std::size_t>(check_dof(local_dof))];
        if (!flag) {
            flag = 1;
            ++num_constrained_;
        }
    }

    /// Total closure dof count of a point (all fields).
    int closure_size(const MeshPlex& mesh, PointId p) const {
        int n = 0;
        for (const auto& cp : mesh.transitive_closure(p))
            for (int f = 0; f < num_fields(); ++f) n += dof(cp.point, f);
        return n;
    }

    /// Closure dof count of one field at a point.
    int closure_field_size(const MeshPlex& mesh, PointId p, int field) const {
        int n = 0;
        for (const auto& cp : mesh.transitive_closure(p)) n += dof(cp.point, field);
        return n;
    }

    friend Section create_section(const MeshPlex& mesh, const std::vector<FieldSpec>& fields);

private:
    struct Entry {
        std::int32_t slots;
        std::int32_t offset;
    };

    int check_field(int f) const {
        if (f < 0 || f >= num_fields()) throw std::out_of_range("field index out of range");
        return f;
    }
    int check_dof(int i) const {
        if (i < 0 || i >= total_size_) throw std::out_of_range("local dof out of range");
        return i;
    }
    const Entry& entry(PointId p, int field) const {
        if (p < 0 || p >= num_points_) throw std::out_of_range("invalid mesh point");
        return entries_[static_cast<std::size_t>(p) * static_cast<std::size_t>(num_fields()) +
                        static_cast<std::size_t>(check_field(field))];
    }

    PointId num_points_ = 0;
    int total_size_ = 0;
    int num_constrained_ = 0;
    std::vector<int> components_;
    std::vector<Entry> entries_;
    std::vector<char> constrained_;
};

/// Uniform-by-depth dof assignment.
inline Section create_section(const MeshPlex& mesh, const std::vector<FieldSpec>& fields) {
    if (fields.empty()) throw std::invalid_argument("section needs at least one field");
    for (const auto& f : fields) {
        if (static_cast<int>(f.slots_per_depth.size()) != mesh.dim() + 1)
            throw std::invalid_argument("slots_per_depth must have dim+1 entries");
        for (int s : f.slots_per_depth)
            if (s < 0) throw std::invalid_argument("negative dof count");
        if (f.components < 1) throw std::invalid_argument("components must be positive");
    }
    Section sec;
    sec.num_points_ = mesh.num_points();
    for (const auto& f : fields) sec.components_.push_back(f.components);
    sec.entries_.resize(static_cast<std::size_t>(mesh.num_points()) * fields.size());
    int off = 0;
    for (PointId p = 0; p < mesh.num_points(); ++p) {
        const int d = mesh.depth(p);
        for (std::size_t f = 0; f < fields.size(); ++f) {
            const int slots = fields[f].slots_per_depth[static_cast<std::size_t>(d)];
            sec.entries_[static_cast<std::size_t>(p) * fields.size() + f] = {slots, off};
            off += slots * fields[f].components;
        }
    }
    sec.total_size_ = off;
    sec.constrained_.assign(static_cast<std::size_t>(off), 0);
    return sec;
}

/// Coordinate layout: dim values on every vertex. The coordinate local
/// vector under this section is exactly MeshPlex::coordinates(), so closure
/// extraction doubles as geometry extraction.
inline Section coordinate_section(const MeshPlex& mesh) {
    std::vector<int> slots(static_cast<std::size_t>(mesh.dim()) + 1, 0);
    slots[0] = 1;
    return create_section(mesh, {{slots, mesh.dim()}});
}

namespace detail {

/// Visits closure dofs in extraction order: field-contiguous, points in
/// closure order, slots reversed under negative orientation, components
/// innermost. The visitor receives the local-vector index.
template <typename Visit>
void for_each_closure_dof(const MeshPlex& mesh, const Section& section, PointId p, Visit&& visit) {
    const auto closure = mesh.transitive_closure(p);
    for (int f = 0; f < section.num_fields(); ++f) {
        const int c = section.components(f);
        for (const auto& cp : closure) {
            const int k = section.slots(cp.point, f);
            if (k == 0) continue;
            const int base = section.offset(cp.point, f);
            for (int s = 0; s < k; ++s) {
                const int slot = cp.orientation >= 0 ? s : k - 1 - s;
                for (int comp = 0; comp < c; ++comp) visit(base + slot * c + comp);
            }
        }
    }
}

} // namespace detail

/// Element restriction: gather the closure dofs of `p`, each field
/// contiguous, points in transitive-closure order within a field.
inline std::vector<double> vec_get_closure(const MeshPlex& mesh, const Section& section,
                                           std::span<const double> vec, PointId p) {
    if (static_cast<int>(vec.size()) != section.total_size())
        throw std::invalid_argument("local vector size mismatch");
    std::vector<double> values;
    values.reserve(16);
    detail::for_each_closure_dof(mesh, section, p,
                                 [&](int i) { values.push_back(vec[static_cast<std::size_t>(i)]); });
    return values;
}

/// Accumulate (+=) element values back through the inverse of the
/// vec_get_closure permutation.
inline void vec_set_closure_add(const MeshPlex& mesh, const Section& section,
                                std::span<double> vec, PointId p, std::span<const double> values) {
    if (static_cast<int>(vec.size()) != section.total_size())
        throw std::invalid_argument("local vector size mismatch");
    std::size_t k = 0;
    detail::for_each_closure_dof(mesh, section, p, [&](int i) {
        if (k >= values.size()) throw std::invalid_argument("closure values size mismatch");
        vec[static_cast<std::size_t>(i)] += values[k++];
    });
    if (k != values.size()) throw std::invalid_argument("closure values size mismatch");
}

/// Local-to-global dof translation. Constrained local dofs are absent from
/// the global (solver) vector.
struct GlobalMap {
    static constexpr std::int32_t kConstrained = -1;
    std::vector<std::int32_t> local_to_global;
    std::int32_t num_global = 0;

    bool constrained(int local) const {
        return local_to_global[static_cast<std::size_t>(local)] == kConstrained;
    }
};

/// Unconstrained local dofs map onto [0, num_global) in ascending local
/// order.
inline GlobalMap build_global_map(const Section& section) {
    GlobalMap gmap;
    gmap.local_to_global.resize(static_cast<std::size_t>(section.total_size()));
    std::int32_t g = 0;
    for (int i = 0; i < section.total_size(); ++i)
        gmap.local_to_global[static_cast<std::size_t>(i)] =
            section.is_constrained(i) ? GlobalMap::kConstrained : g++;
    gmap.num_global = g;
    return gmap;
}

struct ConstrainedLayout {
    Section section;
    GlobalMap gmap;
};

/// Marks every dof of `field` on the boundary as constrained: boundary
/// facets are height-1 points with exactly one supporting cell, and the
/// constraint propagates through their closures.
inline ConstrainedLayout mark_boundary_constrained(const MeshPlex& mesh, Section section, int field) {
    const auto [fs, fe] = mesh.height_stratum(1);
    const int c = section.components(field);
    for (PointId facet = fs; facet < fe; ++facet) {
        if (mesh.support(facet).size() != 1) continue;
        for (const auto& cp : mesh.transitive_closure(facet)) {
            const int base = section.offset(cp.point, field);
            const int n = section.slots(cp.point, field) * c;
            for (int i = 0; i < n; ++i) section.set_constrained(base + i);
        }
    }
    GlobalMap gmap = build_global_map(section);
    return {std::move(section), std::move(gmap)};
}

/// Boundary-value callback: physical location, field, component.
using BoundaryFn = std::function<double(std::span<const double>, int, int)>;

/// Scatter a global vector into the local space, filling constrained dofs
/// from the boundary function evaluated at the dof's geometric location
/// (vertex position, edge midpoint, else closure-vertex centroid).
inline std::vector<double> global_to_local(const MeshPlex& mesh, const Section& section,
                                           const GlobalMap& gmap, std::span<const double> g,
                                           const BoundaryFn& bc) {
    if (static_cast<std::int32_t>(g.size()) != gmap.num_global)
        throw std::invalid_argument("global vector size mismatch");
    std::vector<double> local(static_cast<std::size_t>(section.total_size()));
    for (PointId p = 0; p < mesh.num_points(); ++p) {
        std::array<double, 3> x{};
        bool have_x = false;
        for (int f = 0; f < section.num_fields(); ++f) {
            const int base = section.offset(p, f);
            const int c = section.components(f);
            const int n = section.slots(p, f) * c;
            for (int i = 0; i < n; ++i) {
                const int li = base + i;
                const std::int32_t gi = gmap.local_to_global[static_cast<std::size_t>(li)];
                if (gi == GlobalMap::kConstrained) {
                    if (!have_x) {
                        x = mesh.point_centroid(p);
                        have_x = true;
                    }
                    local[static_cast<std::size_t>(li)] =
                        bc ? bc(std::span<const double>(x.data(), static_cast<std::size_t>(mesh.dim())), f, i % c)
                           : 0.0;
                } else {
                    local[static_cast<std::size_t>(li)] = g[static_cast<std::size_t>(gi)];
                }
            }
        }
    }
    return local;
}

/// Accumulate unconstrained local entries into the global vector;
/// constrained entries never reach the solver's residual.
inline void local_to_global_add(const GlobalMap& gmap, std::span<const double> local,
                                std::span<double> g) {
    if (local.size() != gmap.local_to_global.size())
        throw std::invalid_argument("local vector size mismatch");
    if (static_cast<std::int32_t>(g.size()) != gmap.num_global)
        throw std::invalid_argument("global vector size mismatch");
    for (std::size_t i = 0; i < local.size(); ++i) {
        const std::int32_t gi = gmap.local_to_global[i];
        if (gi != GlobalMap::kConstrained) g[static_cast<std::size_t>(gi)] += local[i];
    }
}

/// Nodal interpolation into the local space: every dof of a point takes the
/// function value at that point's centroid, which is the dof node for the
/// supported Lagrange layouts (vertices, edge midpoints).
template <typename F>
std::vector<double> interpolate_local(const MeshPlex& mesh, const Section& section, F&& f) {
    std::vector<double> local(static_cast<std::size_t>(section.total_size()));
    for (PointId p = 0; p < mesh.num_points(); ++p)
        for (int field = 0; field < section.num_fields(); ++field) {
            const int n = section.dof(p, field);
            if (n == 0) continue;
            const auto x = mesh.point_centroid(p);
            const double value =
                f(std::span<const double>(x.data(), static_cast<std::size_t>(mesh.dim())));
            const int base = section.offset(p, field);
            for (int i = 0; i < n; ++i) local[static_cast<std::size_t>(base + i)] = value;
        }
    return local;
}

/// Interpolation restricted to the unconstrained (global) dofs.
template <typename F>
std::vector<double> interpolate_global(const MeshPlex& mesh, const Section& section,
                                       const GlobalMap& gmap, F&& f) {
    const auto local = interpolate_local(mesh, section, f);
    std::vector<double> g(static_cast<std::size_t>(gmap.num_global));
    for (std::size_t i = 0; i < local.size(); ++i) {
        const auto gi = gmap.local_to_global[i];
        if (gi != GlobalMap::kConstrained) g[static_cast<std::size_t>(gi)] = local[i];
    }
    return g;
}

} // namespace femplex
