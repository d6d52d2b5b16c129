#pragma once

#include "femplex/discretization.hpp"
#include "femplex/layout.hpp"
#include "femplex/mesh.hpp"
#include "femplex/physics.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace femplex {

/// Cost model counters. Flops and bytes follow the documented per-cell
/// formulas next to each accumulation site; they count the work an ideal
/// implementation of the algorithm performs, not hardware events.
struct PerfCounters {
    std::int64_t flops = 0;
    std::int64_t bytes = 0;
    std::int64_t cells = 0;
    std::int64_t quadrature_points = 0;

    PerfCounters& operator+=(const PerfCounters& o) {
        flops += o.flops;
        bytes += o.bytes;
        cells += o.cells;
        quadrature_points += o.quadrature_points;
        return *this;
    }
};

/// CSR matrix over the global (unconstrained) dof space.
struct SparseMatrix {
    std::int32_t rows = 0;
    std::int32_t cols = 0;
    std::vector<std::int32_t> row_ptr; ///< rows + 1
    std::vector<std::int32_t> col;     ///< ascending within each row
    std::vector<double> val;

    std::int64_t nnz() const { return static_cast<std::int64_t>(col.size()); }

    void apply(std::span<const double> x, std::span<double> y) const {
        if (static_cast<std::int32_t>(x.size()) != cols ||
            static_cast<std::int32_t>(y.size()) != rows)
            throw std::invalid_argument("spmv size mismatch");
        for (std::int32_t r = 0; r < rows; ++r) {
            double sum = 0.0;
            for (std::int32_t k = row_ptr[static_cast<std::size_t>(r)];
                 k < row_ptr[static_cast<std::size_t>(r) + 1]; ++k)
                sum += val[static_cast<std::size_t>(k)] *
                       x[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
            y[static_cast<std::size_t>(r)] = sum;
        }
    }

    double coeff(std::int32_t r, std::int32_t c) const {
        const auto first = col.begin() + row_ptr[static_cast<std::size_t>(r)];
        const auto last = col.begin() + row_ptr[static_cast<std::size_t>(r) + 1];
        const auto it = std::lower_bound(first, last, c);
        if (it == last || *it != c) return 0.0;
        return val[static_cast<std::size_t>(it - col.begin())];
    }

    double row_sum(std::int32_t r) const {
        double s = 0.0;
        for (std::int32_t k = row_ptr[static_cast<std::size_t>(r)];
             k < row_ptr[static_cast<std::size_t>(r) + 1]; ++k)
            s += val[static_cast<std::size_t>(k)];
        return s;
    }

    double max_asymmetry() const {
        double worst = 0.0;
        for (std::int32_t r = 0; r < rows; ++r)
            for (std::int32_t k = row_ptr[static_cast<std::size_t>(r)];
                 k < row_ptr[static_cast<std::size_t>(r) + 1]; ++k)
                worst = std::max(worst, std::abs(val[static_cast<std::size_t>(k)] -
                                                 coeff(col[static_cast<std::size_t>(k)], r)));
        return worst;
    }

    /// One "row col value" line per stored entry, 17 significant digits.
    void write_triplets(std::ostream& out) const {
        out << std::setprecision(17);
        for (std::int32_t r = 0; r < rows; ++r)
            for (std::int32_t k = row_ptr[static_cast<std::size_t>(r)];
                 k < row_ptr[static_cast<std::size_t>(r) + 1]; ++k)
                out << r << ' ' << col[static_cast<std::size_t>(k)] << ' '
                    << val[static_cast<std::size_t>(k)] << '\n';
    }

    void add_at(std::int32_t r, std::int32_t c, double v) {
        const auto first = col.begin() + row_ptr[static_cast<std::size_t>(r)];
        const auto last = col.begin() + row_ptr[static_cast<std::size_t>(r) + 1];
        const auto it = std::lower_bound(first, last, c);
        if (it == last || *it != c) throw std::logic_error("entry outside sparsity pattern");
        val[static_cast<std::size_t>(it - col.begin())] += v;
    }
};

struct AssemblerOptions {
    int quadrature_degree = 0; ///< 0 picks 2 * element degree
    int chunk_size = 32;
    int num_threads = 1;
};

/// Reusable per-worker buffers for one chunk of cells.
struct ChunkWorkspace {
    std::vector<double> out;  ///< chunk_size x out_stride element results
    std::vector<double> u_e;  ///< closure coefficients of the state
    std::vector<double> x_e;  ///< closure coefficients of the apply direction
    std::vector<double> a_e;  ///< closure coefficients of the auxiliary field
    std::vector<double> dphys;       ///< nq x nb x dim physical basis gradients
    std::vector<double> aux_dphys;   ///< nq x aux_nb x dim
    std::vector<double> u_q, gu_q;   ///< c, c x dim
    std::vector<double> x_q, gx_q;   ///< c, c x dim
    std::vector<double> a_q, ga_q;   ///< na, na x dim
    std::vector<double> f0, f1;      ///< c, c x dim
    std::vector<double> f00, f01, f10, f11;
    std::vector<double> v0, v1; ///< block action accumulators, c and c x dim
};

/// Cell-loop integrator: unified residual evaluation, Jacobian assembly, and
/// matrix-free Jacobian action for one pointwise model over one section.
///
/// Cells are processed in fixed-size chunks. Element integration is pure per
/// cell and may run on several threads; results are scattered into global
/// storage by ascending cell id on one thread, so outputs are bitwise
/// reproducible across chunk sizes and thread counts.
///
/// The mesh, section, and global map must outlive the assembler.
class Assembler {
public:
    Assembler(const MeshPlex& mesh, const Section& section, const GlobalMap& gmap,
              Element element, PointwiseModel model, AssemblerOptions opts = {})
        : mesh_(&mesh), section_(&section), gmap_(&gmap), element_(element),
          model_(std::move(model)), opts_(opts) {
        check_element(element_);
        if (opts_.chunk_size < 1) throw std::invalid_argument("chunk size must be >= 1");
        if (opts_.num_threads < 1) throw std::invalid_argument("thread count must be >= 1");
        if (section.num_fields() != 1)
            throw std::invalid_argument("assembler expects a single-field section");
        if (section.components(0) != model_.n_components)
            throw std::invalid_argument("section/model component mismatch");

        const auto [c0, c1] = mesh.height_stratum(0);
        for (PointId c = c0; c < c1; ++c)
            if (mesh.cell_shape(c) != element_.shape)
                throw std::invalid_argument("all cells must match the element shape");

        const int degree =
            opts_.quadrature_degree > 0 ? opts_.quadrature_degree : default_quadrature_degree(element_);
        rule_ = make_quadrature(element_.shape, degree);
        tab_ = tabulate(element_, rule_);
        coord_section_ = coordinate_section(mesh);

        const auto slots = element_slots_per_depth(element_);
        for (int d = 0; d <= mesh.dim(); ++d) {
            const auto [p0, p1] = mesh.depth_stratum(d);
            if (p0 < p1 && section.slots(p0, 0) != slots[static_cast<std::size_t>(d)])
                throw std::invalid_argument("section layout does not match the element");
        }

        cell_vertex_total_ = 0;
        for (PointId c = c0; c < c1; ++c)
            cell_vertex_total_ += shape_num_vertices(mesh.cell_shape(c));
    }

    /// Auxiliary (coefficient) field sampled at quadrature points alongside
    /// the state. `aux_local` is a local vector over `aux_section`.
    void set_auxiliary(Element aux_element, const Section& aux_section,
                       std::vector<double> aux_local) {
        check_element(aux_element);
        if (aux_element.shape != element_.shape)
            throw std::invalid_argument("auxiliary element shape mismatch");
        if (aux_section.num_fields() != 1 ||
            aux_section.components(0) != model_.n_aux_components)
            throw std::invalid_argument("auxiliary section/model mismatch");
        if (static_cast<int>(aux_local.size()) != aux_section.total_size())
            throw std::invalid_argument("auxiliary vector size mismatch");
        aux_section_ = aux_section;
        aux_tab_ = tabulate(aux_element, rule_);
        aux_local_ = std::move(aux_local);
        have_aux_ = true;
    }

    /// Values of constrained dofs, evaluated at dof locations when scattering
    /// global vectors. Unset means homogeneous (zero) boundary values.
    void set_boundary_values(BoundaryFn bc) { bc_ = std::move(bc); }

    int num_global() const { return gmap_->num_global; }
    const PointwiseModel& model() const { return model_; }
    const QuadratureRule& quadrature() const { return rule_; }
    const Tabulation& tabulation() const { return tab_; }
    const PerfCounters& perf() const { return perf_; }
    void reset_perf() { perf_ = {}; }

    /// Global residual r(u). Constrained dofs take their boundary values in
    /// the element gather; constrained rows are dropped in the scatter.
    std::vector<double> evaluate_residual(std::span<const double> u_global) {
        const auto u_local = global_to_local(*mesh_, *section_, *gmap_, u_global, bc_);
        std::vector<double> r(static_cast<std::size_t>(gmap_->num_global), 0.0);
        const int ndof = num_cell_dofs();

        process_cells(ndof,
                      [&](PointId cell, ChunkWorkspace& ws, double* out) {
                          integrate_residual_cell(cell, u_local, ws, out);
                      },
                      [&](PointId cell, const double* out) {
                          scatter_vector(cell, {out, static_cast<std::size_t>(ndof)}, r);
                      });

        // Per cell: u_q and grad u_q cost one multiply-add per basis value
        // and per derivative component, 2*nq*ndof*(1+dim); the B^T/D^T
        // reduction costs the same again; the model adds its own flops at
        // each point.
        const std::int64_t nq = rule_.num_points();
        const std::int64_t nC = num_cells();
        PerfCounters p;
        p.flops = nC * (4 * nq * ndof * (1 + mesh_->dim()) + nq * model_.residual_flops_per_qp);
        // Streamed data per cell: read u_e, write f_e, read cell vertex
        // coordinates.
        p.bytes = 8 * (2 * static_cast<std::int64_t>(ndof) * nC +
                       static_cast<std::int64_t>(cell_vertex_total_) * mesh_->dim());
        p.cells = nC;
        p.quadrature_points = nC * nq;
        perf_ += p;
        return r;
    }

    /// Jacobian action y = J(u) x without forming J: the direction passes
    /// through the same basis evaluation as the state, the four derivative
    /// blocks act on (x_q, grad x_q), and the result reduces through B^T/D^T.
    std::vector<double> apply_jacobian(std::span<const double> u_global,
                                       std::span<const double> x_global) {
        const auto u_local = global_to_local(*mesh_, *section_, *gmap_, u_global, bc_);
        const auto x_local = global_to_local(*mesh_, *section_, *gmap_, x_global, {});
        std::vector<double> y(static_cast<std::size_t>(gmap_->num_global), 0.0);
        const int ndof = num_cell_dofs();

        process_cells(ndof,
                      [&](PointId cell, ChunkWorkspace& ws, double* out) {
                          integrate_apply_cell(cell, u_local, x_local, ws, out);
                      },
                      [&](PointId cell, const double* out) {
                          scatter_vector(cell, {out, static_cast<std::size_t>(ndof)}, y);
                      });

        // Per cell: three basis sweeps (u_q, x_q, reduction) at
        // 2*nq*ndof*(1+dim) each, plus a dense (c*(1+dim))^2 block action and
        // the model's block evaluation at every point.
        const std::int64_t nq = rule_.num_points();
        const std::int64_t nC = num_cells();
        const std::int64_t block = static_cast<std::int64_t>(model_.n_components) * (1 + mesh_->dim());
        PerfCounters p;
        p.flops = nC * (6 * nq * ndof * (1 + mesh_->dim()) +
                        nq * (2 * block * block + model_.jacobian_flops_per_qp));
        // Streamed data per cell: read u_e and x_e, write y_e, read vertex
        // coordinates.
        p.bytes = 8 * (3 * static_cast<std::int64_t>(ndof) * nC +
                       static_cast<std::int64_t>(cell_vertex_total_) * mesh_->dim());
        p.cells = nC;
        p.quadrature_points = nC * nq;
        perf_ += p;
        return y;
    }

    /// Assembled Jacobian over the unconstrained dofs. Constrained columns
    /// are dropped; the lifted boundary values enter through the residual.
    SparseMatrix assemble_jacobian(std::span<const double> u_global) {
        const auto u_local = global_to_local(*mesh_, *section_, *gmap_, u_global, bc_);
        SparseMatrix A = build_sparsity();
        const int ndof = num_cell_dofs();
        std::vector<std::int32_t> glob;

        process_cells(ndof * ndof,
                      [&](PointId cell, ChunkWorkspace& ws, double* out) {
                          integrate_jacobian_cell(cell, u_local, ws, out);
                      },
                      [&](PointId cell, const double* out) {
                          closure_globals(cell, glob);
                          for (int i = 0; i < ndof; ++i) {
                              if (glob[static_cast<std::size_t>(i)] < 0) continue;
                              for (int j = 0; j < ndof; ++j) {
                                  if (glob[static_cast<std::size_t>(j)] < 0) continue;
                                  A.add_at(glob[static_cast<std::size_t>(i)],
                                           glob[static_cast<std::size_t>(j)],
                                           out[i * ndof + j]);
                              }
                          }
                      });

        // Per cell: each of the nq quadrature points contributes a rank
        // update touching every (i, j) basis pair in every of the (1+dim)^2
        // derivative block combinations, one multiply-add each.
        const std::int64_t nq = rule_.num_points();
        const std::int64_t nC = num_cells();
        const std::int64_t d1 = 1 + mesh_->dim();
        PerfCounters p;
        p.flops = nC * nq * (2 * static_cast<std::int64_t>(ndof) * ndof * d1 * d1 +
                             model_.jacobian_flops_per_qp);
        // Streamed data per cell: read u_e, write K_e, read vertex coords.
        p.bytes = 8 * ((static_cast<std::int64_t>(ndof) + static_cast<std::int64_t>(ndof) * ndof) * nC +
                       static_cast<std::int64_t>(cell_vertex_total_) * mesh_->dim());
        p.cells = nC;
        p.quadrature_points = nC * nq;
        perf_ += p;
        return A;
    }

    /// Worst relative error of the assembled Jacobian action against a
    /// centered difference of the residual over random unit directions.
    double check_jacobian_fd(std::span<const double> u_global, int num_directions = 5,
                             double step = 1e-7, unsigned seed = 99) {
        const SparseMatrix A = assemble_jacobian(u_global);
        const int n = gmap_->num_global;
        std::mt19937 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> x(static_cast<std::size_t>(n));
        std::vector<double> up(u_global.begin(), u_global.end());
        std::vector<double> um(u_global.begin(), u_global.end());
        std::vector<double> jx(static_cast<std::size_t>(n));
        double worst = 0.0;
        for (int k = 0; k < num_directions; ++k) {
            double norm = 0.0;
            for (auto& e : x) {
                e = gauss(rng);
                norm += e * e;
            }
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] /= norm;
                up[i] = u_global[i] + step * x[i];
                um[i] = u_global[i] - step * x[i];
            }
            const auto rp = evaluate_residual(up);
            const auto rm = evaluate_residual(um);
            A.apply(x, jx);
            double diff2 = 0.0, fd2 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double fd = (rp[i] - rm[i]) / (2 * step);
                diff2 += (jx[i] - fd) * (jx[i] - fd);
                fd2 += fd * fd;
            }
            worst = std::max(worst, std::sqrt(diff2) / std::max(std::sqrt(fd2), 1e-300));
        }
        return worst;
    }

    /// Cost model for one CSR matrix-vector product: two flops per stored
    /// entry; bytes stream the values, column indices, row offsets, and the
    /// two dense vectors.
    static PerfCounters spmv_counters(const SparseMatrix& A) {
        PerfCounters p;
        p.flops = 2 * A.nnz();
        p.bytes = A.nnz() * static_cast<std::int64_t>(sizeof(double) + sizeof(std::int32_t)) +
                  static_cast<std::int64_t>(A.row_ptr.size()) * sizeof(std::int32_t) +
                  8 * (static_cast<std::int64_t>(A.rows) + A.cols);
        return p;
    }

private:
    std::int64_t num_cells() const {
        const auto [c0, c1] = mesh_->height_stratum(0);
        return c1 - c0;
    }

    int num_cell_dofs() const { return tab_.nb * model_.n_components; }

    void closure_globals(PointId cell, std::vector<std::int32_t>& glob) const {
        glob.clear();
        detail::for_each_closure_dof(*mesh_, *section_, cell, [&](int i) {
            glob.push_back(gmap_->local_to_global[static_cast<std::size_t>(i)]);
        });
    }

    void scatter_vector(PointId cell, std::span<const double> f_e, std::span<double> g) const {
        std::size_t k = 0;
        detail::for_each_closure_dof(*mesh_, *section_, cell, [&](int i) {
            const std::int32_t gi = gmap_->local_to_global[static_cast<std::size_t>(i)];
            if (gi >= 0) g[static_cast<std::size_t>(gi)] += f_e[k];
            ++k;
        });
    }

    ChunkWorkspace make_workspace(int out_stride) const {
        const int dim = mesh_->dim();
        const int c = model_.n_components;
        const int na = model_.n_aux_components;
        ChunkWorkspace ws;
        ws.out.resize(static_cast<std::size_t>(opts_.chunk_size) * out_stride);
        ws.dphys.resize(static_cast<std::size_t>(tab_.nq) * tab_.nb * dim);
        if (have_aux_) ws.aux_dphys.resize(static_cast<std::size_t>(aux_tab_.nq) * aux_tab_.nb * dim);
        ws.u_q.resize(static_cast<std::size_t>(c));
        ws.gu_q.resize(static_cast<std::size_t>(c) * dim);
        ws.x_q.resize(static_cast<std::size_t>(c));
        ws.gx_q.resize(static_cast<std::size_t>(c) * dim);
        ws.a_q.resize(static_cast<std::size_t>(na));
        ws.ga_q.resize(static_cast<std::size_t>(na) * dim);
        ws.f0.resize(static_cast<std::size_t>(c));
        ws.f1.resize(static_cast<std::size_t>(c) * dim);
        ws.f00.resize(static_cast<std::size_t>(c) * c);
        ws.f01.resize(static_cast<std::size_t>(c) * c * dim);
        ws.f10.resize(static_cast<std::size_t>(c) * dim * c);
        ws.f11.resize(static_cast<std::size_t>(c) * dim * c * dim);
        ws.v0.resize(static_cast<std::size_t>(c));
        ws.v1.resize(static_cast<std::size_t>(c) * dim);
        return ws;
    }

    /// Chunked traversal. Integration runs per cell into the chunk buffer
    /// (parallel across chunks when num_threads > 1); the scatter callback
    /// then runs on this thread in ascending cell order.
    template <typename Integrate, typename Scatter>
    void process_cells(int out_stride, Integrate integrate, Scatter scatter) {
        const auto [c0, c1] = mesh_->height_stratum(0);
        const int chunk = opts_.chunk_size;
        const int threads = opts_.num_threads;
        const std::int64_t num_chunks = (static_cast<std::int64_t>(c1 - c0) + chunk - 1) / chunk;

        std::vector<ChunkWorkspace> ws;
        for (int t = 0; t < threads; ++t) ws.push_back(make_workspace(out_stride));

        auto chunk_bounds = [&](std::int64_t ci) {
            const PointId lo = c0 + static_cast<PointId>(ci * chunk);
            const PointId hi = static_cast<PointId>(
                std::min<std::int64_t>(static_cast<std::int64_t>(lo) + chunk, c1));
            return std::pair{lo, hi};
        };
        auto run_chunk = [&](std::int64_t ci, ChunkWorkspace& w) {
            const auto [lo, hi] = chunk_bounds(ci);
            for (PointId cell = lo; cell < hi; ++cell)
                integrate(cell, w, w.out.data() + static_cast<std::size_t>(cell - lo) * out_stride);
        };
        auto scatter_chunk = [&](std::int64_t ci, const ChunkWorkspace& w) {
            const auto [lo, hi] = chunk_bounds(ci);
            for (PointId cell = lo; cell < hi; ++cell)
                scatter(cell, w.out.data() + static_cast<std::size_t>(cell - lo) * out_stride);
        };

        if (threads == 1) {
            for (std::int64_t ci = 0; ci < num_chunks; ++ci) {
                run_chunk(ci, ws[0]);
                scatter_chunk(ci, ws[0]);
            }
            return;
        }
        for (std::int64_t base = 0; base < num_chunks; base += threads) {
            const int batch = static_cast<int>(std::min<std::int64_t>(threads, num_chunks - base));
            std::vector<std::exception_ptr> errors(static_cast<std::size_t>(batch));
            {
                std::vector<std::jthread> pool;
                for (int t = 0; t < batch; ++t)
                    pool.emplace_back([&, t] {
                        try {
                            run_chunk(base + t, ws[static_cast<std::size_t>(t)]);
                        } catch (...) {
                            errors[static_cast<std::size_t>(t)] = std::current_exception();
                        }
                    });
            }
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
            for (int t = 0; t < batch; ++t) scatter_chunk(base + t, ws[static_cast<std::size_t>(t)]);
        }
    }

    void gather_cell(PointId cell, const Section& sec, std::span<const double> local,
                     std::vector<double>& out) const {
        out.clear();
        detail::for_each_closure_dof(*mesh_, sec, cell, [&](int i) {
            out.push_back(local[static_cast<std::size_t>(i)]);
        });
    }

    static void physical_gradients(const Tabulation& tab, const CellGeometry& geo,
                                   std::vector<double>& dphys) {
        const int dim = tab.dim;
        for (int q = 0; q < tab.nq; ++q) {
            const auto jinv = geo.inverse_jacobian(q);
            for (int i = 0; i < tab.nb; ++i)
                for (int d = 0; d < dim; ++d) {
                    double s = 0.0;
                    for (int r = 0; r < dim; ++r)
                        s += tab.deriv(q, i, r) * jinv[static_cast<std::size_t>(r * dim + d)];
                    dphys[static_cast<std::size_t>((q * tab.nb + i) * dim + d)] = s;
                }
        }
    }

    /// u_q[ci] = sum_i B(q,i) u_e[i*c+ci]; grad analogously through dphys.
    static void evaluate_field(int q, const Tabulation& tab, std::span<const double> dphys,
                               std::span<const double> coeffs, int c, std::span<double> val,
                               std::span<double> grad) {
        const int dim = tab.dim;
        std::fill(val.begin(), val.end(), 0.0);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int i = 0; i < tab.nb; ++i) {
            const double b = tab.basis(q, i);
            for (int ci = 0; ci < c; ++ci) {
                const double coef = coeffs[static_cast<std::size_t>(i * c + ci)];
                val[static_cast<std::size_t>(ci)] += b * coef;
                for (int d = 0; d < dim; ++d)
                    grad[static_cast<std::size_t>(ci * dim + d)] +=
                        dphys[static_cast<std::size_t>((q * tab.nb + i) * dim + d)] * coef;
            }
        }
    }

    void prepare_cell(PointId cell, ChunkWorkspace& ws, CellGeometry& geo) const {
        geo = compute_cell_geometry(*mesh_, coord_section_, mesh_->coordinates(), cell, rule_);
        physical_gradients(tab_, geo, ws.dphys);
        if (have_aux_) {
            gather_cell(cell, aux_section_, aux_local_, ws.a_e);
            physical_gradients(aux_tab_, geo, ws.aux_dphys);
        }
    }

    PointValues point_values(int q, const CellGeometry& geo, ChunkWorkspace& ws) const {
        if (have_aux_)
            evaluate_field(q, aux_tab_, ws.aux_dphys, ws.a_e, model_.n_aux_components, ws.a_q,
                           ws.ga_q);
        return {mesh_->dim(), model_.n_components, geo.point(q), ws.u_q, ws.gu_q,
                std::span<const double>(ws.a_q), std::span<const double>(ws.ga_q)};
    }

    void eval_blocks(const PointValues& v, ChunkWorkspace& ws) const {
        detail::eval_block(model_.f00, v, ws.f00);
        detail::eval_block(model_.f01, v, ws.f01);
        detail::eval_block(model_.f10, v, ws.f10);
        detail::eval_block(model_.f11, v, ws.f11);
    }

    void integrate_residual_cell(PointId cell, std::span<const double> u_local,
                                 ChunkWorkspace& ws, double* f_e) const {
        CellGeometry geo;
        prepare_cell(cell, ws, geo);
        gather_cell(cell, *section_, u_local, ws.u_e);
        const int c = model_.n_components;
        const int dim = mesh_->dim();
        const int ndof = tab_.nb * c;
        std::fill(f_e, f_e + ndof, 0.0);
        for (int q = 0; q < tab_.nq; ++q) {
            evaluate_field(q, tab_, ws.dphys, ws.u_e, c, ws.u_q, ws.gu_q);
            const PointValues v = point_values(q, geo, ws);
            detail::eval_block(model_.f0, v, ws.f0);
            detail::eval_block(model_.f1, v, ws.f1);
            const double s = geo.scaling[static_cast<std::size_t>(q)];
            for (int i = 0; i < tab_.nb; ++i) {
                const double b = s * tab_.basis(q, i);
                for (int ci = 0; ci < c; ++ci) {
                    double acc = b * ws.f0[static_cast<std::size_t>(ci)];
                    for (int d = 0; d < dim; ++d)
                        acc += s * ws.dphys[static_cast<std::size_t>((q * tab_.nb + i) * dim + d)] *
                               ws.f1[static_cast<std::size_t>(ci * dim + d)];
                    f_e[i * c + ci] += acc;
                }
            }
        }
    }

    void integrate_apply_cell(PointId cell, std::span<const double> u_local,
                              std::span<const double> x_local, ChunkWorkspace& ws,
                              double* y_e) const {
        CellGeometry geo;
        prepare_cell(cell, ws, geo);
        gather_cell(cell, *section_, u_local, ws.u_e);
        gather_cell(cell, *section_, x_local, ws.x_e);
        const int c = model_.n_components;
        const int dim = mesh_->dim();
        const int ndof = tab_.nb * c;
        std::fill(y_e, y_e + ndof, 0.0);
        for (int q = 0; q < tab_.nq; ++q) {
            evaluate_field(q, tab_, ws.dphys, ws.u_e, c, ws.u_q, ws.gu_q);
            evaluate_field(q, tab_, ws.dphys, ws.x_e, c, ws.x_q, ws.gx_q);
            const PointValues v = point_values(q, geo, ws);
            eval_blocks(v, ws);

            // v0 = f00 x_q + f01 : grad x_q ; v1 = f10 x_q + f11 : grad x_q
            for (int ci = 0; ci < c; ++ci) {
                double acc = 0.0;
                for (int cj = 0; cj < c; ++cj) {
                    acc += ws.f00[static_cast<std::size_t>(ci * c + cj)] *
                           ws.x_q[static_cast<std::size_t>(cj)];
                    for (int e = 0; e < dim; ++e)
                        acc += ws.f01[static_cast<std::size_t>((ci * c + cj) * dim + e)] *
                               ws.gx_q[static_cast<std::size_t>(cj * dim + e)];
                }
                ws.v0[static_cast<std::size_t>(ci)] = acc;
                for (int d = 0; d < dim; ++d) {
                    double accd = 0.0;
                    for (int cj = 0; cj < c; ++cj) {
                        accd += ws.f10[static_cast<std::size_t>((ci * dim + d) * c + cj)] *
                                ws.x_q[static_cast<std::size_t>(cj)];
                        for (int e = 0; e < dim; ++e)
                            accd += ws.f11[static_cast<std::size_t>(((ci * dim + d) * c + cj) * dim + e)] *
                                    ws.gx_q[static_cast<std::size_t>(cj * dim + e)];
                    }
                    ws.v1[static_cast<std::size_t>(ci * dim + d)] = accd;
                }
            }

            const double s = geo.scaling[static_cast<std::size_t>(q)];
            for (int i = 0; i < tab_.nb; ++i)
                for (int ci = 0; ci < c; ++ci) {
                    double acc = tab_.basis(q, i) * ws.v0[static_cast<std::size_t>(ci)];
                    for (int d = 0; d < dim; ++d)
                        acc += ws.dphys[static_cast<std::size_t>((q * tab_.nb + i) * dim + d)] *
                               ws.v1[static_cast<std::size_t>(ci * dim + d)];
                    y_e[i * c + ci] += s * acc;
                }
        }
    }

    void integrate_jacobian_cell(PointId cell, std::span<const double> u_local,
                                 ChunkWorkspace& ws, double* K_e) const {
        CellGeometry geo;
        prepare_cell(cell, ws, geo);
        gather_cell(cell, *section_, u_local, ws.u_e);
        const int c = model_.n_components;
        const int dim = mesh_->dim();
        const int ndof = tab_.nb * c;
        std::fill(K_e, K_e + ndof * ndof, 0.0);
        for (int q = 0; q < tab_.nq; ++q) {
            evaluate_field(q, tab_, ws.dphys, ws.u_e, c, ws.u_q, ws.gu_q);
            const PointValues v = point_values(q, geo, ws);
            eval_blocks(v, ws);
            const double s = geo.scaling[static_cast<std::size_t>(q)];
            const auto dp = [&](int i, int d) {
                return ws.dphys[static_cast<std::size_t>((q * tab_.nb + i) * dim + d)];
            };
            for (int i = 0; i < tab_.nb; ++i)
                for (int ci = 0; ci < c; ++ci) {
                    const int row = i * c + ci;
                    for (int j = 0; j < tab_.nb; ++j)
                        for (int cj = 0; cj < c; ++cj) {
                            double acc = tab_.basis(q, i) *
                                         ws.f00[static_cast<std::size_t>(ci * c + cj)] *
                                         tab_.basis(q, j);
                            for (int e = 0; e < dim; ++e)
                                acc += tab_.basis(q, i) *
                                       ws.f01[static_cast<std::size_t>((ci * c + cj) * dim + e)] *
                                       dp(j, e);
                            for (int d = 0; d < dim; ++d) {
                                acc += dp(i, d) *
                                       ws.f10[static_cast<std::size_t>((ci * dim + d) * c + cj)] *
                                       tab_.basis(q, j);
                                for (int e = 0; e < dim; ++e)
                                    acc += dp(i, d) *
                                           ws.f11[static_cast<std::size_t>(
                                               ((ci * dim + d) * c + cj) * dim + e)] *
                                           dp(j, e);
                            }
                            K_e[row * ndof + j * c + cj] += s * acc;
                        }
                }
        }
    }

    /// CSR pattern: for every cell, all pairs of unconstrained closure dofs.
    SparseMatrix build_sparsity() const {
        const int n = gmap_->num_global;
        std::vector<std::vector<std::int32_t>> adj(static_cast<std::size_t>(n));
        const auto [c0, c1] = mesh_->height_stratum(0);
        std::vector<std::int32_t> glob;
        for (PointId cell = c0; cell < c1; ++cell) {
            closure_globals(cell, glob);
            for (const std::int32_t r : glob) {
                if (r < 0) continue;
                for (const std::int32_t c : glob)
                    if (c >= 0) adj[static_cast<std::size_t>(r)].push_back(c);
            }
        }
        SparseMatrix A;
        A.rows = A.cols = n;
        A.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
        for (std::int32_t r = 0; r < n; ++r) {
            auto& row = adj[static_cast<std::size_t>(r)];
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
            A.row_ptr[static_cast<std::size_t>(r) + 1] =
                A.row_ptr[static_cast<std::size_t>(r)] + static_cast<std::int32_t>(row.size());
            A.col.insert(A.col.end(), row.begin(), row.end());
        }
        A.val.assign(A.col.size(), 0.0);
        return A;
    }

    const MeshPlex* mesh_;
    const Section* section_;
    const GlobalMap* gmap_;
    Element element_;
    PointwiseModel model_;
    AssemblerOptions opts_;
    QuadratureRule rule_;
    Tabulation tab_;
    Section coord_section_;
    BoundaryFn bc_;
    bool have_aux_ = false;
    Section aux_section_;
    Tabulation aux_tab_;
    std::vector<double> aux_local_;
    std::int64_t cell_vertex_total_ = 0;
    PerfCounters perf_;
};

} // namespace femplex
