#pragma once

#include "femplex/mms.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace femplex::cli {

/// Parsed command line. `command` selects the action; the rest mirror the
/// long options one-to-one.
struct RunConfig {
    std::string command;
    std::string mesh = "tri-square";
    int n = 8;
    std::vector<int> levels = {8, 16, 32};
    std::string element = "p1";
    std::string model = "poisson";
    std::optional<double> lambda;      ///< bratu only
    std::optional<double> coefficient; ///< mass only
    int chunk_size = 32;
    int threads = 1;
    std::string output; ///< empty writes to stdout
    std::string format = "table";
    bool no_timing = false;
    bool dump_jacobian = false;
};

namespace detail {

inline bool one_of(const std::string& v, std::initializer_list<const char*> set) {
    for (const char* s : set)
        if (v == s) return true;
    return false;
}

/// Empty result means the configuration is usable.
inline std::string validate(const RunConfig& cfg) {
    if (!one_of(cfg.command, {"converge", "check-jacobian", "verify-model", "perf", "residual-dump"}))
        return "unknown command '" + cfg.command + "'";
    if (!one_of(cfg.mesh, {"interval", "tri-square", "quad-square", "tet-cube"}))
        return "unknown mesh '" + cfg.mesh + "'";
    if (!one_of(cfg.element, {"p1", "p2", "q1"})) return "unknown element '" + cfg.element + "'";
    if (!one_of(cfg.model, {"poisson", "mass", "bratu"})) return "unknown model '" + cfg.model + "'";
    if (!one_of(cfg.format, {"table", "csv"})) return "unknown format '" + cfg.format + "'";
    if ((cfg.mesh == "quad-square") != (cfg.element == "q1"))
        return "q1 elements pair with quad-square meshes, and only with them";
    if (cfg.element == "p2" && cfg.mesh == "tet-cube") return "p2 is not available on tet-cube";
    if (cfg.lambda && cfg.model != "bratu") return "--lambda applies only to the bratu model";
    if (cfg.coefficient && cfg.model != "mass")
        return "--coefficient applies only to the mass model";
    if (cfg.n < 1) return "--n must be >= 1";
    if (cfg.levels.empty()) return "--levels needs at least one refinement";
    for (const int n : cfg.levels)
        if (n < 1) return "--levels entries must be >= 1";
    if (cfg.chunk_size < 1) return "--chunk-size must be >= 1";
    if (cfg.threads < 1) return "--threads must be >= 1";
    return {};
}

inline int mesh_dim(const std::string& mesh) {
    if (mesh == "interval") return 1;
    if (mesh == "tet-cube") return 3;
    return 2;
}

inline MeshFactory mesh_factory(const std::string& mesh) {
    if (mesh == "interval") return unit_interval_mesh;
    if (mesh == "quad-square") return unit_square_quads;
    if (mesh == "tet-cube") return unit_cube_tets;
    return unit_square_triangles;
}

inline Element make_element(const RunConfig& cfg) {
    CellShape shape = CellShape::triangle;
    if (cfg.mesh == "interval") shape = CellShape::segment;
    if (cfg.mesh == "quad-square") shape = CellShape::quad;
    if (cfg.mesh == "tet-cube") shape = CellShape::tetrahedron;
    return {shape, cfg.element == "p2" ? 2 : 1};
}

inline ManufacturedCase make_case(const RunConfig& cfg) {
    const int dim = mesh_dim(cfg.mesh);
    if (cfg.model == "bratu") return manufactured_bratu(cfg.lambda.value_or(2.0), dim);
    if (cfg.model == "mass") {
        const double c = cfg.coefficient.value_or(1.0);
        const SpatialFn exact = manufactured_sine(dim).exact;
        ManufacturedCase mc;
        mc.model = model_mass_reaction(c, [c, exact](std::span<const double> x) { return c * exact(x); });
        mc.model.exact_solution = exact;
        mc.exact = exact;
        return mc;
    }
    return manufactured_sine(dim);
}

inline std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Mesh plus everything needed to assemble the configured problem at one
/// refinement. Holds the storage the assembler points into.
struct SingleProblem {
    MeshPlex mesh;
    Section section;
    GlobalMap gmap;
    Element element;
    ManufacturedCase mc;
    BoundaryFn bc;

    SingleProblem(const RunConfig& cfg)
        : mesh(mesh_factory(cfg.mesh)(cfg.n)), element(make_element(cfg)), mc(make_case(cfg)) {
        auto layout = mark_boundary_constrained(
            mesh, create_section(mesh, {{element_slots_per_depth(element), 1}}), 0);
        section = std::move(layout.section);
        gmap = std::move(layout.gmap);
        bc = [exact = mc.exact](std::span<const double> x, int, int) { return exact(x); };
    }

    Assembler make_assembler(const RunConfig& cfg) {
        Assembler a(mesh, section, gmap, element, mc.model,
                    {.chunk_size = cfg.chunk_size, .num_threads = cfg.threads});
        a.set_boundary_values(bc);
        return a;
    }

    std::vector<double> nodal_state() const {
        return interpolate_global(mesh, section, gmap, mc.exact);
    }
};

inline int cmd_converge(const RunConfig& cfg, std::ostream& os) {
    ConvergenceOptions opts;
    opts.assembler = {.chunk_size = cfg.chunk_size, .num_threads = cfg.threads};
    opts.record_time = !cfg.no_timing;
    const auto study =
        run_convergence(mesh_factory(cfg.mesh), make_element(cfg), make_case(cfg), cfg.levels, opts);

    if (cfg.format == "csv") {
        os << "h,dofs,l2_error,rate,seconds\n";
        for (std::size_t i = 0; i < study.levels.size(); ++i) {
            const auto& l = study.levels[i];
            os << g17(l.h) << ',' << l.num_global << ',' << g17(l.error) << ','
               << (i == 0 ? std::string{} : g17(study.rates[i - 1])) << ',' << g17(l.seconds)
               << '\n';
        }
        return 0;
    }
    os << std::setw(12) << "h" << std::setw(10) << "dofs" << std::setw(14) << "l2_error"
       << std::setw(8) << "rate" << std::setw(12) << "seconds" << '\n';
    for (std::size_t i = 0; i < study.levels.size(); ++i) {
        const auto& l = study.levels[i];
        os << std::setw(12) << std::setprecision(5) << l.h << std::setw(10) << l.num_global
           << std::setw(14) << std::scientific << std::setprecision(3) << l.error
           << std::defaultfloat;
        if (i == 0)
            os << std::setw(8) << "-";
        else
            os << std::setw(8) << std::setprecision(3) << study.rates[i - 1];
        os << std::setw(12) << std::setprecision(4) << l.seconds << '\n';
    }
    return 0;
}

inline int cmd_check_jacobian(const RunConfig& cfg, std::ostream& os) {
    SingleProblem prob(cfg);
    Assembler a = prob.make_assembler(cfg);
    const auto u = prob.nodal_state();

    const double fd_error = a.check_jacobian_fd(u);

    const SparseMatrix A = a.assemble_jacobian(u);
    std::mt19937 rng(2026);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> x(u.size()), ax(u.size());
    double mf_error = 0.0;
    for (int k = 0; k < 5; ++k) {
        for (auto& e : x) e = dist(rng);
        const auto y = a.apply_jacobian(u, x);
        A.apply(x, ax);
        double diff = 0.0, scale = 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            diff = std::max(diff, std::abs(y[i] - ax[i]));
            scale = std::max(scale, std::abs(ax[i]));
        }
        mf_error = std::max(mf_error, diff / scale);
    }

    const bool pass = fd_error <= 1e-6 && mf_error <= 1e-12;
    os << "finite-difference relative error: " << std::scientific << std::setprecision(3)
       << fd_error << " (tolerance 1e-06)\n";
    os << "matrix-free vs assembled error:   " << mf_error << " (tolerance 1e-12)\n";
    os << (pass ? "PASS" : "FAIL") << '\n';
    return pass ? 0 : 1;
}

inline int cmd_verify_model(const RunConfig& cfg, std::ostream& os) {
    const auto mc = make_case(cfg);
    const auto check = verify_model_derivatives(mc.model, mesh_dim(cfg.mesh));
    const char* names[] = {"f00", "f01", "f10", "f11"};
    os << std::scientific << std::setprecision(3);
    for (int b = 0; b < 4; ++b)
        os << names[b] << " max relative error: " << check.block_error[static_cast<std::size_t>(b)]
           << '\n';
    os << "worst: " << check.max_rel_error << " (tolerance 1e-06)\n";
    os << (check.passed ? "PASS" : "FAIL") << '\n';
    return check.passed ? 0 : 1;
}

inline int cmd_perf(const RunConfig& cfg, std::ostream& os) {
    SingleProblem prob(cfg);
    Assembler a = prob.make_assembler(cfg);
    const auto u = prob.nodal_state();
    const double dofs = std::max(1, a.num_global());

    a.reset_perf();
    (void)a.evaluate_residual(u);
    const PerfCounters residual = a.perf();

    a.reset_perf();
    (void)a.apply_jacobian(u, u);
    const PerfCounters mf = a.perf();

    const SparseMatrix A = a.assemble_jacobian(u);
    const PerfCounters spmv = Assembler::spmv_counters(A);

    struct Row {
        const char* name;
        const PerfCounters& c;
    } rows[] = {{"residual", residual}, {"matrix-free-apply", mf}, {"assembled-apply", spmv}};

    if (cfg.format == "csv") {
        os << "operation,flops_per_dof,bytes_per_dof\n";
        for (const auto& r : rows)
            os << r.name << ',' << g17(r.c.flops / dofs) << ',' << g17(r.c.bytes / dofs) << '\n';
        return 0;
    }
    os << "dofs: " << a.num_global() << "  cells: " << residual.cells << '\n';
    os << std::setw(20) << "operation" << std::setw(16) << "flops/dof" << std::setw(16)
       << "bytes/dof" << '\n';
    os << std::fixed << std::setprecision(1);
    for (const auto& r : rows)
        os << std::setw(20) << r.name << std::setw(16) << r.c.flops / dofs << std::setw(16)
           << r.c.bytes / dofs << '\n';
    return 0;
}

inline int cmd_residual_dump(const RunConfig& cfg, std::ostream& os) {
    SingleProblem prob(cfg);
    Assembler a = prob.make_assembler(cfg);
    const auto u = prob.nodal_state();
    if (cfg.dump_jacobian) {
        a.assemble_jacobian(u).write_triplets(os);
        return 0;
    }
    const auto r = a.evaluate_residual(u);
    for (std::size_t i = 0; i < r.size(); ++i) os << i << " 0 " << g17(r[i]) << '\n';
    return 0;
}

} // namespace detail

/// Executes one parsed command. Returns 0 on success, 1 when a check or a
/// solve fails, 2 on unusable configuration.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const std::string problem = detail::validate(cfg);
    if (!problem.empty()) {
        err << "error: " << problem << '\n';
        return 2;
    }
    std::ofstream file;
    std::ostream* os = &out;
    if (!cfg.output.empty()) {
        file.open(cfg.output);
        if (!file) {
            err << "error: cannot open '" << cfg.output << "' for writing\n";
            return 2;
        }
        os = &file;
    }
    try {
        if (cfg.command == "converge") return detail::cmd_converge(cfg, *os);
        if (cfg.command == "check-jacobian") return detail::cmd_check_jacobian(cfg, *os);
        if (cfg.command == "verify-model") return detail::cmd_verify_model(cfg, *os);
        if (cfg.command == "perf") return detail::cmd_perf(cfg, *os);
        return detail::cmd_residual_dump(cfg, *os);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

/// Command-line front end; see `run` for the execution semantics.
inline int main_with_args(int argc, const char* const* argv, std::ostream& out,
                          std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"finite element workbench on unstructured meshes"};
    app.fallthrough();
    app.require_subcommand(1);

    app.add_option("--mesh", cfg.mesh, "interval, tri-square, quad-square, or tet-cube");
    app.add_option("--n", cfg.n, "refinement parameter (cells per direction)");
    app.add_option("--levels", cfg.levels, "comma-separated refinements for converge")
        ->delimiter(',');
    app.add_option("--element", cfg.element, "p1, p2, or q1");
    app.add_option("--model", cfg.model, "poisson, mass, or bratu");
    app.add_option("--lambda", cfg.lambda, "bratu parameter (bratu model only)");
    app.add_option("--coefficient", cfg.coefficient, "reaction coefficient (mass model only)");
    app.add_option("--chunk-size", cfg.chunk_size, "cells per integration chunk");
    app.add_option("--threads", cfg.threads, "worker threads for cell integration");
    app.add_option("--output", cfg.output, "write command output to this file");
    app.add_option("--format", cfg.format, "table or csv");
    app.add_flag("--no-timing", cfg.no_timing, "report zero seconds for reproducible output");
    app.add_flag("--jacobian", cfg.dump_jacobian, "dump jacobian triplets (residual-dump only)");

    app.add_subcommand("converge", "mesh refinement study with L2 errors and observed orders");
    app.add_subcommand("check-jacobian",
                       "compare the assembled jacobian against finite differences and the "
                       "matrix-free action");
    app.add_subcommand("verify-model", "finite-difference check of the model derivative blocks");
    app.add_subcommand("perf", "cost-model flops and bytes per dof for the core operations");
    app.add_subcommand("residual-dump", "print the residual (or jacobian) as index/value triplets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    return run(cfg, out, err);
}

} // namespace femplex::cli
