#pragma once

#include "femplex/assembly.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace femplex {

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Conjugate gradients from a zero start, relative tolerance 1e-12.
inline std::vector<double> conjugate_gradient(const SparseMatrix& A, std::span<const double> b) {
    const std::size_t n = b.size();
    std::vector<double> x(n, 0.0), r(b.begin(), b.end()), p(r), Ap(n);
    double rr = dot(r, r);
    const double stop = 1e-24 * rr; // (1e-12 ||b||)^2
    if (rr == 0.0) return x;
    const int max_iterations = 10 * static_cast<int>(n) + 10;
    for (int it = 0; it < max_iterations && rr > stop; ++it) {
        A.apply(p, Ap);
        const double pAp = dot(p, Ap);
        if (pAp <= 0.0) throw std::runtime_error("matrix is not positive definite");
        const double alpha = rr / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        const double rr_next = dot(r, r);
        const double beta = rr_next / rr;
        rr = rr_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    return x;
}

inline std::vector<double> sparse_lu(const SparseMatrix& A, std::span<const double> b) {
    Eigen::SparseMatrix<double> M(A.rows, A.cols);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(A.nnz()));
    for (std::int32_t r = 0; r < A.rows; ++r)
        for (std::int32_t k = A.row_ptr[static_cast<std::size_t>(r)];
             k < A.row_ptr[static_cast<std::size_t>(r) + 1]; ++k)
            entries.emplace_back(r, A.col[static_cast<std::size_t>(k)],
                                 A.val[static_cast<std::size_t>(k)]);
    M.setFromTriplets(entries.begin(), entries.end());
    M.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(M);
    if (lu.info() != Eigen::Success) throw std::runtime_error("sparse factorization failed");
    const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
    const Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw std::runtime_error("sparse solve failed");
    return {x.data(), x.data() + x.size()};
}

} // namespace detail

/// Direct-or-iterative linear solve with a verified result: conjugate
/// gradients when the matrix is flagged SPD, sparse LU otherwise. Throws if
/// the returned solution does not satisfy ||Ax - b|| <= 1e-10 ||b||.
inline std::vector<double> solve_linear(const SparseMatrix& A, std::span<const double> b,
                                        bool spd) {
    if (A.rows != A.cols) throw std::invalid_argument("linear solve needs a square matrix");
    if (static_cast<std::int32_t>(b.size()) != A.rows)
        throw std::invalid_argument("right-hand side size mismatch");
    std::vector<double> x = spd ? detail::conjugate_gradient(A, b) : detail::sparse_lu(A, b);

    std::vector<double> ax(b.size());
    A.apply(x, ax);
    double err2 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        err2 += (ax[i] - b[i]) * (ax[i] - b[i]);
        b2 += b[i] * b[i];
    }
    if (std::sqrt(err2) > 1e-10 * std::max(std::sqrt(b2), 1e-300))
        throw std::runtime_error("linear solve verification failed, relative residual " +
                                 std::to_string(std::sqrt(err2) / std::sqrt(b2)));
    return x;
}

enum class NewtonStop {
    absolute_tolerance,
    relative_tolerance,
    max_iterations,
    diverged,
};

inline std::string to_string(NewtonStop s) {
    switch (s) {
    case NewtonStop::absolute_tolerance: return "absolute tolerance";
    case NewtonStop::relative_tolerance: return "relative tolerance";
    case NewtonStop::max_iterations: return "max iterations";
    case NewtonStop::diverged: return "diverged";
    }
    return "unknown";
}

struct NewtonOptions {
    double atol = 1e-10;
    double rtol = 1e-10;
    int max_iterations = 25;
};

struct NewtonReport {
    bool converged = false;
    NewtonStop reason = NewtonStop::max_iterations;
    int iterations = 0;
    std::vector<double> residual_norms; ///< iterations + 1 entries, ||r|| before each step
    std::vector<double> solution;
};

/// Undamped Newton: assemble J(u), solve J du = -r(u), take the full step.
/// Stops on ||r|| <= atol, ||r|| <= rtol ||r0||, divergence (non-finite or
/// 1e6-fold growth), or the iteration cap.
inline NewtonReport newton_solve(Assembler& assembler, std::span<const double> u0,
                                 NewtonOptions opts = {}) {
    NewtonReport report;
    report.solution.assign(u0.begin(), u0.end());

    auto residual_norm = [&](const std::vector<double>& r) {
        double s = 0.0;
        for (double e : r) s += e * e;
        return std::sqrt(s);
    };

    std::vector<double> r = assembler.evaluate_residual(report.solution);
    double norm = residual_norm(r);
    const double norm0 = norm;
    report.residual_norms.push_back(norm);
    if (norm <= opts.atol) {
        report.converged = true;
        report.reason = NewtonStop::absolute_tolerance;
        return report;
    }

    for (int it = 1; it <= opts.max_iterations; ++it) {
        const SparseMatrix J = assembler.assemble_jacobian(report.solution);
        std::vector<double> rhs(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) rhs[i] = -r[i];
        std::vector<double> du;
        try {
            du = solve_linear(J, rhs, assembler.model().spd);
        } catch (const std::runtime_error&) {
            // A Jacobian the solver cannot handle (singular, indefinite)
            // means the iteration left the basin; report, don't throw.
            report.reason = NewtonStop::diverged;
            return report;
        }
        for (std::size_t i = 0; i < du.size(); ++i) report.solution[i] += du[i];

        r = assembler.evaluate_residual(report.solution);
        norm = residual_norm(r);
        report.residual_norms.push_back(norm);
        report.iterations = it;

        if (norm <= opts.atol) {
            report.converged = true;
            report.reason = NewtonStop::absolute_tolerance;
            return report;
        }
        if (norm <= opts.rtol * norm0) {
            report.converged = true;
            report.reason = NewtonStop::relative_tolerance;
            return report;
        }
        if (!std::isfinite(norm) || norm > 1e6 * (norm0 + 1.0)) {
            report.reason = NewtonStop::diverged;
            return report;
        }
    }
    report.reason = NewtonStop::max_iterations;
    return report;
}

} // namespace femplex
