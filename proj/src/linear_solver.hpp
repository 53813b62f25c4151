#pragma once

#include <cmath>
#include <string>

#include <Eigen/IterativeLinearSolvers>

#include "cardiored/assembly.hpp"
#include "cardiored/error.hpp"

namespace cardiored::detail {

// Jacobi-preconditioned CG for the time-constant SPD monodomain matrix.
class SpdSolver {
public:
    void compute(SparseMatrix A, double tol, int max_iter) {
        A_ = std::move(A);
        cg_.setTolerance(tol);
        cg_.setMaxIterations(max_iter > 0 ? max_iter
                                          : std::max(20, static_cast<int>(10.0 * std::sqrt(double(A_.rows())))));
        cg_.compute(A_);
    }

    // Returns the iteration count; throws SolveError tagged with `step`.
    int solve(const Eigen::VectorXd& rhs, const Eigen::VectorXd& guess, Eigen::VectorXd& x, long step) {
        x = cg_.solveWithGuess(rhs, guess);
        if (cg_.info() != Eigen::Success)
            throw SolveError("conjugate gradient did not converge (residual " + std::to_string(cg_.error()) + ")",
                             step);
        return static_cast<int>(cg_.iterations());
    }

    const SparseMatrix& matrix() const { return A_; }

private:
    SparseMatrix A_;
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg_;
};

}  // namespace cardiored::detail
