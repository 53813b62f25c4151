#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cardiored/ionic.hpp"
#include "cardiored/mesh.hpp"

namespace cardiored {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Finite element operators of a mesh. Immutable once built; safe to share.
struct AssembledOperators {
    SparseMatrix M;          // consistent mass
    Eigen::VectorXd M_L;     // lumped mass diagonal
    SparseMatrix S_l;        // a_l a_l^T grad.grad
    SparseMatrix S_t;        // (I - a_l a_l^T) grad.grad
    double volume = 0.0;

    Eigen::Index size() const { return M_L.size(); }
};

// Diagonal scaling lumping: [M_L]_ii = (sum_ij M_ij / trace M) * M_ii.
Eigen::VectorXd lump_mass(const SparseMatrix& M);
Eigen::VectorXd lump_mass(const Eigen::MatrixXd& M);

// Throws AssemblyError naming the first element with volume below 1e-14 cm^3.
AssembledOperators assemble(const Mesh& mesh);

// Plain grad.grad stiffness, used to check S_l + S_t.
SparseMatrix assemble_isotropic_stiffness(const Mesh& mesh);

// Reference path: the consistent finite element load  \int I_ion(u_h, w_h) phi_j
// with u_h, w_h the P1 interpolants, integrated with a degree-5 rule (exact for
// the quartic integrand). The production solver uses M_L * I_ion(u, w) instead.
class ExactIonicLoad {
public:
    explicit ExactIonicLoad(const Mesh& mesh);
    Eigen::VectorXd operator()(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                               const IonicParams& p) const;

private:
    std::vector<Tet> tets_;
    std::vector<double> volumes_;
    Eigen::Index n_ = 0;
};

}  // namespace cardiored
