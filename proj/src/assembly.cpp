#include "cardiored/assembly.hpp"

#include <Eigen/Dense>
#include <array>

#include "cardiored/error.hpp"

namespace cardiored {

namespace {

constexpr double kMinVolume = 1e-14;

struct ElementGeometry {
    double volume;
    std::array<Point3, 4> grad;  // gradients of the barycentric shape functions
};

ElementGeometry element_geometry(const Mesh& mesh, std::size_t e) {
    const auto& t = mesh.tets[e];
    const Point3& p0 = mesh.nodes[t[0]];
    Eigen::Matrix3d J;
    J.col(0) = mesh.nodes[t[1]] - p0;
    J.col(1) = mesh.nodes[t[2]] - p0;
    J.col(2) = mesh.nodes[t[3]] - p0;
    const double vol = J.determinant() / 6.0;
    if (!(std::abs(vol) >= kMinVolume)) throw AssemblyError("degenerate element", e);
    const Eigen::Matrix3d Jinv = J.inverse();
    ElementGeometry g;
    g.volume = std::abs(vol);
    for (int a = 0; a < 3; ++a) g.grad[a + 1] = Jinv.row(a).transpose();
    g.grad[0] = -(g.grad[1] + g.grad[2] + g.grad[3]);
    return g;
}

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(Eigen::Index n, const Triplets& trip) {
    SparseMatrix A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    return A;
}

// Symmetric 14-point rule on the reference tet, exact through degree 5.
// Barycentric coordinates and weights normalized to sum to one.
struct QuadPoint {
    std::array<double, 4> lambda;
    double weight;
};

std::vector<QuadPoint> tet_rule_degree5() {
    std::vector<QuadPoint> pts;
    const auto add_aaab = [&](double a, double w) {
        const double b = 1.0 - 3.0 * a;
        for (int k = 0; k < 4; ++k) {
            std::array<double, 4> l{a, a, a, a};
            l[k] = b;
            pts.push_back({l, w});
        }
    };
    add_aaab(0.0927352503108912264, 0.0734930431163619495);
    add_aaab(0.3108859192633006098, 0.1126879257180158507);
    const double a = 0.0455037041256496494, b = 0.5 - a;
    const double w = 0.0425460207770814664;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            std::array<double, 4> l{a, a, a, a};
            l[i] = b;
            l[j] = b;
            pts.push_back({l, w});
        }
    return pts;
}

}  // namespace

Eigen::VectorXd lump_mass(const SparseMatrix& M) {
    const double total = M.sum();
    const Eigen::VectorXd diag = M.diagonal();
    return diag * (total / diag.sum());
}

Eigen::VectorXd lump_mass(const Eigen::MatrixXd& M) {
    const Eigen::VectorXd diag = M.diagonal();
    return diag * (M.sum() / diag.sum());
}

AssembledOperators assemble(const Mesh& mesh) {
    const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
    Triplets tm, tl, tt;
    tm.reserve(16 * mesh.num_tets());
    tl.reserve(16 * mesh.num_tets());
    tt.reserve(16 * mesh.num_tets());
    double volume = 0.0;

    for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
        const auto g = element_geometry(mesh, e);
        const Point3 a = mesh.element_fiber(e);
        const auto& t = mesh.tets[e];
        volume += g.volume;
        std::array<double, 4> ag{};
        for (int i = 0; i < 4; ++i) ag[i] = a.dot(g.grad[i]);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                const double gg = g.grad[i].dot(g.grad[j]);
                const double along = ag[i] * ag[j];
                tm.emplace_back(t[i], t[j], g.volume * (i == j ? 0.1 : 0.05));
                tl.emplace_back(t[i], t[j], g.volume * along);
                tt.emplace_back(t[i], t[j], g.volume * (gg - along));
            }
    }

    AssembledOperators ops;
    ops.M = from_triplets(n, tm);
    ops.S_l = from_triplets(n, tl);
    ops.S_t = from_triplets(n, tt);
    ops.M_L = lump_mass(ops.M);
    ops.volume = volume;
    return ops;
}

SparseMatrix assemble_isotropic_stiffness(const Mesh& mesh) {
    Triplets trip;
    trip.reserve(16 * mesh.num_tets());
    for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
        const auto g = element_geometry(mesh, e);
        const auto& t = mesh.tets[e];
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) trip.emplace_back(t[i], t[j], g.volume * g.grad[i].dot(g.grad[j]));
    }
    return from_triplets(static_cast<Eigen::Index>(mesh.num_nodes()), trip);
}

ExactIonicLoad::ExactIonicLoad(const Mesh& mesh)
    : tets_(mesh.tets), n_(static_cast<Eigen::Index>(mesh.num_nodes())) {
    volumes_.reserve(mesh.num_tets());
    for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
        const double v = std::abs(tet_volume(mesh, e));
        if (v < kMinVolume) throw AssemblyError("degenerate element", e);
        volumes_.push_back(v);
    }
}

Eigen::VectorXd ExactIonicLoad::operator()(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                                           const IonicParams& p) const {
    static const std::vector<QuadPoint> rule = tet_rule_degree5();
    Eigen::VectorXd load = Eigen::VectorXd::Zero(n_);
    for (std::size_t e = 0; e < tets_.size(); ++e) {
        const auto& t = tets_[e];
        std::array<double, 4> acc{};
        for (const auto& q : rule) {
            double uq = 0.0, wq = 0.0;
            for (int i = 0; i < 4; ++i) {
                uq += q.lambda[i] * u[t[i]];
                wq += q.lambda[i] * w[t[i]];
            }
            const double f = q.weight * i_ion(uq, wq, p);
            for (int i = 0; i < 4; ++i) acc[i] += f * q.lambda[i];
        }
        for (int i = 0; i < 4; ++i) load[t[i]] += volumes_[e] * acc[i];
    }
    return load;
}

}  // namespace cardiored
