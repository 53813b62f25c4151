#include <sstream>

#include <Eigen/Dense>

#include "doctest.h"

#include "cardiored/assembly.hpp"
#include "cardiored/error.hpp"
#include "cardiored/mesh.hpp"

using namespace cardiored;

namespace {

double max_abs(const SparseMatrix& A) {
    double m = 0.0;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

double asymmetry(const SparseMatrix& A) {
    SparseMatrix D = SparseMatrix(A.transpose()) - A;
    return max_abs(D) / max_abs(A);
}

// Integral of a monomial over the reference tet: a! b! c! / (a+b+c+3)!.
double ref_monomial(int a, int b, int c) {
    auto fact = [](int k) { double f = 1; for (int i = 2; i <= k; ++i) f *= i; return f; };
    return fact(a) * fact(b) * fact(c) / fact(a + b + c + 3);
}

}  // namespace

TEST_SUITE("mesh_fem") {

TEST_CASE("unit cube splits into 8 nodes and 6 tets") {
    const auto m = build_slab_mesh({1, 1, 1}, {1, 1, 1}, Point3(1, 0, 0));
    CHECK(m.num_nodes() == 8);
    CHECK(m.num_tets() == 6);
    CHECK(m.nodes[1].x() == doctest::Approx(1.0));  // x fastest
    CHECK(m.nodes[2].y() == doctest::Approx(1.0));
    double vol = 0.0;
    for (std::size_t e = 0; e < m.num_tets(); ++e) vol += tet_volume(m, e);
    CHECK(vol == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("slab volume and node count") {
    const auto m = build_slab_mesh({5, 5, 0.5}, {7, 5, 3}, Point3(1, 0, 0));
    CHECK(m.num_nodes() == 8 * 6 * 4);
    double vol = 0.0;
    for (std::size_t e = 0; e < m.num_tets(); ++e) vol += tet_volume(m, e);
    CHECK(std::abs(vol - 12.5) < 1e-12);
    // 41 x 74 x 8 grid points reproduce the reference model size
    CHECK(build_slab_mesh({5, 5, 0.5}, {40, 73, 7}, Point3(1, 0, 0)).num_nodes() == 24272);
}

TEST_CASE("bad slab arguments") {
    CHECK_THROWS_AS(build_slab_mesh({0, 1, 1}, {1, 1, 1}, Point3(1, 0, 0)), InvalidArgument);
    CHECK_THROWS_AS(build_slab_mesh({1, 1, 1}, {1, 0, 1}, Point3(1, 0, 0)), InvalidArgument);
}

TEST_CASE("mesh text round trip") {
    const auto m = build_slab_mesh({1, 2, 0.5}, {2, 3, 1}, Point3(0.6, 0.8, 0));
    std::stringstream ss;
    write_mesh(m, ss);
    const auto r = parse_mesh(ss);
    REQUIRE(r.num_nodes() == m.num_nodes());
    REQUIRE(r.num_tets() == m.num_tets());
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        CHECK((r.nodes[i] - m.nodes[i]).norm() == 0.0);
        CHECK((r.fiber[i] - m.fiber[i]).norm() < 1e-15);
    }
    for (std::size_t e = 0; e < m.num_tets(); ++e) CHECK(r.tets[e] == m.tets[e]);

    std::stringstream cube("monomesh v1 8 6\n"
                           "0 0 0 1 0 0\n1 0 0 1 0 0\n0 1 0 1 0 0\n1 1 0 1 0 0\n"
                           "0 0 1 1 0 0\n1 0 1 1 0 0\n0 1 1 1 0 0\n1 1 1 1 0 0\n",
                           std::ios::in | std::ios::out | std::ios::ate);
    const auto ref = build_slab_mesh({1, 1, 1}, {1, 1, 1}, Point3(1, 0, 0));
    for (const auto& t : ref.tets) cube << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    const auto c = parse_mesh(cube);
    CHECK(c.num_nodes() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK((c.nodes[i] - ref.nodes[i]).norm() == 0.0);
}

TEST_CASE("mesh load errors carry line numbers") {
    std::stringstream bad_index("monomesh v1 4 1\n0 0 0 1 0 0\n1 0 0 1 0 0\n0 1 0 1 0 0\n0 0 1 1 0 0\n0 1 2 9\n");
    try {
        parse_mesh(bad_index);
        FAIL("expected a load error");
    } catch (const LoadError& e) {
        CHECK(e.line() == 6);
    }
    std::stringstream bad_fiber("monomesh v1 4 1\n0 0 0 2 0 0\n1 0 0 1 0 0\n0 1 0 1 0 0\n0 0 1 1 0 0\n0 1 2 3\n");
    CHECK_THROWS_AS(parse_mesh(bad_fiber), LoadError);
    std::stringstream flat("monomesh v1 4 1\n0 0 0 1 0 0\n1 0 0 1 0 0\n0 1 0 1 0 0\n1 1 0 1 0 0\n0 1 2 3\n");
    CHECK_THROWS_AS(parse_mesh(flat), LoadError);
    std::stringstream header("meshy 4 1\n");
    CHECK_THROWS_AS(parse_mesh(header), LoadError);
}

TEST_CASE("lumping rule on the 2x2 example") {
    Eigen::MatrixXd M(2, 2);
    M << 2, 1, 1, 2;
    const auto ML = lump_mass(M);
    CHECK(ML[0] == doctest::Approx(3.0));
    CHECK(ML[1] == doctest::Approx(3.0));
}

TEST_CASE("assembled operators") {
    const auto m = build_slab_mesh({1.0, 0.8, 0.3}, {4, 3, 2}, Point3(1, 1, 0).normalized());
    const auto ops = assemble(m);
    const Eigen::Index n = ops.size();

    CHECK(asymmetry(ops.M) < 1e-12);
    CHECK(asymmetry(ops.S_l) < 1e-12);
    CHECK(asymmetry(ops.S_t) < 1e-12);

    const Eigen::VectorXd one = Eigen::VectorXd::Ones(n);
    CHECK((ops.S_l * one).cwiseAbs().maxCoeff() < 1e-12 * max_abs(ops.S_l));
    CHECK((ops.S_t * one).cwiseAbs().maxCoeff() < 1e-12 * max_abs(ops.S_t));

    const double total = one.dot(ops.M * one);
    CHECK(std::abs(ops.M_L.sum() - total) < 1e-12 * total);
    CHECK(total == doctest::Approx(0.24).epsilon(1e-12));

    const SparseMatrix iso = assemble_isotropic_stiffness(m);
    CHECK(SparseMatrix(ops.S_l + ops.S_t - iso).norm() / iso.norm() < 1e-10);

    // PSD: Rayleigh quotients of random vectors are non-negative
    for (int k = 0; k < 5; ++k) {
        const Eigen::VectorXd v = Eigen::VectorXd::Random(n);
        CHECK(v.dot(ops.S_l * v) >= -1e-12);
        CHECK(v.dot(ops.S_t * v) >= -1e-12);
    }
}

TEST_CASE("stiffness reproduces the linear-field energy") {
    // u = x: grad u = e_x, fiber along x => S_l energy = volume, S_t energy = 0
    const auto m = build_slab_mesh({2.0, 1.0, 0.5}, {3, 2, 2}, Point3(1, 0, 0));
    const auto ops = assemble(m);
    Eigen::VectorXd u(ops.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = m.nodes[static_cast<std::size_t>(i)].x();
    CHECK(u.dot(ops.S_l * u) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(u.dot(ops.S_t * u)) < 1e-12);
}

TEST_CASE("degenerate element is reported") {
    Mesh m;
    m.nodes = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0), Point3(1, 1, 0)};
    m.fiber.assign(4, Point3(1, 0, 0));
    m.tets = {{0, 1, 2, 3}};
    CHECK_THROWS_AS(assemble(m), AssemblyError);
}

TEST_CASE("exact ionic load integrates quartic monomials") {
    // On the single reference tet the load with I_ion replaced by P1 data is
    // checked against closed-form monomial integrals: u = x interpolates exactly,
    // and the sum of the load vector is \int I_ion(x, 0).
    Mesh m;
    m.nodes = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0), Point3(0, 0, 1)};
    m.fiber.assign(4, Point3(1, 0, 0));
    m.tets = {{0, 1, 2, 3}};
    const ExactIonicLoad load(m);
    IonicParams p;
    // u = V_r + s x with a scale s; I_ion(u, 0) = C_m b1 (s x)(s x + V_r - V_th)(s x + V_r - V_p)
    const double s = 100.0;
    Eigen::VectorXd u(4), w = Eigen::VectorXd::Zero(4);
    u << p.V_r, p.V_r + s, p.V_r, p.V_r;
    const double a = p.V_r - p.V_th, b = p.V_r - p.V_p;
    const double expected = p.C_m * p.beta1() *
                            (s * s * s * ref_monomial(3, 0, 0) + s * s * (a + b) * ref_monomial(2, 0, 0) +
                             s * a * b * ref_monomial(1, 0, 0));
    CHECK(load(u, w, p).sum() == doctest::Approx(expected).epsilon(1e-12));
    // node 1 carries the x-weighted integral: \int I_ion x
    const double x_weighted = p.C_m * p.beta1() *
                              (s * s * s * ref_monomial(4, 0, 0) + s * s * (a + b) * ref_monomial(3, 0, 0) +
                               s * a * b * ref_monomial(2, 0, 0));
    CHECK(load(u, w, p)[1] == doctest::Approx(x_weighted).epsilon(1e-12));
}

}  // TEST_SUITE
