#include "cardiored/mesh.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "cardiored/error.hpp"

namespace cardiored {

namespace {

constexpr double kMinVolume = 1e-14;

bool next_data_line(std::istream& in, std::string& line, std::size_t& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        return true;
    }
    return false;
}

}  // namespace

double tet_volume(const Point3& p0, const Point3& p1, const Point3& p2, const Point3& p3) {
    return (p1 - p0).cross(p2 - p0).dot(p3 - p0) / 6.0;
}

double tet_volume(const Mesh& mesh, std::size_t e) {
    const auto& t = mesh.tets[e];
    return tet_volume(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]], mesh.nodes[t[3]]);
}

Point3 Mesh::element_fiber(std::size_t e) const {
    if (fiber_layout == FiberLayout::elemental) return fiber[e];
    const auto& t = tets[e];
    Point3 a = fiber[t[0]] + fiber[t[1]] + fiber[t[2]] + fiber[t[3]];
    const double norm = a.norm();
    // Opposing nodal fibers cancel; fall back to the first node's direction.
    return norm > 1e-12 ? Point3(a / norm) : fiber[t[0]];
}

void Mesh::validate() const {
    const auto n = static_cast<int>(nodes.size());
    const std::size_t expected_fibers = fiber_layout == FiberLayout::nodal ? nodes.size() : tets.size();
    if (fiber.size() != expected_fibers)
        throw InvalidArgument("fiber field size does not match the mesh");
    for (std::size_t e = 0; e < tets.size(); ++e) {
        for (int idx : tets[e])
            if (idx < 0 || idx >= n)
                throw InvalidArgument("tet " + std::to_string(e) + " references node " +
                                      std::to_string(idx) + " of " + std::to_string(n));
        if (!(tet_volume(*this, e) > 0.0))
            throw InvalidArgument("tet " + std::to_string(e) + " has non-positive volume");
    }
    for (const auto& a : fiber)
        if (std::abs(a.norm() - 1.0) > 1e-12) throw InvalidArgument("fiber vector is not unit length");
}

Mesh build_slab_mesh(const std::array<double, 3>& extent, const std::array<int, 3>& resolution,
                     const Point3& fiber_axis) {
    for (int k = 0; k < 3; ++k) {
        if (!(extent[k] > 0.0)) throw InvalidArgument("slab extent must be positive");
        if (resolution[k] < 1) throw InvalidArgument("slab resolution must be at least 1");
    }
    const double axis_norm = fiber_axis.norm();
    if (!(axis_norm > 0.0)) throw InvalidArgument("fiber axis must be non-zero");
    const Point3 axis = fiber_axis / axis_norm;

    const int nx = resolution[0], ny = resolution[1], nz = resolution[2];
    const auto id = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };

    Mesh mesh;
    mesh.nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1));
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i)
                mesh.nodes.emplace_back(extent[0] * i / nx, extent[1] * j / ny, extent[2] * k / nz);
    mesh.fiber.assign(mesh.nodes.size(), axis);

    // Kuhn split: one tet per axis permutation along the 0 -> 7 diagonal.
    static constexpr std::array<std::array<int, 3>, 6> perms{
        {{1, 2, 4}, {1, 4, 2}, {2, 1, 4}, {2, 4, 1}, {4, 1, 2}, {4, 2, 1}}};
    mesh.tets.reserve(6 * static_cast<std::size_t>(nx) * ny * nz);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                std::array<int, 8> corner{};
                for (int c = 0; c < 8; ++c) corner[c] = id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                for (const auto& p : perms) {
                    Tet t{corner[0], corner[p[0]], corner[p[0] | p[1]], corner[7]};
                    if (tet_volume(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]], mesh.nodes[t[3]]) < 0.0)
                        std::swap(t[2], t[3]);
                    mesh.tets.push_back(t);
                }
            }
    return mesh;
}

Mesh parse_mesh(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!next_data_line(in, line, lineno)) throw LoadError("empty mesh file", 0);

    std::istringstream header(line);
    std::string magic, version;
    long long n_nodes = -1, n_tets = -1;
    header >> magic >> version >> n_nodes >> n_tets;
    if (magic != "monomesh" || version != "v1" || header.fail() || n_nodes < 0 || n_tets < 0)
        throw LoadError("expected header 'monomesh v1 <n_nodes> <n_tets>'", lineno);

    Mesh mesh;
    mesh.nodes.reserve(n_nodes);
    mesh.fiber.reserve(n_nodes);
    for (long long i = 0; i < n_nodes; ++i) {
        if (!next_data_line(in, line, lineno))
            throw LoadError("unexpected end of file in node block", lineno);
        std::istringstream ls(line);
        double x, y, z, fx, fy, fz;
        if (!(ls >> x >> y >> z >> fx >> fy >> fz)) throw LoadError("malformed node line", lineno);
        Point3 a(fx, fy, fz);
        const double norm = a.norm();
        const double dev = std::abs(norm - 1.0);
        if (!std::isfinite(norm) || dev > 0.5)
            throw LoadError("fiber vector norm " + std::to_string(norm) + " is not unit", lineno);
        if (dev > 1e-6)
            spdlog::warn("mesh line {}: fiber norm {} renormalized", lineno, norm);
        mesh.nodes.emplace_back(x, y, z);
        mesh.fiber.push_back(a / norm);
    }
    mesh.tets.reserve(n_tets);
    for (long long e = 0; e < n_tets; ++e) {
        if (!next_data_line(in, line, lineno))
            throw LoadError("unexpected end of file in tet block", lineno);
        std::istringstream ls(line);
        long long idx[4];
        if (!(ls >> idx[0] >> idx[1] >> idx[2] >> idx[3])) throw LoadError("malformed tet line", lineno);
        Tet t{};
        for (int c = 0; c < 4; ++c) {
            if (idx[c] < 0 || idx[c] >= n_nodes)
                throw LoadError("tet references node " + std::to_string(idx[c]) + " of " +
                                    std::to_string(n_nodes),
                                lineno);
            t[c] = static_cast<int>(idx[c]);
        }
        double vol = tet_volume(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]], mesh.nodes[t[3]]);
        if (vol < 0.0) {
            std::swap(t[2], t[3]);
            vol = -vol;
        }
        if (vol < kMinVolume) throw LoadError("degenerate tet", lineno);
        mesh.tets.push_back(t);
    }
    return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open mesh file " + path.string(), 0);
    return parse_mesh(in);
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
    if (mesh.fiber_layout != FiberLayout::nodal)
        throw InvalidArgument("mesh text format stores nodal fibers only");
    out << "monomesh v1 " << mesh.num_nodes() << ' ' << mesh.num_tets() << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        const auto& p = mesh.nodes[i];
        const auto& a = mesh.fiber[i];
        out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << a.x() << ' ' << a.y() << ' ' << a.z() << '\n';
    }
    for (const auto& t : mesh.tets) out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
}

void write_mesh(const Mesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write mesh file " + path.string(), 0);
    write_mesh(mesh, out);
}

BoundingBox bounding_box(const Mesh& mesh) {
    BoundingBox box{Point3::Constant(INFINITY), Point3::Constant(-INFINITY)};
    for (const auto& p : mesh.nodes) {
        box.lo = box.lo.cwiseMin(p);
        box.hi = box.hi.cwiseMax(p);
    }
    return box;
}

}  // namespace cardiored
