#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace cardiored {

using Point3 = Eigen::Vector3d;
using Tet = std::array<int, 4>;

enum class FiberLayout { nodal, elemental };

// P1 tetrahedral mesh (cm) with a unit fiber direction a_l per node or per element.
struct Mesh {
    std::vector<Point3> nodes;
    std::vector<Tet> tets;
    std::vector<Point3> fiber;
    FiberLayout fiber_layout = FiberLayout::nodal;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_tets() const { return tets.size(); }

    // Fiber direction used inside element `e`: the element value, or the
    // renormalized mean of the four nodal fibers.
    Point3 element_fiber(std::size_t e) const;

    // Throws InvalidArgument when an index is out of range, a fiber is not unit
    // length to 1e-12, or an element has non-positive volume.
    void validate() const;
};

double tet_volume(const Point3& p0, const Point3& p1, const Point3& p2, const Point3& p3);
double tet_volume(const Mesh& mesh, std::size_t e);

// Structured slab [0,Lx]x[0,Ly]x[0,Lz], each hexahedral cell split into six
// tetrahedra around its main diagonal. Nodes are ordered with x fastest.
Mesh build_slab_mesh(const std::array<double, 3>& extent, const std::array<int, 3>& resolution,
                     const Point3& fiber_axis);

// Text format: `monomesh v1 <n_nodes> <n_tets>`, then `x y z fx fy fz` per node,
// then `i0 i1 i2 i3` per tet (0-based).
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_mesh(std::istream& in);
void write_mesh(const Mesh& mesh, const std::filesystem::path& path);
void write_mesh(const Mesh& mesh, std::ostream& out);

struct BoundingBox {
    Point3 lo;
    Point3 hi;
};
BoundingBox bounding_box(const Mesh& mesh);

}  // namespace cardiored
