#pragma once

#include "calderon/geometry.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

namespace calderon {

/// Boundary edge tag: 0 for the outer boundary, j >= 1 for the interface of layer j.
inline constexpr int kOuterBoundary = 0;

struct BoundaryEdge {
    std::array<int, 2> nodes;  // oriented counter-clockwise around its curve
    int tag = kOuterBoundary;
};

/// Conforming triangulation of the domain fitted to every inclusion interface.
struct Mesh {
    std::vector<Point2> nodes;
    std::vector<std::array<int, 3>> triangles;  // counter-clockwise
    std::vector<int> region;                     // per triangle: 0 background, j inside layer j
    std::vector<BoundaryEdge> boundary_edges;    // outer boundary and interface edges

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_triangles() const { return triangles.size(); }
    double signed_area(std::size_t t) const;
    double diameter(std::size_t t) const;
    double min_angle(std::size_t t) const;
    Point2 centroid(std::size_t t) const;
};

struct CornerGrading {
    Point2 corner;
    double eta = 1.0;  // grading exponent; 1 means no grading
};

struct MeshOptions {
    double target_h = 0.05;
    std::vector<CornerGrading> grading;
    double grading_radius = 0.0;    // rho_g; defaults to l/5 of the geometry when zero
    double cutoff_fraction = 1e-3;  // grading stops at cutoff_fraction * rho_g
    double min_angle_deg = 25.0;    // refinement quality target
    std::size_t max_nodes = 2'000'000;
};

/// Local element size prescribed by the grading law.
double graded_size(const MeshOptions& options, double rho_g, const Point2& x);

/// Interface-fitted conforming triangulation. Throws MeshResolution when two curves are closer
/// than 3 target_h.
Mesh generate_mesh(const Domain& domain, const NestedGeometry& geometry, const MeshOptions& options);

/// Bucketed point location over a mesh.
class MeshLocator {
public:
    explicit MeshLocator(const Mesh& mesh);

    struct Hit {
        int triangle = -1;
        std::array<double, 3> bary{};
    };

    /// Triangle containing p; points within tol of the mesh snap to the nearest triangle.
    std::optional<Hit> locate(const Point2& p, double tol = 1e-10) const;
    /// Every triangle containing p within tol; points on shared edges report all owners.
    std::vector<Hit> locate_all(const Point2& p, double tol = 1e-10) const;

private:
    const Mesh* mesh_;
    Point2 lo_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> buckets_;
};

void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

}  // namespace calderon
