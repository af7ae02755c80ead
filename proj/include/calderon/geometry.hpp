#pragma once

#include <cmath>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace calderon {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    Point2& operator+=(const Point2& o) { x += o.x; y += o.y; return *this; }
    Point2& operator-=(const Point2& o) { x -= o.x; y -= o.y; return *this; }
    Point2& operator*=(double s) { x *= s; y *= s; return *this; }
    friend Point2 operator+(Point2 a, const Point2& b) { return a += b; }
    friend Point2 operator-(Point2 a, const Point2& b) { return a -= b; }
    friend Point2 operator*(Point2 a, double s) { return a *= s; }
    friend Point2 operator*(double s, Point2 a) { return a *= s; }
    friend Point2 operator-(const Point2& a) { return {-a.x, -a.y}; }
    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }
inline double distance(const Point2& a, const Point2& b) { return norm(a - b); }
inline Point2 rotate90(const Point2& a) { return {-a.y, a.x}; }
inline Point2 normalized(const Point2& a) { return a * (1.0 / norm(a)); }
inline Point2 polar(double r, double theta) { return {r * std::cos(theta), r * std::sin(theta)}; }

/// Distance from p to the closed segment [a, b].
double segment_distance(const Point2& p, const Point2& a, const Point2& b);

/// Strictly convex polygon with counter-clockwise vertices.
///
/// Construction rejects clockwise input, repeated vertices, zero-length edges and
/// collinear triples. The convexity tolerance is 1e-12 times the squared bounding-box
/// scale.
class ConvexPolygon {
public:
    explicit ConvexPolygon(std::vector<Point2> vertices);

    static ConvexPolygon rectangle(Point2 lo, Point2 hi);
    static ConvexPolygon regular(std::size_t n, Point2 center, double circumradius, double phase = 0.0);

    std::span<const Point2> vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    const Point2& vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }
    const Point2& next(std::size_t i) const { return vertex(i + 1); }
    const Point2& prev(std::size_t i) const { return vertex(i + vertices_.size() - 1); }

    /// Interior angle at vertex i, in (0, pi).
    double angle(std::size_t i) const;
    double edge_length(std::size_t i) const { return calderon::distance(vertex(i), next(i)); }
    double min_edge() const;
    double perimeter() const;
    double area() const;
    double diameter() const;
    Point2 centroid() const;
    /// Bounding-box extent used as the length scale of tolerances.
    double scale() const;

    /// Closed containment with a small absolute tolerance.
    bool contains(const Point2& p, double tol = 0.0) const;
    /// Euclidean distance to the closed polygon; zero inside.
    double distance(const Point2& p) const;
    /// Distance to the boundary curve, inside or outside.
    double boundary_distance(const Point2& p) const;
    /// Index of the vertex equal to p within tol, if any.
    std::optional<std::size_t> find_vertex(const Point2& p, double tol = 1e-12) const;

    ConvexPolygon translated(const Point2& t) const;
    ConvexPolygon scaled(double factor, const Point2& about) const;

private:
    std::vector<Point2> vertices_;
};

/// Minimal convex polygon containing the points; vertices are a subset of the input.
ConvexPolygon convex_hull(std::span<const Point2> points);
ConvexPolygon convex_hull(const ConvexPolygon& a, const ConvexPolygon& b);

double hausdorff_distance(const ConvexPolygon& p, const ConvexPolygon& q);

struct ExtremalVertex {
    Point2 vertex;
    double distance = 0.0;     // equals the Hausdorff distance
    bool on_first = true;      // vertex belongs to the first polygon argument
    std::size_t index = 0;     // vertex index within its own polygon
    double polygon_angle = 0.0;
    double hull_angle = 0.0;
};

/// Vertex realizing the Hausdorff distance. Vertices of the first polygon win ties.
/// Throws NoExtremalVertex when the polygons coincide.
ExtremalVertex extremal_vertex(const ConvexPolygon& p, const ConvexPolygon& q);

/// Bounded computational domain: a disk or a convex polygon.
class Domain {
public:
    static Domain disk(Point2 center, double radius);
    static Domain polygon(ConvexPolygon poly);

    bool is_disk() const { return !poly_.has_value(); }
    Point2 center() const { return center_; }
    double radius() const { return radius_; }
    const ConvexPolygon& as_polygon() const { return *poly_; }

    bool contains(const Point2& p) const;
    double boundary_distance(const Point2& p) const;
    double perimeter() const;
    /// Point of the boundary on the ray from center() with polar angle theta.
    Point2 boundary_point(double theta) const;
    /// Counter-clockwise boundary vertices with spacing at most `spacing`.
    std::vector<Point2> discretize(double spacing) const;
    /// Distance from a polygon contained in the domain to the boundary.
    double clearance(const ConvexPolygon& p) const;

private:
    Point2 center_;
    double radius_ = 0.0;
    std::optional<ConvexPolygon> poly_;
};

struct ClassDParams {
    double a_m = 0.0;
    double a_M = 0.0;
    double l = 0.0;
    double delta0 = 0.0;
    double k_m = 0.0;
    double k_M = 0.0;

    /// Throws InvalidArgument when the parameter set is inconsistent.
    void validate() const;
};

struct ClauseResult {
    int clause = 0;
    std::string name;
    bool passed = false;
    double measured = 0.0;       // min angle, min edge, clearance or k
    double measured_max = 0.0;   // max angle where it applies
    std::string detail;
};

struct ClassDReport {
    std::vector<ClauseResult> clauses;
    bool passed() const;
    const ClauseResult& clause(int id) const;
};

/// Clauses (1)-(4) of the admissible inclusion class for a single (P, k).
ClassDReport validate_class_d(const ConvexPolygon& p, double k, const ClassDParams& params, const Domain& domain);

/// Clause (5): the hull of the pair keeps clearance delta0 from the boundary.
ClauseResult check_hull_clearance(const ConvexPolygon& p, const ConvexPolygon& q, const ClassDParams& params,
                                  const Domain& domain);

/// Counter-clockwise circular arc, from start_angle to end_angle > start_angle.
struct CircularArc {
    Point2 center;
    double radius = 0.0;
    double start_angle = 0.0;
    double end_angle = 0.0;

    Point2 at(double angle) const { return center + polar(radius, angle); }
    double length() const { return radius * (end_angle - start_angle); }
};

struct Segment {
    Point2 a;
    Point2 b;
    double length() const { return distance(a, b); }
};

/// Quadrature node on a contour, with the unit normal pointing away from the corner region.
struct ContourNode {
    Point2 x;
    Point2 normal;
    double weight = 0.0;
};

/// Corner frame of the probe identity around the extremal vertex.
struct SectorFrame {
    Point2 corner;
    ConvexPolygon hull;             // convex hull of both inclusions
    double opening_a = 0.0;         // angle of the owning polygon at the corner
    double opening_b = 0.0;         // hull angle at the corner
    Point2 bisector;                // unit, pointing into the hull
    Point2 normal;                  // bisector rotated by +90 degrees
    double radius_h = 0.0;
    double tau = 0.0;
    double tau0 = 0.0;
    double theta_plus = 0.0;        // frame angles of the polygon edges at the corner
    double theta_minus = 0.0;
    Segment gamma_plus;
    Segment gamma_minus;
    CircularArc arc_inner;
    CircularArc arc_outer;

    Point2 to_frame(const Point2& x) const;
    Point2 from_frame(const Point2& local) const;
    double alpha_prime() const { return std::cos((M_PI + opening_b) / 4.0); }

    std::vector<ContourNode> inner_nodes(double max_panel, int order = 8) const;
    std::vector<ContourNode> outer_nodes(double max_panel, int order = 8) const;
};

/// tau0 = 1 / (2 h sin((pi - b) / 4)).
double minimal_frequency(double h, double opening_b);

/// Builds the probe frame at vertex x_c of d. The radius is min(hd/2, l/5, delta0) with hd the
/// Hausdorff distance of the pair.
SectorFrame build_sector_frame(const ConvexPolygon& d, const ConvexPolygon& dp, const Point2& x_c, double tau,
                               const ClassDParams& params);

struct FrameAudit {
    double min_axis_offset = 0.0;     // min over outer nodes of (x - x_c).bisector + 1/tau
    double min_hull_clearance = 0.0;  // min over outer nodes of dist(x, dQ) - 1/(2 tau)
    double max_outer_radius = 0.0;    // max |x - x_c| over outer nodes, minus h
    double inner_covers_polygon = 0.0;  // (pi+b)/4 - max(|theta+|, |theta-|)
    bool ok() const;
};

FrameAudit audit_frame(const SectorFrame& frame, int nodes = 512);

/// Nested convex layers D_1 > D_2 > ... with contrasts k_j.
class NestedGeometry {
public:
    struct Layer {
        ConvexPolygon polygon;
        double k;
    };

    NestedGeometry() = default;
    explicit NestedGeometry(std::vector<Layer> layers);

    std::span<const Layer> layers() const { return layers_; }
    std::size_t size() const { return layers_.size(); }
    bool empty() const { return layers_.empty(); }
    const Layer& layer(std::size_t j) const { return layers_.at(j); }
    /// 0 for background, j+1 for a point inside layer j but outside layer j+1.
    int region_of(const Point2& p) const;
    /// Conductivity of region tag (0 = background value 1).
    double conductivity(int region) const;
    NestedGeometry with_contrasts(std::span<const double> ks) const;

private:
    std::vector<Layer> layers_;
};

void write_polygon(std::ostream& os, const ConvexPolygon& p);
ConvexPolygon read_polygon(std::istream& is);

}  // namespace calderon
