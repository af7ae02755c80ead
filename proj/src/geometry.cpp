#include "calderon/geometry.hpp"

#include "calderon/error.hpp"
#include "calderon/quadrature.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace calderon {

double segment_distance(const Point2& p, const Point2& a, const Point2& b)
{
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + ab * t);
}

// ---------------------------------------------------------------------------
// ConvexPolygon

ConvexPolygon::ConvexPolygon(std::vector<Point2> vertices) : vertices_(std::move(vertices))
{
    const std::size_t n = vertices_.size();
    if (n < 3) throw Error(ErrorKind::DegenerateGeometry, "polygon needs at least 3 vertices");
    for (const auto& v : vertices_) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y))
            throw Error(ErrorKind::DegenerateGeometry, "non-finite vertex");
    }
    const double s = scale();
    const double tol = 1e-12 * s * s;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 e0 = vertex(i) - prev(i);
        const Point2 e1 = next(i) - vertex(i);
        if (norm(e1) <= 1e-14 * s) throw Error(ErrorKind::DegenerateGeometry, "repeated vertex");
        if (cross(e0, e1) <= tol)
            throw Error(ErrorKind::DegenerateGeometry,
                        "polygon is not strictly convex and counter-clockwise at vertex " + std::to_string(i));
    }
    // A star polygon can pass the local test; the turning number must be one.
    double turn = 0.0;
    for (std::size_t i = 0; i < n; ++i) turn += M_PI - angle(i);
    if (std::abs(turn - 2.0 * M_PI) > 1e-9) throw Error(ErrorKind::DegenerateGeometry, "self-intersecting polygon");
}

ConvexPolygon ConvexPolygon::rectangle(Point2 lo, Point2 hi)
{
    return ConvexPolygon({{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {lo.x, hi.y}});
}

ConvexPolygon ConvexPolygon::regular(std::size_t n, Point2 center, double circumradius, double phase)
{
    std::vector<Point2> v;
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i) v.push_back(center + polar(circumradius, phase + 2.0 * M_PI * i / n));
    return ConvexPolygon(std::move(v));
}

double ConvexPolygon::angle(std::size_t i) const
{
    const Point2 a = prev(i) - vertex(i);
    const Point2 b = next(i) - vertex(i);
    return std::atan2(std::abs(cross(a, b)), dot(a, b));
}

double ConvexPolygon::min_edge() const
{
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i) m = std::min(m, edge_length(i));
    return m;
}

double ConvexPolygon::perimeter() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += edge_length(i);
    return s;
}

double ConvexPolygon::area() const
{
    double a = 0.0;
    for (std::size_t i = 0; i < size(); ++i) a += cross(vertex(i), next(i));
    return 0.5 * a;
}

double ConvexPolygon::diameter() const
{
    double d = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = i + 1; j < size(); ++j) d = std::max(d, calderon::distance(vertex(i), vertex(j)));
    return d;
}

Point2 ConvexPolygon::centroid() const
{
    Point2 c;
    double a = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        const double w = cross(vertex(i), next(i));
        a += w;
        c += (vertex(i) + next(i)) * w;
    }
    return c * (1.0 / (3.0 * a));
}

double ConvexPolygon::scale() const
{
    double xmin = vertices_[0].x, xmax = xmin, ymin = vertices_[0].y, ymax = ymin;
    for (const auto& v : vertices_) {
        xmin = std::min(xmin, v.x);
        xmax = std::max(xmax, v.x);
        ymin = std::min(ymin, v.y);
        ymax = std::max(ymax, v.y);
    }
    return std::max(xmax - xmin, ymax - ymin);
}

bool ConvexPolygon::contains(const Point2& p, double tol) const
{
    for (std::size_t i = 0; i < size(); ++i) {
        const Point2 e = next(i) - vertex(i);
        if (cross(e, p - vertex(i)) < -tol * norm(e)) return false;
    }
    return true;
}

double ConvexPolygon::boundary_distance(const Point2& p) const
{
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i) d = std::min(d, segment_distance(p, vertex(i), next(i)));
    return d;
}

double ConvexPolygon::distance(const Point2& p) const
{
    return contains(p) ? 0.0 : boundary_distance(p);
}

std::optional<std::size_t> ConvexPolygon::find_vertex(const Point2& p, double tol) const
{
    for (std::size_t i = 0; i < size(); ++i)
        if (calderon::distance(vertex(i), p) <= tol * std::max(1.0, scale())) return i;
    return std::nullopt;
}

ConvexPolygon ConvexPolygon::translated(const Point2& t) const
{
    auto v = vertices_;
    for (auto& p : v) p += t;
    return ConvexPolygon(std::move(v));
}

ConvexPolygon ConvexPolygon::scaled(double factor, const Point2& about) const
{
    auto v = vertices_;
    for (auto& p : v) p = about + (p - about) * factor;
    return ConvexPolygon(std::move(v));
}

// ---------------------------------------------------------------------------
// Hull, Hausdorff distance, extremal vertex

ConvexPolygon convex_hull(std::span<const Point2> points)
{
    if (points.size() < 3) throw Error(ErrorKind::DegenerateGeometry, "hull needs at least 3 points");
    std::vector<Point2> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    double s = 0.0;
    for (const auto& p : pts) s = std::max({s, std::abs(p.x - pts[0].x), std::abs(p.y - pts[0].y)});
    const double tol = 1e-12 * s * s;

    // Andrew's monotone chain; collinear points are dropped.
    std::vector<Point2> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= tol) --k;
        h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= tol) --k;
        h[k++] = pts[i];
    }
    h.resize(k > 0 ? k - 1 : 0);
    if (h.size() < 3) throw Error(ErrorKind::DegenerateGeometry, "all points are collinear");
    return ConvexPolygon(std::move(h));
}

ConvexPolygon convex_hull(const ConvexPolygon& a, const ConvexPolygon& b)
{
    std::vector<Point2> pts(a.vertices().begin(), a.vertices().end());
    pts.insert(pts.end(), b.vertices().begin(), b.vertices().end());
    return convex_hull(pts);
}

double hausdorff_distance(const ConvexPolygon& p, const ConvexPolygon& q)
{
    double d = 0.0;
    for (const auto& v : p.vertices()) d = std::max(d, q.distance(v));
    for (const auto& v : q.vertices()) d = std::max(d, p.distance(v));
    return d;
}

ExtremalVertex extremal_vertex(const ConvexPolygon& p, const ConvexPolygon& q)
{
    ExtremalVertex best;
    best.distance = -1.0;
    const double tie = 1e-12 * std::max(p.scale(), q.scale());
    auto scan = [&](const ConvexPolygon& own, const ConvexPolygon& other, bool first) {
        for (std::size_t i = 0; i < own.size(); ++i) {
            const double d = other.distance(own.vertex(i));
            if (d > best.distance + tie) {
                best.distance = d;
                best.vertex = own.vertex(i);
                best.on_first = first;
                best.index = i;
                best.polygon_angle = own.angle(i);
            }
        }
    };
    scan(p, q, true);
    scan(q, p, false);
    if (best.distance <= tie) throw Error(ErrorKind::NoExtremalVertex, "polygons coincide");

    const ConvexPolygon hull = convex_hull(p, q);
    const auto hi = hull.find_vertex(best.vertex);
    if (!hi) throw Error(ErrorKind::InconsistentGeometry, "extremal vertex is not a vertex of the hull");
    best.hull_angle = hull.angle(*hi);
    if (best.hull_angle > 0.5 * (best.polygon_angle + M_PI) + 1e-12)
        throw Error(ErrorKind::InconsistentGeometry, "hull angle at extremal vertex exceeds (a + pi) / 2");
    return best;
}

// ---------------------------------------------------------------------------
// Domain

Domain Domain::disk(Point2 center, double radius)
{
    if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "disk radius must be positive");
    Domain d;
    d.center_ = center;
    d.radius_ = radius;
    return d;
}

Domain Domain::polygon(ConvexPolygon poly)
{
    Domain d;
    d.center_ = poly.centroid();
    d.radius_ = 0.0;
    for (const auto& v : poly.vertices()) d.radius_ = std::max(d.radius_, distance(v, d.center_));
    d.poly_ = std::move(poly);
    return d;
}

bool Domain::contains(const Point2& p) const
{
    if (is_disk()) return distance(p, center_) <= radius_;
    return poly_->contains(p);
}

double Domain::boundary_distance(const Point2& p) const
{
    if (is_disk()) return std::abs(radius_ - distance(p, center_));
    return poly_->boundary_distance(p);
}

double Domain::perimeter() const
{
    return is_disk() ? 2.0 * M_PI * radius_ : poly_->perimeter();
}

Point2 Domain::boundary_point(double theta) const
{
    const Point2 dir = polar(1.0, theta);
    if (is_disk()) return center_ + dir * radius_;
    // Ray from the centroid leaves a convex polygon exactly once.
    double tmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly_->size(); ++i) {
        const Point2 a = poly_->vertex(i) - center_;
        const Point2 e = poly_->next(i) - poly_->vertex(i);
        const double den = cross(dir, e);
        if (den <= 0.0) continue;
        const double t = cross(a, e) / den;
        if (t > 0.0) tmin = std::min(tmin, t);
    }
    return center_ + dir * tmin;
}

std::vector<Point2> Domain::discretize(double spacing) const
{
    std::vector<Point2> out;
    if (is_disk()) {
        const auto n = static_cast<std::size_t>(std::max(8.0, std::ceil(2.0 * M_PI * radius_ / spacing)));
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(center_ + polar(radius_, 2.0 * M_PI * i / n));
        return out;
    }
    for (std::size_t i = 0; i < poly_->size(); ++i) {
        const Point2 a = poly_->vertex(i), b = poly_->next(i);
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(distance(a, b) / spacing)));
        for (std::size_t j = 0; j < n; ++j) out.push_back(a + (b - a) * (static_cast<double>(j) / n));
    }
    return out;
}

double Domain::clearance(const ConvexPolygon& p) const
{
    double c = std::numeric_limits<double>::infinity();
    for (const auto& v : p.vertices()) {
        if (!contains(v)) return -boundary_distance(v);
        c = std::min(c, boundary_distance(v));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Class validation

void ClassDParams::validate() const
{
    if (!(0.0 < a_m && a_m < a_M && a_M < M_PI)) throw Error(ErrorKind::InvalidArgument, "need 0 < a_m < a_M < pi");
    if (!(l > 0.0)) throw Error(ErrorKind::InvalidArgument, "need l > 0");
    if (!(delta0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "need delta0 > 0");
    if (!(0.0 < k_m && k_m < k_M)) throw Error(ErrorKind::InvalidArgument, "need 0 < k_m < k_M");
}

bool ClassDReport::passed() const
{
    return std::all_of(clauses.begin(), clauses.end(), [](const ClauseResult& c) { return c.passed; });
}

const ClauseResult& ClassDReport::clause(int id) const
{
    for (const auto& c : clauses)
        if (c.clause == id) return c;
    throw Error(ErrorKind::OutOfRange, "no clause " + std::to_string(id));
}

ClassDReport validate_class_d(const ConvexPolygon& p, double k, const ClassDParams& params, const Domain& domain)
{
    ClassDReport report;

    ClauseResult contrast{1, "contrast", false, k, k, ""};
    contrast.passed = k > params.k_m && k < params.k_M && k != 1.0;
    if (k == 1.0) contrast.detail = "k = 1 is excluded";
    else if (!contrast.passed) contrast.detail = "k outside (k_m, k_M)";
    report.clauses.push_back(contrast);

    double amin = M_PI, amax = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        amin = std::min(amin, p.angle(i));
        amax = std::max(amax, p.angle(i));
    }
    ClauseResult angles{2, "angles", amin > params.a_m && amax < params.a_M, amin, amax, ""};
    if (!angles.passed) angles.detail = "vertex angle outside (a_m, a_M)";
    report.clauses.push_back(angles);

    const double emin = p.min_edge();
    ClauseResult edges{3, "edges", emin >= params.l, emin, emin, ""};
    if (!edges.passed) edges.detail = "edge shorter than l";
    report.clauses.push_back(edges);

    const double clear = domain.clearance(p);
    ClauseResult clearance{4, "boundary clearance", clear >= params.delta0, clear, clear, ""};
    if (!clearance.passed) clearance.detail = clear < 0.0 ? "polygon leaves the domain" : "closer than delta0 to the boundary";
    report.clauses.push_back(clearance);
    return report;
}

ClauseResult check_hull_clearance(const ConvexPolygon& p, const ConvexPolygon& q, const ClassDParams& params,
                                  const Domain& domain)
{
    const double clear = domain.clearance(convex_hull(p, q));
    ClauseResult r{5, "hull clearance", clear >= params.delta0, clear, clear, ""};
    if (!r.passed) r.detail = "hull of the pair closer than delta0 to the boundary";
    return r;
}

// ---------------------------------------------------------------------------
// Sector frame

Point2 SectorFrame::to_frame(const Point2& x) const
{
    const Point2 d = x - corner;
    return {dot(d, bisector), dot(d, normal)};
}

Point2 SectorFrame::from_frame(const Point2& local) const
{
    return corner + bisector * local.x + normal * local.y;
}

namespace {

std::vector<ContourNode> arc_nodes(const CircularArc& arc, double max_panel, int order)
{
    const auto& rule = gauss_legendre(order);
    const double span = arc.end_angle - arc.start_angle;
    const auto panels = static_cast<int>(std::max(1.0, std::ceil(arc.length() / max_panel)));
    std::vector<ContourNode> out;
    out.reserve(static_cast<std::size_t>(panels) * rule.nodes.size());
    const double dphi = span / panels;
    for (int p = 0; p < panels; ++p) {
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double phi = arc.start_angle + dphi * (p + rule.nodes[q]);
            out.push_back({arc.at(phi), polar(1.0, phi), rule.weights[q] * dphi * arc.radius});
        }
    }
    return out;
}

double frame_angle(const SectorFrame& f, const Point2& x)
{
    const Point2 l = f.to_frame(x);
    return std::atan2(l.y, l.x);
}

}  // namespace

std::vector<ContourNode> SectorFrame::inner_nodes(double max_panel, int order) const
{
    return arc_nodes(arc_inner, max_panel, order);
}

std::vector<ContourNode> SectorFrame::outer_nodes(double max_panel, int order) const
{
    return arc_nodes(arc_outer, max_panel, order);
}

double minimal_frequency(double h, double opening_b)
{
    return 1.0 / (2.0 * h * std::sin((M_PI - opening_b) / 4.0));
}

SectorFrame build_sector_frame(const ConvexPolygon& d, const ConvexPolygon& dp, const Point2& x_c, double tau,
                               const ClassDParams& params)
{
    const auto vi = d.find_vertex(x_c);
    if (!vi) throw Error(ErrorKind::InconsistentGeometry, "corner is not a vertex of the owning polygon");

    SectorFrame f{x_c, convex_hull(d, dp)};
    const auto hi = f.hull.find_vertex(x_c);
    if (!hi) throw Error(ErrorKind::InconsistentGeometry, "corner is not a vertex of the hull");

    f.opening_a = d.angle(*vi);
    f.opening_b = f.hull.angle(*hi);
    if (!(f.opening_b < M_PI)) throw Error(ErrorKind::InconsistentGeometry, "hull angle must be below pi");
    const Point2 e_prev = normalized(f.hull.prev(*hi) - x_c);
    const Point2 e_next = normalized(f.hull.next(*hi) - x_c);
    f.bisector = normalized(e_prev + e_next);
    f.normal = rotate90(f.bisector);

    const double hd = hausdorff_distance(d, dp);
    f.radius_h = std::min({0.5 * hd, params.l / 5.0, params.delta0});
    if (!(f.radius_h > 0.0)) throw Error(ErrorKind::InconsistentGeometry, "zero frame radius");
    if (dp.distance(x_c) <= f.radius_h)
        throw Error(ErrorKind::InconsistentGeometry, "ball around the corner meets the other polygon");

    f.tau0 = minimal_frequency(f.radius_h, f.opening_b);
    if (tau < f.tau0)
        throw Error(ErrorKind::FrequencyTooLow,
                    "tau = " + std::to_string(tau) + " below tau0 = " + std::to_string(f.tau0));
    f.tau = tau;

    // D is counter-clockwise: the edge to the next vertex has the smaller frame angle.
    const Point2 d_next = normalized(d.next(*vi) - x_c);
    const Point2 d_prev = normalized(d.prev(*vi) - x_c);
    f.theta_minus = frame_angle(f, x_c + d_next);
    f.theta_plus = frame_angle(f, x_c + d_prev);
    f.gamma_minus = {x_c, x_c + d_next * f.radius_h};
    f.gamma_plus = {x_c, x_c + d_prev * f.radius_h};

    const double h = f.radius_h;
    const double phi0 = (M_PI + f.opening_b) / 4.0;
    const double base = std::atan2(f.bisector.y, f.bisector.x);
    f.arc_inner = {x_c, h, base - phi0, base + phi0};

    // Circle through (h, phi0), (1/tau, pi), (h, -phi0) in frame polar coordinates.
    const Point2 p1 = f.from_frame(polar(h, phi0));
    const Point2 p2 = f.from_frame(polar(1.0 / tau, M_PI));
    const Point2 p3 = f.from_frame(polar(h, -phi0));
    const double det = 2.0 * cross(p2 - p1, p3 - p1);
    if (std::abs(det) <= 1e-14 * h * h) throw Error(ErrorKind::InconsistentGeometry, "outer arc points are collinear");
    const Point2 b = p2 - p1, c = p3 - p1;
    const double bb = dot(b, b), cc = dot(c, c);
    const Point2 center = p1 + Point2{(c.y * bb - b.y * cc) / det, (b.x * cc - c.x * bb) / det};
    const double radius = distance(center, p2);
    const double a1 = std::atan2(p1.y - center.y, p1.x - center.x);
    double a3 = std::atan2(p3.y - center.y, p3.x - center.x);
    while (a3 <= a1) a3 += 2.0 * M_PI;
    f.arc_outer = {center, radius, a1, a3};
    return f;
}

bool FrameAudit::ok() const
{
    const double tol = 1e-12;
    return min_axis_offset >= -tol && min_hull_clearance >= -tol && max_outer_radius <= tol && inner_covers_polygon > 0.0;
}

FrameAudit audit_frame(const SectorFrame& f, int nodes)
{
    FrameAudit a;
    a.min_axis_offset = std::numeric_limits<double>::infinity();
    a.min_hull_clearance = std::numeric_limits<double>::infinity();
    a.max_outer_radius = -std::numeric_limits<double>::infinity();
    const auto pts = f.outer_nodes(f.arc_outer.length() / std::max(1, nodes / 8));
    for (const auto& n : pts) {
        a.min_axis_offset = std::min(a.min_axis_offset, dot(n.x - f.corner, f.bisector) + 1.0 / f.tau);
        a.min_hull_clearance = std::min(a.min_hull_clearance, f.hull.distance(n.x) - 0.5 / f.tau);
        a.max_outer_radius = std::max(a.max_outer_radius, distance(n.x, f.corner) - f.radius_h);
    }
    // End points are where the hull clearance is tightest.
    for (double ang : {f.arc_outer.start_angle, f.arc_outer.end_angle}) {
        const Point2 x = f.arc_outer.at(ang);
        a.min_hull_clearance = std::min(a.min_hull_clearance, f.hull.distance(x) - 0.5 / f.tau);
    }
    a.inner_covers_polygon = (M_PI + f.opening_b) / 4.0 - std::max(std::abs(f.theta_plus), std::abs(f.theta_minus));
    return a;
}

// ---------------------------------------------------------------------------
// Nested geometry

NestedGeometry::NestedGeometry(std::vector<Layer> layers) : layers_(std::move(layers))
{
    for (std::size_t j = 0; j < layers_.size(); ++j) {
        if (!(layers_[j].k > 0.0)) throw Error(ErrorKind::InconsistentGeometry, "contrast must be positive");
        const double outer_k = j == 0 ? 1.0 : layers_[j - 1].k;
        if (layers_[j].k == outer_k)
            throw Error(ErrorKind::InconsistentGeometry, "adjacent layers need distinct contrasts");
        if (j > 0) {
            const auto& outer = layers_[j - 1].polygon;
            for (const auto& v : layers_[j].polygon.vertices()) {
                if (!outer.contains(v) || outer.boundary_distance(v) <= 0.0)
                    throw Error(ErrorKind::InconsistentGeometry, "layer is not strictly inside its parent");
            }
        }
    }
}

int NestedGeometry::region_of(const Point2& p) const
{
    int r = 0;
    for (std::size_t j = 0; j < layers_.size(); ++j) {
        if (!layers_[j].polygon.contains(p)) break;
        r = static_cast<int>(j) + 1;
    }
    return r;
}

double NestedGeometry::conductivity(int region) const
{
    if (region == 0) return 1.0;
    return layers_.at(static_cast<std::size_t>(region - 1)).k;
}

NestedGeometry NestedGeometry::with_contrasts(std::span<const double> ks) const
{
    if (ks.size() != layers_.size()) throw Error(ErrorKind::InvalidArgument, "contrast count mismatch");
    auto layers = layers_;
    for (std::size_t j = 0; j < ks.size(); ++j) layers[j].k = ks[j];
    return NestedGeometry(std::move(layers));
}

// ---------------------------------------------------------------------------
// Text format

void write_polygon(std::ostream& os, const ConvexPolygon& p)
{
    char buf[96];
    for (const auto& v : p.vertices()) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g\n", v.x, v.y);
        os << buf;
    }
}

ConvexPolygon read_polygon(std::istream& is)
{
    std::vector<Point2> pts;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line.substr(first));
        std::string tag;
        Point2 p;
        if (!(ls >> tag >> p.x >> p.y) || tag != "v")
            throw Error(ErrorKind::Config, "malformed polygon line " + std::to_string(lineno));
        pts.push_back(p);
    }
    return ConvexPolygon(std::move(pts));
}

}  // namespace calderon
