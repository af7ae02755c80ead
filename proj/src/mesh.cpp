#include "calderon/mesh.hpp"

#include "calderon/error.hpp"
#include "predicates.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace calderon {

using detail::circumcenter;
using detail::incircle;
using detail::orient2d;

double Mesh::signed_area(std::size_t t) const
{
    const auto& tri = triangles[t];
    return 0.5 * cross(nodes[tri[1]] - nodes[tri[0]], nodes[tri[2]] - nodes[tri[0]]);
}

double Mesh::diameter(std::size_t t) const
{
    const auto& tri = triangles[t];
    return std::max({distance(nodes[tri[0]], nodes[tri[1]]), distance(nodes[tri[1]], nodes[tri[2]]),
                     distance(nodes[tri[2]], nodes[tri[0]])});
}

double Mesh::min_angle(std::size_t t) const
{
    const auto& tri = triangles[t];
    double m = M_PI;
    for (int i = 0; i < 3; ++i) {
        const Point2 a = nodes[tri[(i + 1) % 3]] - nodes[tri[i]];
        const Point2 b = nodes[tri[(i + 2) % 3]] - nodes[tri[i]];
        m = std::min(m, std::atan2(std::abs(cross(a, b)), dot(a, b)));
    }
    return m;
}

Point2 Mesh::centroid(std::size_t t) const
{
    const auto& tri = triangles[t];
    return (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) * (1.0 / 3.0);
}

double graded_size(const MeshOptions& options, double rho_g, const Point2& x)
{
    double f = 1.0;
    for (const auto& g : options.grading) {
        if (g.eta >= 1.0 || rho_g <= 0.0) continue;
        const double r = distance(x, g.corner);
        if (r >= rho_g) continue;
        const double rr = std::max(r, options.cutoff_fraction * rho_g);
        f = std::min(f, std::pow(rr / rho_g, 1.0 - g.eta));
    }
    return options.target_h * f;
}

namespace {

constexpr int kNone = -1;

std::uint64_t edge_key(int a, int b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

// Incremental Delaunay triangulation (Bowyer-Watson) inside a large super triangle, with
// Ruppert-style refinement driven by encroachment, quality and a size field.
class Refiner {
public:
    Refiner(const Domain& domain, const MeshOptions& options, double rho_g)
        : domain_(domain), options_(options), rho_g_(rho_g)
    {
        const Point2 c = domain.center();
        const double r = 200.0 * domain.radius();
        for (int i = 0; i < 3; ++i) pts_.push_back(c + polar(r, M_PI / 2.0 + 2.0 * M_PI * i / 3.0));
        tris_.push_back({{0, 1, 2}, {kNone, kNone, kNone}, true});
        vert_tri_ = {0, 0, 0};
        on_disk_.assign(3, false);
        min_quality_ = std::sin(options.min_angle_deg * M_PI / 180.0);
    }

    struct Seg {
        int a, b, tag;
    };

    int add_point(const Point2& p, int hint)
    {
        const int t = locate(p, hint);
        const auto& tv = tris_[t].v;
        for (int i = 0; i < 3; ++i)
            if (pts_[tv[i]] == p) return tv[i];
        return insert_located(p, t);
    }

    // Registers an input curve; points are assumed already inserted.
    void add_segment(int a, int b, int tag)
    {
        segs_.push_back({a, b, tag});
        seg_index_[edge_key(a, b)] = static_cast<int>(segs_.size() - 1);
    }

    void mark_disk_point(int v)
    {
        if (static_cast<std::size_t>(v) >= on_disk_.size()) on_disk_.resize(v + 1, false);
        on_disk_[v] = true;
    }

    void refine()
    {
        for (int s = 0; s < static_cast<int>(segs_.size()); ++s) seg_queue_.push_back(s);
        drain_segments();
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
            if (tris_[t].alive) tri_queue_.push_back(t);
        while (!tri_queue_.empty()) {
            const int t = tri_queue_.front();
            tri_queue_.pop_front();
            if (!tris_[t].alive || !is_bad(t)) continue;
            split_triangle(t);
            drain_segments();
            if (pts_.size() > options_.max_nodes)
                throw Error(ErrorKind::MeshResolution, "node budget exceeded during refinement");
        }
    }

    Mesh extract(const NestedGeometry& geometry) const
    {
        Mesh m;
        std::vector<int> remap(pts_.size(), kNone);
        for (const auto& t : tris_) {
            if (!t.alive || has_super(t)) continue;
            std::array<int, 3> tri{};
            for (int i = 0; i < 3; ++i) {
                int& r = remap[t.v[i]];
                if (r == kNone) {
                    r = static_cast<int>(m.nodes.size());
                    m.nodes.push_back(pts_[t.v[i]]);
                }
                tri[i] = r;
            }
            m.triangles.push_back(tri);
        }
        m.region.reserve(m.triangles.size());
        for (std::size_t t = 0; t < m.triangles.size(); ++t) m.region.push_back(geometry.region_of(m.centroid(t)));
        for (const auto& s : segs_) {
            if (remap[s.a] == kNone || remap[s.b] == kNone)
                throw Error(ErrorKind::MeshResolution, "boundary segment lost during refinement");
            if (find_edge(s.a, s.b).first == kNone)
                throw Error(ErrorKind::MeshResolution, "boundary segment is not a mesh edge");
            m.boundary_edges.push_back({{remap[s.a], remap[s.b]}, s.tag});
        }
        return m;
    }

    const Point2& point(int v) const { return pts_[v]; }
    int last_triangle() const { return last_; }

private:
    struct Tri {
        std::array<int, 3> v;
        std::array<int, 3> nb;  // neighbor across the edge opposite v[i]
        bool alive;
    };

    bool is_super(int v) const { return v < 3; }
    bool has_super(const Tri& t) const { return is_super(t.v[0]) || is_super(t.v[1]) || is_super(t.v[2]); }

    int locate(const Point2& p, int hint) const
    {
        int t = (hint >= 0 && hint < static_cast<int>(tris_.size()) && tris_[hint].alive) ? hint : last_;
        if (!tris_[t].alive) {
            t = 0;
            while (!tris_[t].alive) ++t;
        }
        int rot = 0;
        for (std::size_t steps = 0; steps < 4 * tris_.size() + 16; ++steps) {
            const Tri& tri = tris_[t];
            int next = kNone;
            for (int k = 0; k < 3; ++k) {
                const int i = (k + rot) % 3;
                if (orient2d(pts_[tri.v[(i + 1) % 3]], pts_[tri.v[(i + 2) % 3]], p) < 0) {
                    next = tri.nb[i];
                    break;
                }
            }
            rot = (rot + 1) % 3;
            if (next == kNone) return t;
            t = next;
        }
        throw Error(ErrorKind::MeshResolution, "point location did not terminate");
    }

    std::vector<int> cavity_of(const Point2& p, int t) const
    {
        std::vector<int> cavity{t};
        std::vector<int> stack{t};
        in_cavity_.assign(tris_.size(), false);
        in_cavity_[t] = true;
        while (!stack.empty()) {
            const int c = stack.back();
            stack.pop_back();
            for (int i = 0; i < 3; ++i) {
                const int n = tris_[c].nb[i];
                if (n == kNone || in_cavity_[n]) continue;
                const auto& v = tris_[n].v;
                if (incircle(pts_[v[0]], pts_[v[1]], pts_[v[2]], p) > 0) {
                    in_cavity_[n] = true;
                    cavity.push_back(n);
                    stack.push_back(n);
                }
            }
        }
        return cavity;
    }

    int insert_located(const Point2& p, int t)
    {
        const auto cavity = cavity_of(p, t);
        const int pid = static_cast<int>(pts_.size());
        pts_.push_back(p);
        vert_tri_.push_back(kNone);
        on_disk_.push_back(false);

        struct Rim {
            int a, b, outside;
        };
        std::vector<Rim> rim;
        for (int c : cavity) {
            for (int i = 0; i < 3; ++i) {
                const int n = tris_[c].nb[i];
                if (n != kNone && in_cavity_[n]) continue;
                rim.push_back({tris_[c].v[(i + 1) % 3], tris_[c].v[(i + 2) % 3], n});
            }
        }
        std::vector<int> slots(cavity.begin(), cavity.end());
        for (int c : cavity) tris_[c].alive = false;
        while (slots.size() < rim.size()) {
            slots.push_back(static_cast<int>(tris_.size()));
            tris_.push_back({{0, 0, 0}, {kNone, kNone, kNone}, false});
        }
        std::unordered_map<int, int> by_start;
        by_start.reserve(rim.size() * 2);
        for (std::size_t k = 0; k < rim.size(); ++k) {
            const int id = slots[k];
            const Rim& r = rim[k];
            tris_[id] = {{r.a, r.b, pid}, {kNone, kNone, r.outside}, true};
            if (r.outside != kNone) {
                auto& o = tris_[r.outside];
                for (int i = 0; i < 3; ++i) {
                    if (o.v[(i + 1) % 3] == r.b && o.v[(i + 2) % 3] == r.a) o.nb[i] = id;
                }
            }
            by_start[r.a] = id;
            vert_tri_[r.a] = id;
            vert_tri_[r.b] = id;
        }
        for (std::size_t k = 0; k < rim.size(); ++k) {
            const int id = slots[k];
            const int other = by_start.at(rim[k].b);
            tris_[id].nb[0] = other;
            tris_[other].nb[1] = id;
        }
        // Unused slots stay dead.
        for (std::size_t k = rim.size(); k < slots.size(); ++k) tris_[slots[k]].alive = false;
        vert_tri_[pid] = slots[0];
        last_ = slots[0];
        if (!fresh_.empty() || track_fresh_) fresh_.insert(fresh_.end(), slots.begin(), slots.begin() + rim.size());
        return pid;
    }

    // (triangle, local index of the apex) for the triangle having directed edge a->b.
    std::pair<int, int> find_edge(int a, int b) const
    {
        const int start = vert_tri_[a];
        if (start == kNone) return {kNone, 0};
        int t = start;
        for (int guard = 0; guard < 4096; ++guard) {
            const Tri& tri = tris_[t];
            int ia = 0;
            while (tri.v[ia] != a) ++ia;
            if (tri.v[(ia + 1) % 3] == b) return {t, (ia + 2) % 3};
            if (tri.v[(ia + 2) % 3] == b) return {t, (ia + 1) % 3};
            t = tri.nb[(ia + 1) % 3];
            if (t == kNone || t == start) break;
        }
        return {kNone, 0};
    }

    bool encroaches(const Point2& p, const Seg& s) const
    {
        const Point2 ua = pts_[s.a] - p, ub = pts_[s.b] - p;
        return dot(ua, ub) <= 1e-12 * norm(ua) * norm(ub);
    }

    bool segment_encroached(const Seg& s) const
    {
        const auto [t, apex] = find_edge(s.a, s.b);
        if (t == kNone) return true;
        const int c = tris_[t].v[apex];
        if (!is_super(c) && encroaches(pts_[c], s)) return true;
        const int n = tris_[t].nb[apex];
        if (n == kNone) return false;
        for (int i = 0; i < 3; ++i) {
            const int d = tris_[n].v[i];
            if (d != s.a && d != s.b && !is_super(d) && encroaches(pts_[d], s)) return true;
        }
        return false;
    }

    Point2 split_point(const Seg& s) const
    {
        const Point2 m = (pts_[s.a] + pts_[s.b]) * 0.5;
        if (s.tag == kOuterBoundary && domain_.is_disk()) {
            const Point2 c = domain_.center();
            return c + normalized(m - c) * domain_.radius();
        }
        return m;
    }

    void split_segment(int si)
    {
        const Seg s = segs_[si];
        const auto [t, apex] = find_edge(s.a, s.b);
        track_fresh_ = true;
        fresh_.clear();
        const int m = insert_located(split_point(s), locate(split_point(s), t == kNone ? last_ : t));
        track_fresh_ = false;
        seg_index_.erase(edge_key(s.a, s.b));
        segs_[si] = {s.a, m, s.tag};
        seg_index_[edge_key(s.a, m)] = si;
        segs_.push_back({m, s.b, s.tag});
        seg_index_[edge_key(m, s.b)] = static_cast<int>(segs_.size() - 1);
        seg_queue_.push_back(si);
        seg_queue_.push_back(static_cast<int>(segs_.size() - 1));
        queue_after_insert(m);
    }

    // New triangles go back to the quality queue; subsegments opposite the new point may now
    // be encroached.
    void queue_after_insert(int /*pid*/)
    {
        for (int t : fresh_) {
            if (!tris_[t].alive) continue;
            tri_queue_.push_back(t);
            const auto& v = tris_[t].v;
            for (int i = 0; i < 3; ++i) {
                auto it = seg_index_.find(edge_key(v[i], v[(i + 1) % 3]));
                if (it != seg_index_.end()) seg_queue_.push_back(it->second);
            }
        }
        fresh_.clear();
    }

    void drain_segments()
    {
        while (!seg_queue_.empty()) {
            const int si = seg_queue_.front();
            seg_queue_.pop_front();
            if (segment_encroached(segs_[si]) || segment_too_long(segs_[si])) split_segment(si);
            if (pts_.size() > options_.max_nodes)
                throw Error(ErrorKind::MeshResolution, "node budget exceeded while splitting segments");
        }
    }

    bool segment_too_long(const Seg& s) const
    {
        const Point2 m = (pts_[s.a] + pts_[s.b]) * 0.5;
        return distance(pts_[s.a], pts_[s.b]) > 1.0001 * graded_size(options_, rho_g_, m);
    }

    bool is_bad(int t) const
    {
        const Tri& tri = tris_[t];
        if (has_super(tri)) return false;
        const Point2 a = pts_[tri.v[0]], b = pts_[tri.v[1]], c = pts_[tri.v[2]];
        const double la = distance(b, c), lb = distance(c, a), lc = distance(a, b);
        const double area2 = std::abs(cross(b - a, c - a));
        const double circum = la * lb * lc / (2.0 * area2);
        const double lmax = std::max({la, lb, lc});
        const double lmin = std::min({la, lb, lc});
        const double size = graded_size(options_, rho_g_, (a + b + c) * (1.0 / 3.0));
        if (circum * std::sqrt(3.0) > size) return true;
        // sin(min angle) = lmin / (2 R); tiny triangles pinned by small input angles are left alone.
        if (lmin / (2.0 * circum) < min_quality_ && lmax > 0.05 * size) return true;
        return false;
    }

    void split_triangle(int t)
    {
        const auto& v = tris_[t].v;
        const Point2 a = pts_[v[0]], b = pts_[v[1]], c = pts_[v[2]];
        const Point2 cc = circumcenter(a, b, c);
        const int loc = locate(cc, t);
        const auto cavity = cavity_of(cc, loc);

        std::vector<int> hits;
        bool outside = has_super(tris_[loc]) || !domain_.contains(cc);
        for (int ct : cavity) {
            const auto& cv = tris_[ct].v;
            outside = outside || has_super(tris_[ct]);
            for (int i = 0; i < 3; ++i) {
                auto it = seg_index_.find(edge_key(cv[i], cv[(i + 1) % 3]));
                if (it != seg_index_.end() && encroaches(cc, segs_[it->second])) hits.push_back(it->second);
            }
        }
        if (hits.empty() && outside) {
            // Split whichever boundary subsegment separates the triangle from its circumcenter.
            const Point2 g = (a + b + c) * (1.0 / 3.0);
            for (int ct : cavity) {
                const auto& cv = tris_[ct].v;
                for (int i = 0; i < 3; ++i) {
                    auto it = seg_index_.find(edge_key(cv[i], cv[(i + 1) % 3]));
                    if (it == seg_index_.end() || segs_[it->second].tag != kOuterBoundary) continue;
                    const Seg& s = segs_[it->second];
                    const int o1 = orient2d(pts_[s.a], pts_[s.b], g), o2 = orient2d(pts_[s.a], pts_[s.b], cc);
                    if (o1 * o2 <= 0) hits.push_back(it->second);
                }
            }
            if (hits.empty()) return;
        }
        if (!hits.empty()) {
            std::sort(hits.begin(), hits.end());
            hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
            for (int si : hits) split_segment(si);
            if (tris_[t].alive) tri_queue_.push_back(t);
            return;
        }
        track_fresh_ = true;
        fresh_.clear();
        const int pid = insert_located(cc, loc);
        track_fresh_ = false;
        queue_after_insert(pid);
    }

    const Domain& domain_;
    const MeshOptions& options_;
    double rho_g_;
    double min_quality_;
    std::vector<Point2> pts_;
    std::vector<Tri> tris_;
    std::vector<int> vert_tri_;
    std::vector<bool> on_disk_;
    std::vector<Seg> segs_;
    std::unordered_map<std::uint64_t, int> seg_index_;
    std::deque<int> seg_queue_;
    std::deque<int> tri_queue_;
    std::vector<int> fresh_;
    bool track_fresh_ = false;
    int last_ = 0;
    mutable std::vector<bool> in_cavity_;
};

// Splits [a, b] by bisection until every piece obeys the size field.
void subdivide(const Point2& a, const Point2& b, const MeshOptions& options, double rho_g, std::vector<Point2>& out)
{
    const Point2 m = (a + b) * 0.5;
    if (distance(a, b) <= graded_size(options, rho_g, m) || distance(a, b) < 1e-9) {
        out.push_back(a);
        return;
    }
    subdivide(a, m, options, rho_g, out);
    subdivide(m, b, options, rho_g, out);
}

}  // namespace

Mesh generate_mesh(const Domain& domain, const NestedGeometry& geometry, const MeshOptions& options)
{
    if (!(options.target_h > 0.0)) throw Error(ErrorKind::InvalidArgument, "target_h must be positive");

    const double min_gap = 3.0 * options.target_h;
    for (std::size_t j = 0; j < geometry.size(); ++j) {
        const auto& poly = geometry.layer(j).polygon;
        const double gap = j == 0 ? domain.clearance(poly) : [&] {
            double g = std::numeric_limits<double>::infinity();
            for (const auto& v : poly.vertices()) g = std::min(g, geometry.layer(j - 1).polygon.boundary_distance(v));
            return g;
        }();
        if (gap < min_gap)
            throw Error(ErrorKind::MeshResolution, "geometry clearance " + std::to_string(gap) + " below 3 target_h");
    }

    double rho_g = options.grading_radius;
    if (rho_g <= 0.0 && !geometry.empty()) {
        double l = std::numeric_limits<double>::infinity();
        for (const auto& layer : geometry.layers()) l = std::min(l, layer.polygon.min_edge());
        rho_g = l / 5.0;
    }

    Refiner refiner(domain, options, rho_g);

    // Outer boundary.
    const auto outer = domain.discretize(options.target_h);
    std::vector<int> outer_ids;
    outer_ids.reserve(outer.size());
    for (const auto& p : outer) outer_ids.push_back(refiner.add_point(p, refiner.last_triangle()));
    for (std::size_t i = 0; i < outer_ids.size(); ++i)
        refiner.add_segment(outer_ids[i], outer_ids[(i + 1) % outer_ids.size()], kOuterBoundary);

    // Interfaces.
    for (std::size_t j = 0; j < geometry.size(); ++j) {
        const auto& poly = geometry.layer(j).polygon;
        std::vector<Point2> pts;
        for (std::size_t i = 0; i < poly.size(); ++i) subdivide(poly.vertex(i), poly.next(i), options, rho_g, pts);
        std::vector<int> ids;
        ids.reserve(pts.size());
        for (const auto& p : pts) ids.push_back(refiner.add_point(p, refiner.last_triangle()));
        for (std::size_t i = 0; i < ids.size(); ++i)
            refiner.add_segment(ids[i], ids[(i + 1) % ids.size()], static_cast<int>(j) + 1);
    }

    refiner.refine();
    return refiner.extract(geometry);
}

// ---------------------------------------------------------------------------
// Locator

MeshLocator::MeshLocator(const Mesh& mesh) : mesh_(&mesh)
{
    Point2 lo = mesh.nodes.front(), hi = lo;
    for (const auto& p : mesh.nodes) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const double extent = std::max(hi.x - lo.x, hi.y - lo.y);
    const double n = std::max(1.0, std::sqrt(static_cast<double>(mesh.num_triangles()) / 2.0));
    cell_ = extent / n * 1.0000001;
    lo_ = lo;
    nx_ = static_cast<int>((hi.x - lo.x) / cell_) + 1;
    ny_ = static_cast<int>((hi.y - lo.y) / cell_) + 1;
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        Point2 a = mesh.nodes[tri[0]], b = a;
        for (int k = 1; k < 3; ++k) {
            const Point2& p = mesh.nodes[tri[k]];
            a = {std::min(a.x, p.x), std::min(a.y, p.y)};
            b = {std::max(b.x, p.x), std::max(b.y, p.y)};
        }
        const int i0 = std::clamp(static_cast<int>((a.x - lo_.x) / cell_), 0, nx_ - 1);
        const int i1 = std::clamp(static_cast<int>((b.x - lo_.x) / cell_), 0, nx_ - 1);
        const int j0 = std::clamp(static_cast<int>((a.y - lo_.y) / cell_), 0, ny_ - 1);
        const int j1 = std::clamp(static_cast<int>((b.y - lo_.y) / cell_), 0, ny_ - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(t));
    }
}

std::optional<MeshLocator::Hit> MeshLocator::locate(const Point2& p, double tol) const
{
    const Mesh& m = *mesh_;
    auto bary = [&](int t) {
        const auto& tri = m.triangles[t];
        const Point2 a = m.nodes[tri[0]], b = m.nodes[tri[1]], c = m.nodes[tri[2]];
        const double area = cross(b - a, c - a);
        return std::array<double, 3>{cross(b - p, c - p) / area, cross(c - p, a - p) / area, cross(a - p, b - p) / area};
    };
    const int ci = static_cast<int>(std::floor((p.x - lo_.x) / cell_));
    const int cj = static_cast<int>(std::floor((p.y - lo_.y) / cell_));
    Hit best;
    double best_violation = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring <= 1; ++ring) {
        for (int j = cj - ring; j <= cj + ring; ++j) {
            for (int i = ci - ring; i <= ci + ring; ++i) {
                if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
                if (ring == 1 && i > ci - 1 && i < ci + 1 && j > cj - 1 && j < cj + 1) continue;
                for (int t : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
                    const auto b = bary(t);
                    const double v = -std::min({b[0], b[1], b[2]});
                    if (v <= 0.0) return Hit{t, b};
                    // Violation measured as a distance: barycentric deficit times the local size.
                    const double dv = v * m.diameter(static_cast<std::size_t>(t));
                    if (dv < best_violation) {
                        best_violation = dv;
                        best = {t, b};
                    }
                }
            }
        }
        if (ring == 0 && best_violation <= tol) break;
    }
    if (best.triangle < 0 || best_violation > tol) return std::nullopt;
    double s = 0.0;
    for (auto& w : best.bary) {
        w = std::max(w, 0.0);
        s += w;
    }
    for (auto& w : best.bary) w /= s;
    return best;
}

std::vector<MeshLocator::Hit> MeshLocator::locate_all(const Point2& p, double tol) const
{
    const Mesh& m = *mesh_;
    std::vector<Hit> hits;
    const int ci = static_cast<int>(std::floor((p.x - lo_.x) / cell_));
    const int cj = static_cast<int>(std::floor((p.y - lo_.y) / cell_));
    for (int j = cj - 1; j <= cj + 1; ++j) {
        for (int i = ci - 1; i <= ci + 1; ++i) {
            if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
            for (int t : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
                if (std::any_of(hits.begin(), hits.end(), [t](const Hit& h) { return h.triangle == t; })) continue;
                const auto& tri = m.triangles[t];
                const Point2 a = m.nodes[tri[0]], b = m.nodes[tri[1]], c = m.nodes[tri[2]];
                const double area = cross(b - a, c - a);
                std::array<double, 3> w{cross(b - p, c - p) / area, cross(c - p, a - p) / area,
                                        cross(a - p, b - p) / area};
                const double v = -std::min({w[0], w[1], w[2]});
                if (v * m.diameter(static_cast<std::size_t>(t)) > tol) continue;
                double s = 0.0;
                for (auto& x : w) s += (x = std::max(x, 0.0));
                for (auto& x : w) x /= s;
                hits.push_back({t, w});
            }
        }
    }
    return hits;
}

// ---------------------------------------------------------------------------
// Text format: node i x y / tri i a b c tag / bedge a b tag

void write_mesh(std::ostream& os, const Mesh& mesh)
{
    char buf[128];
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        std::snprintf(buf, sizeof buf, "node %zu %.17g %.17g\n", i, mesh.nodes[i].x, mesh.nodes[i].y);
        os << buf;
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        os << "tri " << t << ' ' << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << mesh.region[t] << '\n';
    }
    for (const auto& e : mesh.boundary_edges) os << "bedge " << e.nodes[0] << ' ' << e.nodes[1] << ' ' << e.tag << '\n';
}

Mesh read_mesh(std::istream& is)
{
    Mesh m;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "node") {
            std::size_t i;
            Point2 p;
            ls >> i >> p.x >> p.y;
            if (i != m.nodes.size()) throw Error(ErrorKind::Config, "mesh nodes out of order");
            m.nodes.push_back(p);
        } else if (kind == "tri") {
            std::size_t i;
            std::array<int, 3> t{};
            int tag = 0;
            ls >> i >> t[0] >> t[1] >> t[2] >> tag;
            m.triangles.push_back(t);
            m.region.push_back(tag);
        } else if (kind == "bedge") {
            BoundaryEdge e;
            ls >> e.nodes[0] >> e.nodes[1] >> e.tag;
            m.boundary_edges.push_back(e);
        } else {
            throw Error(ErrorKind::Config, "unknown mesh record '" + kind + "'");
        }
        if (!ls) throw Error(ErrorKind::Config, "malformed mesh line: " + line);
    }
    return m;
}

}  // namespace calderon
