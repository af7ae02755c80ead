#include "calderon/boundary.hpp"

#include "calderon/error.hpp"
#include "calderon/quadrature.hpp"

#include <algorithm>
#include <unordered_map>

namespace calderon {

namespace {

double wrap_from(double theta, double base)
{
    double d = std::fmod(theta - base, 2.0 * M_PI);
    if (d < 0.0) d += 2.0 * M_PI;
    return base + d;
}

// Outer boundary of a mesh as a counter-clockwise chain of nodes sorted by polar angle.
struct Chain {
    std::vector<int> nodes;
    std::vector<double> theta;  // increasing, within [theta[0], theta[0] + 2 pi)
};

Chain outer_chain(const Mesh& mesh, const Point2& center)
{
    std::unordered_map<int, int> next;
    for (const auto& e : mesh.boundary_edges)
        if (e.tag == kOuterBoundary) next[e.nodes[0]] = e.nodes[1];
    if (next.empty()) throw Error(ErrorKind::InvalidArgument, "mesh has no outer boundary");

    // Start at the node with the smallest polar angle in [0, 2 pi).
    int start = next.begin()->first;
    double best = 1e300;
    for (const auto& [a, b] : next) {
        const Point2 d = mesh.nodes[a] - center;
        const double th = wrap_from(std::atan2(d.y, d.x), 0.0);
        if (th < best || (th == best && a < start)) {
            best = th;
            start = a;
        }
    }
    Chain c;
    int v = start;
    do {
        const Point2 d = mesh.nodes[v] - center;
        c.nodes.push_back(v);
        c.theta.push_back(wrap_from(std::atan2(d.y, d.x), best));
        v = next.at(v);
    } while (v != start && c.nodes.size() <= next.size());
    if (v != start) throw Error(ErrorKind::InconsistentGeometry, "outer boundary is not a single closed curve");
    return c;
}

struct Sample {
    Point2 x;
    double value;
};

Sample sample_chain(const DiscreteField& u, const Chain& c, const Point2& center, double theta)
{
    const double t = wrap_from(theta, c.theta.front());
    auto it = std::upper_bound(c.theta.begin(), c.theta.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - c.theta.begin()) - 1;
    const int na = c.nodes[i], nb = c.nodes[(i + 1) % c.nodes.size()];
    const Point2 a = u.mesh().nodes[na], b = u.mesh().nodes[nb];
    const Point2 d = polar(1.0, t);
    const double denom = cross(b - a, d);
    double s = denom != 0.0 ? cross(center - a, d) / denom : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return {a + (b - a) * s, (1.0 - s) * u.value(static_cast<std::size_t>(na)) + s * u.value(static_cast<std::size_t>(nb))};
}

}  // namespace

bool BoundaryArc::contains(double theta) const
{
    if (closed()) return true;
    return wrap_from(theta, theta0) <= theta1 + 1e-14 * (1.0 + std::abs(theta1));
}

double BoundaryFunction::length() const
{
    double s = 0.0;
    for (std::size_t p = 0; p < panels(); ++p) s += distance(x[p], x[(p + 1) % x.size()]);
    return s;
}

double trace_at(const DiscreteField& u, const Domain& domain, double theta)
{
    return sample_chain(u, outer_chain(u.mesh(), domain.center()), domain.center(), theta).value;
}

BoundaryFunction trace(const DiscreteField& u, const BoundaryArc& arc, const Domain& domain)
{
    if (!(arc.theta1 > arc.theta0)) throw Error(ErrorKind::InvalidArgument, "empty boundary arc");
    const Chain c = outer_chain(u.mesh(), domain.center());
    BoundaryFunction out;
    out.closed = arc.closed();
    if (out.closed) {
        for (std::size_t i = 0; i < c.nodes.size(); ++i) {
            out.x.push_back(u.mesh().nodes[c.nodes[i]]);
            out.theta.push_back(c.theta[i]);
            out.f.push_back(u.value(static_cast<std::size_t>(c.nodes[i])));
        }
        return out;
    }
    struct Item {
        double t;
        Point2 x;
        double f;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        const double t = wrap_from(c.theta[i], arc.theta0);
        if (t > arc.theta0 && t < arc.theta1)
            items.push_back({t, u.mesh().nodes[c.nodes[i]], u.value(static_cast<std::size_t>(c.nodes[i]))});
    }
    for (double t : {arc.theta0, arc.theta1}) {
        const Sample s = sample_chain(u, c, domain.center(), t);
        items.push_back({t, s.x, s.value});
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.t < b.t; });
    for (const auto& it : items) {
        out.x.push_back(it.x);
        out.theta.push_back(it.t);
        out.f.push_back(it.f);
    }
    return out;
}

BoundaryFunction trace_difference(const DiscreteField& u, const DiscreteField& up, const BoundaryArc& arc,
                                  const Domain& domain)
{
    if (!(arc.theta1 > arc.theta0)) throw Error(ErrorKind::InvalidArgument, "empty boundary arc");
    const Chain cu = outer_chain(u.mesh(), domain.center());
    const Chain cp = outer_chain(up.mesh(), domain.center());
    const double base = arc.closed() ? 0.0 : arc.theta0;
    std::vector<double> angles;
    for (const Chain* c : {&cu, &cp})
        for (double t : c->theta) {
            const double w = wrap_from(t, base);
            if (arc.closed() || (w > arc.theta0 && w < arc.theta1)) angles.push_back(w);
        }
    if (!arc.closed()) {
        angles.push_back(arc.theta0);
        angles.push_back(arc.theta1);
    }
    std::sort(angles.begin(), angles.end());
    std::vector<double> unique;
    for (double t : angles)
        if (unique.empty() || t - unique.back() > 1e-13) unique.push_back(t);
    if (arc.closed() && unique.size() > 1 && unique.front() + 2.0 * M_PI - unique.back() <= 1e-13) unique.pop_back();

    BoundaryFunction out;
    out.closed = arc.closed();
    for (double t : unique) {
        out.theta.push_back(t);
        out.x.push_back(domain.boundary_point(t));
        out.f.push_back(sample_chain(u, cu, domain.center(), t).value - sample_chain(up, cp, domain.center(), t).value);
    }
    return out;
}

double l2_norm(const BoundaryFunction& f)
{
    double s = 0.0;
    for (std::size_t p = 0; p < f.panels(); ++p) {
        const std::size_t q = (p + 1) % f.x.size();
        const double a = f.f[p], b = f.f[q];
        s += distance(f.x[p], f.x[q]) / 3.0 * (a * a + a * b + b * b);
    }
    return std::sqrt(s);
}

double h_half_seminorm(const BoundaryFunction& f)
{
    const std::size_t n = f.panels();
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "arc shorter than two panels");
    const std::size_t m = f.x.size();
    std::vector<Point2> a(n), e(n);
    std::vector<double> len(n), fa(n), df(n);
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t q = (p + 1) % m;
        a[p] = f.x[p];
        e[p] = f.x[q] - f.x[p];
        len[p] = norm(e[p]);
        fa[p] = f.f[p];
        df[p] = f.f[q] - f.f[p];
    }
    const auto& g8 = gauss_legendre(8);
    const auto& g24 = gauss_legendre(24);

    // Adjacent panels share a vertex v. With s, t the distances from v along each panel the
    // integrand (m_p s - m_q t)^2 / (s^2 + t^2 - 2 s t cos psi) is homogeneous of degree zero,
    // so polar coordinates reduce the rectangle to one smooth angular integral per triangle.
    auto adjacent = [&](std::size_t p, std::size_t q) {
        // panel p ends at v, panel q starts at v
        const double mp = -df[p] / len[p];  // slope of f moving from v backward along p
        const double mq = df[q] / len[q];
        const Point2 dp = e[p] * (-1.0 / len[p]);
        const Point2 dq = e[q] * (1.0 / len[q]);
        const double cpsi = dot(dp, dq);
        const double split = std::atan2(len[q], len[p]);
        double total = 0.0;
        for (int piece = 0; piece < 2; ++piece) {
            const double lo = piece == 0 ? 0.0 : split;
            const double hi = piece == 0 ? split : M_PI / 2.0;
            for (std::size_t k = 0; k < g24.nodes.size(); ++k) {
                const double phi = lo + (hi - lo) * g24.nodes[k];
                const double c = std::cos(phi), s = std::sin(phi);
                const double num = (mp * c - mq * s) * (mp * c - mq * s);
                const double den = 1.0 - 2.0 * c * s * cpsi;
                const double rmax = piece == 0 ? len[p] / c : len[q] / s;
                total += g24.weights[k] * (hi - lo) * num / den * 0.5 * rmax * rmax;
            }
        }
        return total;
    };

    double sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        sum += df[p] * df[p];  // self term m^2 L^2
        for (std::size_t q = p + 1; q < n; ++q) {
            const bool next = q == p + 1;
            const bool wrap = f.closed && p == 0 && q == n - 1;
            if (next) {
                sum += 2.0 * adjacent(p, q);
                continue;
            }
            if (wrap) {
                sum += 2.0 * adjacent(q, p);
                continue;
            }
            double pair = 0.0;
            for (std::size_t i = 0; i < g8.nodes.size(); ++i) {
                const double si = g8.nodes[i];
                const Point2 xs = a[p] + e[p] * si;
                const double fs = fa[p] + df[p] * si;
                for (std::size_t j = 0; j < g8.nodes.size(); ++j) {
                    const double tj = g8.nodes[j];
                    const Point2 d = xs - (a[q] + e[q] * tj);
                    const double diff = fs - (fa[q] + df[q] * tj);
                    pair += g8.weights[i] * g8.weights[j] * diff * diff / dot(d, d);
                }
            }
            sum += 2.0 * pair * len[p] * len[q];
        }
    }
    return std::sqrt(sum);
}

double h_half_norm(const BoundaryFunction& f)
{
    const double l2 = l2_norm(f);
    const double semi = h_half_seminorm(f);
    return std::sqrt(l2 * l2 + semi * semi);
}

BoundaryFunction scaled(BoundaryFunction f, double c)
{
    for (auto& v : f.f) v *= c;
    return f;
}

}  // namespace calderon
