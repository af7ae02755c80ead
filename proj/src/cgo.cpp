#include "calderon/cgo.hpp"

#include "calderon/error.hpp"
#include "calderon/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace calderon {

CgoProbe::CgoProbe(Point2 corner, Point2 axis, double tau) : corner_(corner), axis_(normalized(axis)), tau_(tau)
{
    if (!(tau > 0.0)) throw Error(ErrorKind::DomainError, "probe frequency must be positive");
    const Point2 y = rotate90(axis_);
    rho_ = {cplx(-tau * axis_.x, tau * y.x), cplx(-tau * axis_.y, tau * y.y)};
}

cplx CgoProbe::eval(const Point2& x) const
{
    const Point2 d = x - corner_;
    return std::exp(rho_[0] * d.x + rho_[1] * d.y);
}

std::array<cplx, 2> CgoProbe::grad(const Point2& x) const
{
    const cplx u = eval(x);
    return {rho_[0] * u, rho_[1] * u};
}

cplx CgoProbe::normal_derivative(const Point2& x, const Point2& n) const
{
    return (rho_[0] * n.x + rho_[1] * n.y) * eval(x);
}

// ---------------------------------------------------------------------------
// Special functions

namespace {

// Adaptive Gauss-Legendre: compares 8 and 16 points on each interval and bisects.
double adaptive_gauss(const std::function<double(double)>& f, double a, double b, double tol, int depth = 0)
{
    auto rule = [&](int n, double lo, double hi) {
        const auto& g = gauss_legendre(n);
        double s = 0.0;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * f(lo + (hi - lo) * g.nodes[i]);
        return s * (hi - lo);
    };
    const double coarse = rule(8, a, b);
    const double fine = rule(16, a, b);
    if (std::abs(fine - coarse) <= tol || depth > 40) return fine;
    const double m = 0.5 * (a + b);
    return adaptive_gauss(f, a, m, 0.5 * tol, depth + 1) + adaptive_gauss(f, m, b, 0.5 * tol, depth + 1);
}

// Lower incomplete gamma by quadrature; for s < 1 the substitution t = v^(1/s) removes the
// endpoint singularity.
double lower_gamma(double s, double x)
{
    if (x == 0.0) return 0.0;
    const double tol = 1e-15 * std::tgamma(s);
    if (s < 1.0) {
        const double top = std::pow(x, s);
        return adaptive_gauss([s](double v) { return std::exp(-std::pow(v, 1.0 / s)); }, 0.0, top, tol) / s;
    }
    return adaptive_gauss([s](double t) { return std::pow(t, s - 1.0) * std::exp(-t); }, 0.0, x, tol);
}

// Modified Lentz evaluation of the continued fraction for Gamma(s, x), x > s + 1 - ish.
double upper_gamma_cf(double s, double x)
{
    const double tiny = 1e-300;
    double b = x + 1.0 - s;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + s * std::log(x)) * h;
}

}  // namespace

double incomplete_gamma(double s, double x)
{
    if (!(s > 0.0 && s <= 5.0)) throw Error(ErrorKind::DomainError, "incomplete gamma needs s in (0, 5]");
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorKind::DomainError, "incomplete gamma needs x >= 0");
    const double v = x < s + 1.0 ? std::tgamma(s) - lower_gamma(s, x) : upper_gamma_cf(s, x);
    const double bound = std::pow(2.0, s) * std::tgamma(s) * std::exp(-x / 2.0);
    if (v > bound * (1.0 + 1e-12))
        throw Error(ErrorKind::DomainError, "incomplete gamma exceeds 2^s Gamma(s) exp(-x/2)");
    return v;
}

cplx laplace_integral(cplx z0, double eta)
{
    if (!(z0.real() < 0.0)) throw Error(ErrorKind::DomainError, "laplace integral needs Re z0 < 0");
    if (!(eta > 0.0)) throw Error(ErrorKind::DomainError, "laplace integral needs eta > 0");
    return std::pow(-1.0 / z0, eta) * std::tgamma(eta);
}

double lower_bound(const SingularExponent& se, double K, double tau)
{
    return std::abs(K) * std::tgamma(se.eta) * std::sin(se.opening_a * se.eta) * std::pow(tau, -se.eta);
}

RayIntegral corner_ray_integral(const SingularExponent& se, double K, const CgoProbe& p, double theta_plus,
                                double theta_minus)
{
    const double tau = p.tau();
    auto z = [tau](double theta) { return -tau * std::exp(cplx(0.0, -theta)); };
    // inside branch explicitly; wrapping the edge angle can round it onto the outside one
    auto inside = [&](double theta) { return -se.eta * std::sin(se.eta * theta + se.phi_in); };
    const double dplus = inside(se.opening_a / 2.0);
    const double dminus = inside(-se.opening_a / 2.0);
    RayIntegral out;
    out.value = K * (dplus * laplace_integral(z(theta_plus), se.eta) - dminus * laplace_integral(z(theta_minus), se.eta));
    out.lower_bound = lower_bound(se, K, tau);
    out.sharp = out.lower_bound * se.eta;
    out.meets_lower_bound = std::abs(out.value) >= out.lower_bound;
    return out;
}

// ---------------------------------------------------------------------------
// Contour identity

namespace {

double local_size(const DiscreteField& u, const Point2& x)
{
    const auto hit = u.locator().locate(x, 1e-9);
    if (!hit) throw Error(ErrorKind::ContourOutsideMesh, "contour point outside the mesh");
    return u.mesh().diameter(static_cast<std::size_t>(hit->triangle));
}

Point2 field_gradient(const DiscreteField& u, const Point2& x)
{
    const auto hit = u.locator().locate(x, 1e-9);
    if (!hit) throw Error(ErrorKind::ContourOutsideMesh, "contour point outside the mesh");
    return u.gradient(static_cast<std::size_t>(hit->triangle));
}

double field_value(const DiscreteField& u, const Point2& x)
{
    const auto v = u.eval(x, 1e-9);
    if (!v) throw Error(ErrorKind::ContourOutsideMesh, "contour point outside the mesh");
    return *v;
}

// Arc quadrature with breakpoints; normals point away from the arc center.
template <class Fn>
void integrate_arc(const CircularArc& arc, std::vector<double> breaks, double max_panel, const GaussRule& rule, Fn&& fn)
{
    breaks.push_back(arc.start_angle);
    breaks.push_back(arc.end_angle);
    std::sort(breaks.begin(), breaks.end());
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double lo = breaks[s], hi = breaks[s + 1];
        if (!(hi > lo)) continue;
        const int panels = static_cast<int>(std::max(1.0, std::ceil((hi - lo) * arc.radius / max_panel)));
        const double d = (hi - lo) / panels;
        for (int p = 0; p < panels; ++p)
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double phi = lo + d * (p + rule.nodes[q]);
                fn(arc.at(phi), polar(1.0, phi), rule.weights[q] * d * arc.radius);
            }
    }
}

}  // namespace

IdentityReport contour_identity(const DiscreteField& u, const DiscreteField& up, double k, const SectorFrame& frame,
                                const CgoProbe& p, const IdentityOptions& options)
{
    const auto& rule = gauss_legendre(options.order);
    const double h = frame.radius_h;
    const double alpha = frame.alpha_prime();
    IdentityReport rep;
    rep.tau = p.tau();

    double max_panel = options.max_panel;
    if (!(max_panel > 0.0)) {
        double hmin = std::numeric_limits<double>::infinity();
        auto probe_arc = [&](const CircularArc& arc) {
            for (int i = 0; i <= 64; ++i) {
                const Point2 x = arc.at(arc.start_angle + (arc.end_angle - arc.start_angle) * i / 64.0);
                hmin = std::min({hmin, local_size(u, x), local_size(up, x)});
            }
        };
        probe_arc(frame.arc_inner);
        probe_arc(frame.arc_outer);
        max_panel = 0.5 * hmin;
    }
    rep.max_panel = max_panel;

    // Rays: interface edges of D lying on the two segments, clipped to the ball.
    const Mesh& m = u.mesh();
    const double on_tol = 1e-9 * std::max(1.0, h);
    for (const auto& e : m.boundary_edges) {
        if (e.tag != options.inside_region) continue;
        Point2 a = m.nodes[e.nodes[0]], b = m.nodes[e.nodes[1]];
        bool on_ray = false;
        for (const Segment* g : {&frame.gamma_plus, &frame.gamma_minus}) {
            const Point2 dir = normalized(g->b - g->a);
            if (std::abs(cross(dir, a - g->a)) < on_tol && std::abs(cross(dir, b - g->a)) < on_tol &&
                dot(a - g->a, dir) > -on_tol && dot(b - g->a, dir) > -on_tol)
                on_ray = true;
        }
        if (!on_ray) continue;
        const double ra = distance(a, frame.corner), rb = distance(b, frame.corner);
        if (std::min(ra, rb) >= h) continue;
        const Point2 n = normalized(Point2{b.y - a.y, a.x - b.x});
        const auto grad = u.gradient_in_region((a + b) * 0.5, options.inside_region, 1e-9);
        if (!grad) throw Error(ErrorKind::InconsistentGeometry, "ray edge has no triangle inside the inclusion");
        if (ra > h) a = frame.corner + normalized(a - frame.corner) * h;
        if (rb > h) b = frame.corner + normalized(b - frame.corner) * h;
        const double flux = dot(*grad, n);
        for (int half = 0; half < 2; ++half) {
            const Point2 pa = a + (b - a) * (0.5 * half), pb = a + (b - a) * (0.5 * (half + 1));
            const double len = distance(pa, pb);
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const Point2 x = pa + (pb - pa) * rule.nodes[q];
                const cplx u0 = p.eval(x);
                rep.gamma += (k - 1.0) * rule.weights[q] * len * u0 * flux;
                rep.max_u0_decay_ratio =
                    std::max(rep.max_u0_decay_ratio, std::abs(u0) * std::exp(alpha * p.tau() * distance(x, frame.corner)));
                ++rep.nodes;
            }
        }
    }
    rep.lhs = rep.gamma;

    auto arc_term = [&](const Point2& x, const Point2& n, double w, bool inner) {
        const double wv = field_value(u, x) - field_value(up, x);
        const double dw = dot(field_gradient(u, x) - field_gradient(up, x), n);
        const cplx u0 = p.eval(x);
        const cplx val = -w * (wv * p.normal_derivative(x, n) - u0 * dw);
        if (inner) {
            rep.inner += val;
            rep.max_u0_decay_ratio = std::max(rep.max_u0_decay_ratio, std::abs(u0) * std::exp(alpha * p.tau() * h));
        } else {
            rep.outer += val;
            rep.max_u0_outer = std::max(rep.max_u0_outer, std::abs(u0));
        }
        ++rep.nodes;
    };
    const double base = std::atan2(frame.bisector.y, frame.bisector.x);
    std::vector<double> breaks;
    for (double t : {frame.theta_plus, frame.theta_minus}) {
        const double g = base + t;
        if (g > frame.arc_inner.start_angle && g < frame.arc_inner.end_angle) breaks.push_back(g);
    }
    integrate_arc(frame.arc_inner, breaks, max_panel, rule,
                  [&](const Point2& x, const Point2& n, double w) { arc_term(x, n, w, true); });
    integrate_arc(frame.arc_outer, {}, max_panel, rule,
                  [&](const Point2& x, const Point2& n, double w) { arc_term(x, n, w, false); });
    rep.rhs = rep.inner + rep.outer;
    rep.residual = std::abs(rep.lhs - rep.rhs);
    return rep;
}

double decay_fit(const std::vector<std::pair<double, double>>& samples)
{
    if (samples.size() < 4) throw Error(ErrorKind::InvalidArgument, "decay fit needs at least 4 samples");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [tau, f] : samples) {
        if (!(tau > 0.0) || !(f > 0.0)) throw Error(ErrorKind::DomainError, "decay fit needs positive samples");
        lo = std::min(lo, tau);
        hi = std::max(hi, tau);
        const double x = std::log(tau), y = std::log(f);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    if (hi < 10.0 * lo * (1.0 - 1e-12)) throw Error(ErrorKind::InvalidArgument, "decay fit needs a decade of tau");
    const double n = static_cast<double>(samples.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace calderon
