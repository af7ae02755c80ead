#include "calderon/smallness.hpp"

#include "calderon/error.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace calderon {

namespace {

// Portable uniform draw; std::uniform_real_distribution differs across standard libraries.
double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Point2 on_circle(const Point2& c, double r, double t) { return c + polar(r, t); }

}  // namespace

HarmonicSample::HarmonicSample(Point2 origin, std::vector<double> a, std::vector<double> b, std::vector<Dipole> dipoles,
                               Point2 domain_center, double domain_radius)
    : origin_(origin), a_(std::move(a)), b_(std::move(b)), dipoles_(std::move(dipoles)),
      domain_center_(domain_center), domain_radius_(domain_radius)
{
    if (!(domain_radius_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "domain radius must be positive");
    b_.resize(std::max(a_.size(), b_.size()), 0.0);
    a_.resize(b_.size(), 0.0);
    for (const auto& d : dipoles_)
        if (distance(d.pole, domain_center_) <= domain_radius_)
            throw Error(ErrorKind::InvalidArgument, "dipole pole lies inside the sample's disk");
}

HarmonicSample HarmonicSample::constant(double c, double domain_radius)
{
    return {{0.0, 0.0}, {c}, {0.0}, {}, {0.0, 0.0}, domain_radius};
}

HarmonicSample HarmonicSample::mode(int n, double domain_radius)
{
    if (n < 0) throw Error(ErrorKind::InvalidArgument, "mode index must be non-negative");
    std::vector<double> a(static_cast<std::size_t>(n) + 1, 0.0);
    a.back() = 1.0;
    return {{0.0, 0.0}, a, {}, {}, {0.0, 0.0}, domain_radius};
}

HarmonicSample HarmonicSample::dipole(Point2 pole, double domain_radius)
{
    return {{0.0, 0.0}, {}, {}, {{pole, {1.0, 0.0}}}, {0.0, 0.0}, domain_radius};
}

HarmonicSample HarmonicSample::random(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<double> a(7), b(7);
    for (std::size_t n = 0; n < a.size(); ++n) {
        a[n] = uniform(rng, -1.0, 1.0) / static_cast<double>(n + 1);
        b[n] = n == 0 ? 0.0 : uniform(rng, -1.0, 1.0) / static_cast<double>(n + 1);
    }
    std::vector<Dipole> dip;
    const int count = static_cast<int>(rng() % 3);
    for (int i = 0; i < count; ++i) {
        const Point2 pole = polar(uniform(rng, 1.3, 2.5), uniform(rng, 0.0, 2.0 * M_PI));
        dip.push_back({pole, {uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)}});
    }
    return {{0.0, 0.0}, a, b, dip, {0.0, 0.0}, 1.0};
}

double HarmonicSample::operator()(const Point2& x) const
{
    const std::complex<double> z(x.x - origin_.x, x.y - origin_.y);
    std::complex<double> zn(1.0, 0.0);
    double s = 0.0;
    for (std::size_t n = 0; n < a_.size(); ++n) {
        s += a_[n] * zn.real() + b_[n] * zn.imag();
        zn *= z;
    }
    for (const auto& d : dipoles_) s += (d.strength / std::complex<double>(x.x - d.pole.x, x.y - d.pole.y)).real();
    return s;
}

HarmonicSample HarmonicSample::scaled(double s) const
{
    HarmonicSample out = *this;
    for (auto& v : out.a_) v *= s;
    for (auto& v : out.b_) v *= s;
    for (auto& d : out.dipoles_) d.strength *= s;
    return out;
}

bool HarmonicSample::disk_inside(const Point2& center, double r) const
{
    return distance(center, domain_center_) + r <= domain_radius_ * (1.0 + 1e-14);
}

double HarmonicSample::laplacian_defect(std::uint64_t seed, int count) const
{
    std::mt19937_64 rng(seed);
    const double h = 1e-3 * domain_radius_;
    // fourth-order second differences
    auto d2 = [&](const Point2& x, const Point2& e) {
        return (-(*this)(x + e * (2.0 * h)) + 16.0 * (*this)(x + e * h) - 30.0 * (*this)(x) + 16.0 * (*this)(x - e * h) -
                (*this)(x - e * (2.0 * h))) /
               (12.0 * h * h);
    };
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
        const Point2 x = domain_center_ + polar(uniform(rng, 0.0, 0.9 * domain_radius_), uniform(rng, 0.0, 2.0 * M_PI));
        const double wxx = d2(x, {1.0, 0.0}), wyy = d2(x, {0.0, 1.0});
        const double scale = std::abs(wxx) + std::abs(wyy) + std::abs((*this)(x)) / (domain_radius_ * domain_radius_);
        if (scale > 0.0) worst = std::max(worst, std::abs(wxx + wyy) / scale);
    }
    return worst;
}

double sampled_sup_norm(const ScalarField& w, const Point2& center, double r, int n)
{
    double m = 0.0;
    for (int j = 0; j < n; ++j) m = std::max(m, std::abs(w(on_circle(center, r, 2.0 * M_PI * j / n))));
    return m;
}

double disk_sup_norm(const ScalarField& w, const Point2& center, double r)
{
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "disk radius must be positive");
    double prev = -1.0;
    for (int n = 2048; n <= (1 << 20); n *= 2) {
        const double step = 2.0 * M_PI / n;
        double best = -1.0;
        int arg = 0;
        for (int j = 0; j < n; ++j) {
            const double v = std::abs(w(on_circle(center, r, step * j)));
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        const auto neg = [&](double t) { return -std::abs(w(on_circle(center, r, t))); };
        const auto polished = boost::math::tools::brent_find_minima(neg, step * (arg - 1), step * (arg + 1), 52);
        const double m = std::max(best, -polished.second);
        if (prev >= 0.0 && std::abs(m - prev) <= 1e-8 * std::max(m, 1e-300)) return m;
        if (m == 0.0 && prev == 0.0) return 0.0;
        prev = m;
    }
    return prev;
}

bool ThreeSphere::holds(double alpha) const
{
    if (M1 >= M4) return M2 <= M4 * (1.0 + 1e-12);
    return M2 <= std::pow(M4, 1.0 - alpha) * std::pow(M1, alpha) * (1.0 + 1e-12);
}

ThreeSphere three_sphere_check(const ScalarField& w, const Point2& center, double r)
{
    ThreeSphere s;
    s.M1 = disk_sup_norm(w, center, r);
    s.M2 = disk_sup_norm(w, center, 2.0 * r);
    s.M4 = disk_sup_norm(w, center, 4.0 * r);
    if (s.M4 == 0.0) throw Error(ErrorKind::DomainError, "w vanishes on B_4r; the three-sphere exponent is undefined");
    if (s.M1 >= s.M4) {
        s.alpha_star = 1.0;
        return s;
    }
    s.alpha_star = std::clamp(std::log(s.M4 / s.M2) / std::log(s.M4 / s.M1), 0.0, 1.0);
    return s;
}

ThreeSphere three_sphere_check(const HarmonicSample& w, const Point2& center, double r)
{
    if (!w.disk_inside(center, 4.0 * r)) throw Error(ErrorKind::Precondition, "B_4r leaves the sample's disk");
    return three_sphere_check(ScalarField(w), center, r);
}

DiskChain DiskChain::along(std::vector<Point2> curve, double r)
{
    if (curve.size() < 2) throw Error(ErrorKind::InvalidArgument, "chain curve needs two points");
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "chain radius must be positive");
    DiskChain c;
    c.curve = std::move(curve);
    c.r = r;
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < c.curve.size(); ++i) cum.push_back(cum.back() + distance(c.curve[i - 1], c.curve[i]));
    c.length = cum.back();
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(c.length / r)));
    std::size_t seg = 0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double s = c.length * static_cast<double>(k) / static_cast<double>(n);
        while (seg + 2 < cum.size() && cum[seg + 1] < s) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
        c.centers.push_back(c.curve[seg] + (c.curve[seg + 1] - c.curve[seg]) * t);
    }
    return c;
}

double chain_alpha(const HarmonicSample& w, const DiskChain& chain)
{
    double a = 1.0;
    for (const auto& c : chain.centers) a = std::min(a, three_sphere_check(w, c, chain.r).alpha_star);
    return a;
}

ChainResult chain_propagation(const HarmonicSample& w, const DiskChain& chain, double alpha_tilde, double T)
{
    if (!(alpha_tilde > 0.0 && alpha_tilde <= 1.0)) throw Error(ErrorKind::Precondition, "alpha must lie in (0, 1]");
    if (!(T >= 1.0)) throw Error(ErrorKind::Precondition, "T must be at least 1");
    for (const auto& c : chain.centers)
        if (!w.disk_inside(c, 4.0 * chain.r)) throw Error(ErrorKind::Precondition, "a 4r disk of the chain leaves the domain");
    for (std::size_t k = 1; k < chain.centers.size(); ++k)
        if (distance(chain.centers[k - 1], chain.centers[k]) > chain.r * (1.0 + 1e-12))
            throw Error(ErrorKind::Precondition, "consecutive chain centers farther apart than r");
    const ScalarField f(w);
    if (disk_sup_norm(f, chain.centers.front(), 4.0 * chain.r) > 1.0)
        throw Error(ErrorKind::Precondition, "||w|| exceeds 1 on B_4r of the start");
    if (disk_sup_norm(f, w.domain_center(), w.domain_radius()) > T * (1.0 + 1e-12))
        throw Error(ErrorKind::Precondition, "T is below the sup of w over the domain");
    for (const auto& c : chain.centers)
        if (three_sphere_check(w, c, chain.r).alpha_star < alpha_tilde * (1.0 - 1e-12))
            throw Error(ErrorKind::Precondition, "alpha exceeds the three-sphere exponent at a chain center");

    ChainResult out;
    out.start_norm = disk_sup_norm(f, chain.centers.front(), chain.r);
    out.observed = disk_sup_norm(f, chain.centers.back(), chain.r);
    out.exponent = std::pow(alpha_tilde, chain.length / chain.r + 1.0);
    out.bound = T * std::pow(out.start_norm, out.exponent);
    out.slack = out.bound - out.observed;
    out.holds = out.observed <= out.bound * (1.0 + 1e-12);
    return out;
}

ChainCorpusRow run_chain_sample(std::uint64_t seed)
{
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    ChainCorpusRow row;
    row.seed = seed;
    row.r = uniform(rng, 0.04, 0.08);
    const double reach = 1.0 - 4.0 * row.r - 0.02;
    std::vector<Point2> curve;
    for (int i = 0; i < 3; ++i) curve.push_back(polar(reach * std::sqrt(uniform(rng, 0.0, 1.0)), uniform(rng, 0.0, 2.0 * M_PI)));
    const Point2 probe = polar(reach * std::sqrt(uniform(rng, 0.0, 1.0)), uniform(rng, 0.0, 2.0 * M_PI));

    HarmonicSample w = HarmonicSample::random(seed);
    const DiskChain chain = DiskChain::along(curve, row.r);
    const double start = disk_sup_norm(ScalarField(w), chain.centers.front(), 4.0 * row.r);
    if (start > 0.0) w = w.scaled(0.5 / start);

    row.sphere = three_sphere_check(w, probe, row.r);
    row.sphere_holds = row.sphere.holds(row.sphere.alpha_star) && row.sphere.alpha_star > 0.0 && row.sphere.alpha_star <= 1.0;
    row.alpha = chain_alpha(w, chain);
    const double T = std::max(1.0, disk_sup_norm(ScalarField(w), w.domain_center(), w.domain_radius()));
    row.chain = chain_propagation(w, chain, row.alpha, T);
    return row;
}

// ---------------------------------------------------------------------------
// Exterior sets

std::vector<Point2> offset_outline(const ConvexPolygon& q, double r)
{
    std::vector<Point2> out;
    const double step = 2.0 * M_PI / 16.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const Point2 v = q.vertex(i);
        const Point2 din = normalized(v - q.prev(i)), dout = normalized(q.next(i) - v);
        const double t0 = std::atan2(-din.x, din.y), t1raw = std::atan2(-dout.x, dout.y);
        double t1 = t1raw;
        while (t1 < t0) t1 += 2.0 * M_PI;
        const int pieces = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step - 1e-12)));
        for (int k = 0; k <= pieces; ++k) out.push_back(v + polar(r, t0 + (t1 - t0) * k / pieces));
    }
    return out;
}

double exterior_distance(const Domain& domain, const ConvexPolygon& q, const Point2& x)
{
    if (!domain.contains(x)) return 0.0;
    return std::min(domain.boundary_distance(x), q.distance(x));
}

namespace {

std::vector<Point2> inner_offset(const Domain& domain, double r, double spacing)
{
    if (domain.is_disk()) {
        const double rad = domain.radius() - r;
        if (!(rad > 0.0)) return {};
        const int n = std::max(16, static_cast<int>(std::ceil(2.0 * M_PI * rad / spacing)));
        std::vector<Point2> pts;
        for (int j = 0; j < n; ++j) pts.push_back(on_circle(domain.center(), rad, 2.0 * M_PI * j / n));
        return pts;
    }
    // Clip the polygon by every edge line shifted inward by r.
    const ConvexPolygon& p = domain.as_polygon();
    std::vector<Point2> poly(p.vertices().begin(), p.vertices().end());
    for (std::size_t i = 0; i < p.size() && !poly.empty(); ++i) {
        const Point2 a = p.vertex(i), d = normalized(p.next(i) - a);
        const Point2 inward = rotate90(d);
        auto side = [&](const Point2& x) { return dot(x - a, inward) - r; };
        std::vector<Point2> next;
        for (std::size_t j = 0; j < poly.size(); ++j) {
            const Point2 s = poly[j], e = poly[(j + 1) % poly.size()];
            const double fs = side(s), fe = side(e);
            if (fs >= 0.0) next.push_back(s);
            if ((fs >= 0.0) != (fe >= 0.0)) next.push_back(s + (e - s) * (fs / (fs - fe)));
        }
        poly = std::move(next);
    }
    return poly;
}

void resample_closed(const std::vector<Point2>& poly, double spacing, std::vector<Point2>& out,
                     const std::function<bool(const Point2&)>& keep)
{
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2 a = poly[i], b = poly[(i + 1) % poly.size()];
        const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / spacing)));
        for (int k = 0; k < n; ++k) {
            const Point2 x = a + (b - a) * (static_cast<double>(k) / n);
            if (keep(x)) out.push_back(x);
        }
    }
}

}  // namespace

std::vector<Point2> g_r_boundary(const Domain& domain, const ConvexPolygon& q, double r, double spacing)
{
    if (!(r > 0.0 && spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "offset and spacing must be positive");
    std::vector<Point2> out;
    const double tol = 1e-9 * r;
    resample_closed(inner_offset(domain, r, spacing), spacing, out, [&](const Point2& x) { return q.distance(x) >= r - tol; });
    // The 16-gon chords dip inside the true offset by at most r (1 - cos(pi / 16)).
    resample_closed(offset_outline(q, r), spacing, out,
                    [&](const Point2& x) { return domain.contains(x) && domain.boundary_distance(x) >= r - tol; });
    return out;
}

// ---------------------------------------------------------------------------
// Propagation experiment

namespace {

struct Difference {
    const DiscreteField& u;
    const DiscreteField& up;

    double value(const Point2& x) const
    {
        const auto a = u.eval(x, 1e-9), b = up.eval(x, 1e-9);
        if (!a || !b) throw Error(ErrorKind::ContourOutsideMesh, "sample point outside the mesh");
        return *a - *b;
    }
    Point2 gradient(const Point2& x) const
    {
        const auto ha = u.locator().locate(x, 1e-9), hb = up.locator().locate(x, 1e-9);
        if (!ha || !hb) throw Error(ErrorKind::ContourOutsideMesh, "sample point outside the mesh");
        return u.gradient(static_cast<std::size_t>(ha->triangle)) - up.gradient(static_cast<std::size_t>(hb->triangle));
    }
};

double max_sagitta(const Mesh& m, const Domain& domain)
{
    if (!domain.is_disk()) return 0.0;
    double s = 0.0;
    for (const auto& e : m.boundary_edges)
        if (e.tag == kOuterBoundary) {
            const double len = distance(m.nodes[e.nodes[0]], m.nodes[e.nodes[1]]);
            s = std::max(s, len * len / (8.0 * domain.radius()));
        }
    return s;
}

Point2 outward_normal(const Domain& domain, const Point2& p)
{
    if (domain.is_disk()) return normalized(p - domain.center());
    const ConvexPolygon& poly = domain.as_polygon();
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const double d = segment_distance(p, poly.vertex(i), poly.next(i));
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return -rotate90(normalized(poly.next(best) - poly.vertex(best)));
}

}  // namespace

PropagationReport propagation_experiment(const DiscreteField& u, const DiscreteField& up, const PropagationSetup& setup)
{
    const Domain& dom = setup.domain;
    const Difference w{u, up};
    PropagationReport rep;

    // Smallness on gamma0: traces along the boundary chain, normal derivatives just inside.
    const BoundaryFunction tr = trace_difference(u, up, setup.gamma0, dom);
    double sup_w = 0.0;
    for (double f : tr.f) sup_w = std::max(sup_w, std::abs(f));
    const double pull = 2.0 * std::max(max_sagitta(u.mesh(), dom), max_sagitta(up.mesh(), dom)) + 1e-9;
    double sup_dn = 0.0;
    for (std::size_t i = 0; i < tr.theta.size(); ++i) {
        const Point2 p = dom.boundary_point(tr.theta[i]);
        const Point2 n = outward_normal(dom, p);
        sup_dn = std::max(sup_dn, std::abs(dot(w.gradient(p - n * pull), n)));
    }
    rep.epsilon = sup_w + sup_dn;
    if (!(rep.epsilon < 1.0)) throw Error(ErrorKind::Precondition, "w is not small on gamma0 (epsilon >= 1)");

    // Half disk of radius r0/2 at the midpoint of gamma0; the ball sits inside it.
    const double mid = setup.gamma0.closed() ? setup.gamma0.theta0 : 0.5 * (setup.gamma0.theta0 + setup.gamma0.theta1);
    const Point2 P = dom.boundary_point(mid);
    const Point2 nP = outward_normal(dom, P);
    const double rho0 = 0.2 * setup.r0;
    rep.x0 = P - nP * (0.25 * setup.r0);
    if (setup.hull.distance(rep.x0) <= rho0) throw Error(ErrorKind::Precondition, "the smallness ball meets the hull");
    const ScalarField wf = [&w](const Point2& x) { return w.value(x); };
    rep.epsilon_ball = disk_sup_norm(wf, rep.x0, rho0);

    rep.r_m = 0.5 * dom.clearance(setup.hull);
    rep.r = setup.r > 0.0 ? setup.r : 0.9 * std::min(rho0, rep.r_m) / 5.0;
    if (!(rep.r < std::min(rho0, rep.r_m) / 5.0)) throw Error(ErrorKind::Precondition, "r must be below min(r0, r_m) / 5");
    rep.perimeter = dom.perimeter() + setup.hull.perimeter();
    const double spacing = setup.spacing > 0.0 ? setup.spacing : rep.r / 8.0;

    for (const auto& x : g_r_boundary(dom, setup.hull, rep.r, spacing)) rep.T_r = std::max(rep.T_r, std::abs(w.value(x)));
    rep.T = std::max(rep.T_r, 1.0);
    const auto g5 = g_r_boundary(dom, setup.hull, 5.0 * rep.r, spacing);
    for (const auto& x : g5) rep.sup_g5r = std::max(rep.sup_g5r, std::abs(w.value(x)));

    // w == 0 leaves alpha* undefined; every bound is then trivially met with alpha = 1
    const bool vanishes = rep.epsilon == 0.0 && rep.epsilon_ball == 0.0 && rep.T_r == 0.0 && rep.sup_g5r == 0.0;
    if (!vanishes) {
        rep.alpha_tilde = three_sphere_check(wf, rep.x0, rep.r).alpha_star;
        const std::size_t stride = std::max<std::size_t>(1, g5.size() / 48);
        for (std::size_t i = 0; i < g5.size(); i += stride)
            rep.alpha_tilde = std::min(rep.alpha_tilde, three_sphere_check(wf, g5[i], rep.r).alpha_star);
    }

    const double eps = std::max(rep.epsilon_ball, 1e-300);
    rep.chain_exponent = std::pow(rep.alpha_tilde, rep.perimeter / rep.r + 1.0);
    rep.bound_stated = rep.T_r * std::pow(eps, rep.chain_exponent);
    rep.bound_homogeneous = std::pow(rep.T_r, 1.0 - rep.chain_exponent) * std::pow(eps, rep.chain_exponent);
    rep.T_r_at_least_one = rep.T_r >= 1.0;
    rep.stated_holds = rep.sup_g5r <= rep.bound_stated * (1.0 + 1e-12);
    rep.homogeneous_holds = rep.sup_g5r <= rep.bound_homogeneous * (1.0 + 1e-12);

    rep.regime_log_threshold = 5.0 * rep.perimeter * std::abs(std::log(rep.alpha_tilde)) /
                               ((1.0 - setup.alpha) * std::min({rho0, rep.r_m, setup.delta0}));
    const double lnln = std::log(std::abs(std::log(rep.epsilon)));
    rep.in_regime = lnln > rep.regime_log_threshold;

    // Rays from the corner through the exterior cone of the hull.
    const auto vi = setup.hull.find_vertex(setup.corner, 1e-9);
    if (!vi) throw Error(ErrorKind::InvalidArgument, "corner is not a vertex of the hull");
    const Point2 c = setup.corner;
    const double t_prev = std::atan2((setup.hull.prev(*vi) - c).y, (setup.hull.prev(*vi) - c).x);
    const double ext = 2.0 * M_PI - setup.hull.angle(*vi);
    double env0 = 0.0, env1 = 0.0;
    for (int j = 0; j < setup.rays; ++j) {
        const Point2 d = polar(1.0, t_prev + ext * (j + 1.0) / (setup.rays + 1.0));
        for (int i = 0; i < setup.samples_per_ray; ++i) {
            const Point2 x = c + d * (setup.delta0 * (i + 1.0) / setup.samples_per_ray);
            if (!dom.contains(x)) break;
            env0 = std::max(env0, std::abs(w.value(x)));
            env1 = std::max(env1, norm(w.gradient(x)) * setup.hull.distance(x));
        }
    }
    const double rate = lnln > 0.0 ? std::pow(lnln, -setup.alpha) : std::numeric_limits<double>::infinity();
    for (int P = 0; P < 2; ++P) {
        const double e = P == 0 ? env0 : env1;
        rep.envelope.push_back({P, e, rate, e == 0.0 ? 0.0 : e / (rep.T * rate)});
    }
    return rep;
}

}  // namespace calderon
