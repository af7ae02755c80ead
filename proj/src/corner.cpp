#include "calderon/corner.hpp"

#include "calderon/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace calderon {

std::pair<double, double> exponent_factors(double eta, double a, double k)
{
    const double c1 = std::cos(eta * a / 2.0), s1 = std::sin(eta * a / 2.0);
    const double beta = eta * (M_PI - a / 2.0);
    const double cb = std::cos(beta), sb = std::sin(beta);
    return {c1 * sb + k * s1 * cb, s1 * cb + k * c1 * sb};
}

Eigen::Matrix4d matching_matrix(double eta, double a, double k)
{
    const double c1 = std::cos(eta * a / 2.0), s1 = std::sin(eta * a / 2.0);
    const double beta = eta * (M_PI - a / 2.0);
    const double cb = std::cos(beta), sb = std::sin(beta);
    Eigen::Matrix4d m;
    // continuity at +a/2 and -a/2, then the weighted normal derivative at +a/2 and -a/2
    m << c1, s1, -cb, sb,
         c1, -s1, -cb, -sb,
         k * s1, -k * c1, sb, cb,
         -k * s1, -k * c1, -sb, cb;
    return m;
}

namespace {

double wrap_pi(double x)
{
    x = std::fmod(x + M_PI, 2.0 * M_PI);
    if (x <= 0.0) x += 2.0 * M_PI;
    return x - M_PI;
}

// Converts a kernel vector (A, B, C, E) into the phase form with unit inside amplitude.
void set_phases(SingularExponent& se, Eigen::Vector4d v)
{
    const double amp = std::hypot(v[0], v[1]);
    if (!(amp > 0.0)) throw Error(ErrorKind::DomainError, "angular kernel vanishes on the inside sector");
    double phi_in = -std::atan2(v[1], v[0]);
    if (phi_in < -M_PI / 2.0 || phi_in >= M_PI / 2.0) {
        v = -v;
        phi_in = -std::atan2(v[1], v[0]);
    }
    se.phi_in = phi_in;
    se.c_out = std::hypot(v[2], v[3]) / amp;
    se.phi_out = wrap_pi(-se.eta * M_PI - std::atan2(v[3], v[2]));
}

double bisect(const std::function<double(double)>& f, double lo, double hi)
{
    double flo = f(lo);
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

SingularExponent solve_exponent(double a, double k)
{
    if (!(a > 0.0 && a < 2.0 * M_PI)) throw Error(ErrorKind::DomainError, "opening must lie in (0, 2 pi)");
    if (!(k > 0.0)) throw Error(ErrorKind::DomainError, "contrast must be positive");

    SingularExponent se;
    se.opening_a = a;
    se.contrast_k = k;
    if (k == 1.0 || a == M_PI) {
        se.eta = 1.0;
        se.symmetric = true;
        set_phases(se, Eigen::Vector4d(1.0, 0.0, -k, 0.0));
        return se;
    }

    const double step = 1e-3, start = 1e-6;
    double best = 2.0;
    bool best_symmetric = true;
    for (int which = 0; which < 2; ++which) {
        auto f = [&](double eta) {
            const auto fs = exponent_factors(eta, a, k);
            return which == 0 ? fs.first : fs.second;
        };
        double prev_eta = start, prev = f(start);
        for (int i = 1;; ++i) {
            const double eta = std::min(1.0, start + i * step);
            const double v = f(eta);
            if (v == 0.0 || (v < 0.0) != (prev < 0.0)) {
                const double root = v == 0.0 ? eta : bisect(f, prev_eta, eta);
                if (root < best) {
                    best = root;
                    best_symmetric = which == 0;
                }
                break;
            }
            if (eta >= 1.0) break;
            prev_eta = eta;
            prev = v;
        }
    }
    if (best > 1.0) {
        se.eta = 1.0;
        set_phases(se, Eigen::Vector4d(1.0, 0.0, -k, 0.0));
        return se;
    }

    se.eta = best;
    se.symmetric = best_symmetric;
    const Eigen::JacobiSVD<Eigen::Matrix4d> svd(matching_matrix(best, a, k), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    se.multiplicity_warning = sv[2] < 1e-8 * sv[0];
    Eigen::Vector4d v = svd.matrixV().col(3);
    // Clean the components the parity forbids.
    if (best_symmetric) {
        v[1] = 0.0;
        v[3] = 0.0;
    } else {
        v[0] = 0.0;
        v[2] = 0.0;
    }
    set_phases(se, v);
    return se;
}

double eval_angular(const SingularExponent& se, double theta)
{
    theta = wrap_pi(theta);
    if (std::abs(theta) <= se.opening_a / 2.0) return std::cos(se.eta * theta + se.phi_in);
    const double t = theta < 0.0 ? theta + 2.0 * M_PI : theta;
    return se.c_out * std::cos(se.eta * t + se.phi_out);
}

double eval_angular_derivative(const SingularExponent& se, double theta)
{
    theta = wrap_pi(theta);
    if (std::abs(theta) <= se.opening_a / 2.0) return -se.eta * std::sin(se.eta * theta + se.phi_in);
    const double t = theta < 0.0 ? theta + 2.0 * M_PI : theta;
    return -se.c_out * se.eta * std::sin(se.eta * t + se.phi_out);
}

ExponentBand exponent_band(const ClassDParams& params, int na, int nk)
{
    params.validate();
    ExponentBand band;
    for (int i = 0; i < na; ++i) {
        const double a = params.a_m + (params.a_M - params.a_m) * i / std::max(1, na - 1);
        for (int j = 0; j < nk; ++j) {
            const double k = params.k_m + (params.k_M - params.k_m) * j / std::max(1, nk - 1);
            if (std::abs(k - 1.0) < 1e-3) continue;
            const double eta = solve_exponent(a, k).eta;
            if (eta < band.eta_min) band = {eta, band.eta_max, a, k, band.a_at_max, band.k_at_max};
            if (eta > band.eta_max) {
                band.eta_max = eta;
                band.a_at_max = a;
                band.k_at_max = k;
            }
        }
    }
    return band;
}

std::vector<CornerGrading> corner_grading(const NestedGeometry& geometry)
{
    std::vector<CornerGrading> out;
    for (std::size_t j = 0; j < geometry.size(); ++j) {
        const auto& layer = geometry.layer(j);
        const double k_out = j == 0 ? 1.0 : geometry.layer(j - 1).k;
        for (std::size_t i = 0; i < layer.polygon.size(); ++i)
            out.push_back({layer.polygon.vertex(i), solve_exponent(layer.polygon.angle(i), layer.k / k_out).eta});
    }
    return out;
}

CornerFrame CornerFrame::at_vertex(const ConvexPolygon& poly, std::size_t vertex)
{
    const Point2 v = poly.vertex(vertex);
    return {v, normalized(normalized(poly.prev(vertex) - v) + normalized(poly.next(vertex) - v))};
}

Point2 CornerFrame::at(double r, double theta) const
{
    const double c = std::cos(theta), s = std::sin(theta);
    return corner + Point2{bisector.x * c - bisector.y * s, bisector.x * s + bisector.y * c} * r;
}

namespace {

constexpr int kRadial = 32;
constexpr int kAngular = 64;

double sample_radius(double r_in, double r_out, int i)
{
    return r_in * std::pow(r_out / r_in, (i + 0.5) / kRadial);
}

double sample_angle(int j) { return -M_PI + 2.0 * M_PI * (j + 0.5) / kAngular; }

}  // namespace

CornerFit fit_corner_coefficient(const FieldSampler& u, const CornerFrame& frame, const SingularExponent& se,
                                 double r_in, double r_out)
{
    if (!(r_in > 0.0 && r_out > r_in)) throw Error(ErrorKind::InvalidArgument, "annulus needs 0 < r_in < r_out");
    const int rows = kRadial * kAngular;
    Eigen::MatrixXd a(rows, 4);
    Eigen::VectorXd b(rows);
    for (int i = 0; i < kRadial; ++i) {
        const double r = sample_radius(r_in, r_out, i);
        for (int j = 0; j < kAngular; ++j) {
            const double th = sample_angle(j);
            const auto v = u(frame.at(r, th));
            if (!v) throw Error(ErrorKind::ContourOutsideMesh, "annulus sample lies outside the field's support");
            const int row = i * kAngular + j;
            a.row(row) << 1.0, std::pow(r, se.eta) * eval_angular(se, th), r * std::cos(th), r * std::sin(th);
            b[row] = *v;
        }
    }
    // Column scaling keeps the normal equations out of the picture; QR on the scaled system.
    Eigen::Vector4d scale;
    for (int c = 0; c < 4; ++c) {
        scale[c] = a.col(c).norm();
        if (scale[c] == 0.0) scale[c] = 1.0;
        a.col(c) /= scale[c];
    }
    const Eigen::Vector4d x = a.colPivHouseholderQr().solve(b);
    CornerFit fit;
    fit.corner = frame.corner;
    fit.eta = se.eta;
    fit.r_in = r_in;
    fit.r_out = r_out;
    fit.c0 = x[0] / scale[0];
    fit.K = x[1] / scale[1];
    fit.c1 = x[2] / scale[2];
    fit.c2 = x[3] / scale[3];
    const double bn = b.norm();
    fit.residual = bn > 0.0 ? (a * x - b).norm() / bn : 0.0;
    return fit;
}

CornerFit extract_corner_coefficient(const DiscreteField& u, const CornerFrame& frame, const SingularExponent& se,
                                     double r_in, double r_out)
{
    if (!(r_in > 0.0 && r_out > r_in)) throw Error(ErrorKind::InvalidArgument, "annulus needs 0 < r_in < r_out");
    const Mesh& m = u.mesh();
    double layers = 0.0;
    for (int i = 0; i < kRadial; ++i) {
        const double lo = r_in * std::pow(r_out / r_in, static_cast<double>(i) / kRadial);
        const double hi = r_in * std::pow(r_out / r_in, static_cast<double>(i + 1) / kRadial);
        const double r = sample_radius(r_in, r_out, i);
        double hsum = 0.0;
        int count = 0;
        for (int j = 0; j < kAngular; j += 4) {
            const auto hit = u.locator().locate(frame.at(r, sample_angle(j)));
            if (!hit) throw Error(ErrorKind::ContourOutsideMesh, "annulus sample lies outside the mesh");
            hsum += m.diameter(static_cast<std::size_t>(hit->triangle));
            ++count;
        }
        layers += (hi - lo) / (hsum / count);
    }
    if (layers < 8.0) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "annulus spans only %.2f element layers (need 8)", layers);
        throw Error(ErrorKind::FitUnreliable, buf);
    }
    CornerFit fit = fit_corner_coefficient([&u](const Point2& p) { return u.eval(p); }, frame, se, r_in, r_out);
    fit.mesh_layers = layers;
    return fit;
}

Admissibility admissibility_check(const DiscreteField& u, const CornerFrame& frame, const SingularExponent& se,
                                  double threshold, double r_in, double r_out)
{
    const CornerFit fit = extract_corner_coefficient(u, frame, se, r_in, r_out);
    return {std::abs(fit.K) >= threshold, fit.K, threshold};
}

double default_admissibility_threshold(const NeumannData& g, const Domain& domain)
{
    return 1e-4 * g.boundary_l2_norm(domain);
}

}  // namespace calderon
