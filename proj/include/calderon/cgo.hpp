#pragma once

#include "calderon/corner.hpp"
#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"

#include <array>
#include <complex>
#include <utility>
#include <vector>

namespace calderon {

using cplx = std::complex<double>;

/// Harmonic exponential u0(x) = exp(rho . (x - x_c)) with rho = tau (-xhat + i yhat), where xhat
/// is the frame axis and yhat its +90 degree rotation.
class CgoProbe {
public:
    CgoProbe(Point2 corner, Point2 axis, double tau);
    static CgoProbe from_frame(const SectorFrame& frame) { return {frame.corner, frame.bisector, frame.tau}; }

    cplx eval(const Point2& x) const;
    std::array<cplx, 2> grad(const Point2& x) const;
    /// Normal derivative rho . n u0.
    cplx normal_derivative(const Point2& x, const Point2& n) const;
    cplx rho_dot_rho() const { return rho_[0] * rho_[0] + rho_[1] * rho_[1]; }

    const Point2& corner() const { return corner_; }
    const Point2& axis() const { return axis_; }
    double tau() const { return tau_; }
    const std::array<cplx, 2>& rho() const { return rho_; }

private:
    Point2 corner_;
    Point2 axis_;
    double tau_;
    std::array<cplx, 2> rho_;
};

/// Upper incomplete gamma function for s in (0, 5] and x >= 0.
double incomplete_gamma(double s, double x);

/// Integral of r^(eta-1) exp(z0 r) over (0, inf), equal to (-1/z0)^eta Gamma(eta) for Re z0 < 0.
cplx laplace_integral(cplx z0, double eta);

struct RayIntegral {
    cplx value;
    double lower_bound = 0.0;  // K Gamma(eta) sin(a eta) tau^-eta
    double sharp = 0.0;        // K Gamma(eta) eta sin(a eta) tau^-eta, the exact modulus
    bool meets_lower_bound = false;
};

/// K (phi'(a/2) I(Z(theta+)) - phi'(-a/2) I(Z(theta-))) with Z(theta) = -tau exp(-i theta); the ray
/// angles are measured in the probe frame, phi' is taken on the inside of the corner.
RayIntegral corner_ray_integral(const SingularExponent& se, double K, const CgoProbe& p, double theta_plus,
                                double theta_minus);
double lower_bound(const SingularExponent& se, double K, double tau);

struct IdentityOptions {
    int order = 8;             // Gauss points per panel
    double max_panel = 0.0;    // 0 picks half the smallest element diameter met along the contours
    int inside_region = 1;     // region tag of D in the mesh of u
};

struct IdentityReport {
    cplx lhs;
    cplx rhs;
    double residual = 0.0;
    cplx gamma;       // lhs itself, the contribution of the two rays
    cplx inner;       // inner arc
    cplx outer;       // outer arc
    double tau = 0.0;
    double max_panel = 0.0;
    std::size_t nodes = 0;
    double max_u0_outer = 0.0;          // max |u0| on the outer arc
    double max_u0_decay_ratio = 0.0;    // max |u0| exp(alpha' tau r) on the rays and the inner arc
    double relative_residual() const { return residual / std::max(std::abs(lhs), 1e-300); }
};

/// Both sides of (k - 1) int_rays u0 d_n u = -oint_{dS} (w d_n u0 - u0 d_n w), w = u - up, with the
/// ray flux taken inside D and n the outward normal of D on the rays and of the contour region on
/// the arcs.
IdentityReport contour_identity(const DiscreteField& u, const DiscreteField& up, double k, const SectorFrame& frame,
                                const CgoProbe& p, const IdentityOptions& options = {});

/// Least-squares slope of log |f| against log tau.
double decay_fit(const std::vector<std::pair<double, double>>& samples);

}  // namespace calderon
