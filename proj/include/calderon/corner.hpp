#pragma once

#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"
#include "calderon/mesh.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

namespace calderon {

/// Leading corner singularity K r^eta phi(theta) at a vertex of opening a with contrast k.
///
/// Angles are measured from the inside bisector. The inside sector |theta| < a/2 carries
/// cos(eta theta + phi_in); the outside sector, with theta unwrapped to (a/2, 2 pi - a/2),
/// carries c_out cos(eta theta + phi_out).
struct SingularExponent {
    double opening_a = M_PI;
    double contrast_k = 1.0;
    double eta = 1.0;
    double phi_in = 0.0;
    double phi_out = 0.0;
    double c_out = 1.0;
    bool symmetric = true;              // kernel is even in theta
    bool multiplicity_warning = false;  // second singular value also negligible
};

/// Closed-form factors of the 4x4 matching determinant; their product is the determinant up to a
/// nonzero constant. first: even modes, second: odd modes.
std::pair<double, double> exponent_factors(double eta, double a, double k);
/// The 4x4 matching matrix with unknowns (A, B, C, E) of
/// A cos(eta t) + B sin(eta t) inside and C cos(eta (t - pi)) + E sin(eta (t - pi)) outside.
Eigen::Matrix4d matching_matrix(double eta, double a, double k);

/// Smallest eta in (0, 1] with a nontrivial angular kernel. Accepts a in (0, 2 pi).
SingularExponent solve_exponent(double a, double k);

double eval_angular(const SingularExponent& se, double theta);
double eval_angular_derivative(const SingularExponent& se, double theta);

struct ExponentBand {
    double eta_min = 1.0;
    double eta_max = 0.0;
    double a_at_min = 0.0, k_at_min = 0.0;
    double a_at_max = 0.0, k_at_max = 0.0;
};

/// Empirical range of eta over a grid of (a, k) in [a_m, a_M] x [k_m, k_M], skipping |k - 1| < 1e-3.
ExponentBand exponent_band(const ClassDParams& params, int na = 41, int nk = 41);

/// Grading map for the mesher: one entry per inclusion vertex with its leading exponent.
std::vector<CornerGrading> corner_grading(const NestedGeometry& geometry);

/// Polar frame at a polygon vertex; theta = 0 along the bisector into the polygon.
struct CornerFrame {
    Point2 corner;
    Point2 bisector;

    static CornerFrame at_vertex(const ConvexPolygon& poly, std::size_t vertex);
    Point2 at(double r, double theta) const;
};

struct CornerFit {
    Point2 corner;
    double K = 0.0;
    double eta = 1.0;
    double residual = 0.0;  // relative least-squares residual
    double r_in = 0.0;
    double r_out = 0.0;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    double mesh_layers = 0.0;  // estimated element layers across the annulus
};

using FieldSampler = std::function<std::optional<double>(const Point2&)>;

/// Least-squares fit of c0 + K r^eta phi(theta) + c1 r cos(theta) + c2 r sin(theta) on a 32 x 64
/// (log r, theta) grid over the annulus.
CornerFit fit_corner_coefficient(const FieldSampler& u, const CornerFrame& frame, const SingularExponent& se,
                                 double r_in, double r_out);

/// As above on a finite-element field; throws FitUnreliable when the annulus spans fewer than
/// 8 element layers and ContourOutsideMesh when a sample leaves the mesh.
CornerFit extract_corner_coefficient(const DiscreteField& u, const CornerFrame& frame, const SingularExponent& se,
                                     double r_in, double r_out);

struct Admissibility {
    bool admissible = false;
    double K = 0.0;
    double threshold = 0.0;
};

Admissibility admissibility_check(const DiscreteField& u, const CornerFrame& frame, const SingularExponent& se,
                                  double threshold, double r_in, double r_out);

/// 1e-4 times the L2 norm of g over the boundary.
double default_admissibility_threshold(const NeumannData& g, const Domain& domain);

}  // namespace calderon
