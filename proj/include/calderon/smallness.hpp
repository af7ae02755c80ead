#pragma once

#include "calderon/boundary.hpp"
#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace calderon {

using ScalarField = std::function<double(const Point2&)>;

/// Closed-form harmonic function on a disk: a polynomial part sum r^n (a_n cos n t + b_n sin n t)
/// about `origin`, plus dipoles Re(c / (z - z0)) with poles outside the disk.
class HarmonicSample {
public:
    struct Dipole {
        Point2 pole;
        std::complex<double> strength;
    };

    HarmonicSample(Point2 origin, std::vector<double> a, std::vector<double> b, std::vector<Dipole> dipoles,
                   Point2 domain_center, double domain_radius);

    static HarmonicSample constant(double c, double domain_radius = 1.0);
    /// r^n cos(n t) about the origin.
    static HarmonicSample mode(int n, double domain_radius = 1.0);
    /// Re 1/(z - z0).
    static HarmonicSample dipole(Point2 pole, double domain_radius = 1.0);
    /// Random modes up to degree 6 and up to two dipoles outside the unit disk.
    static HarmonicSample random(std::uint64_t seed);

    double operator()(const Point2& x) const;
    HarmonicSample scaled(double s) const;

    Point2 domain_center() const { return domain_center_; }
    double domain_radius() const { return domain_radius_; }
    bool disk_inside(const Point2& center, double r) const;
    /// Largest finite-difference Laplacian over `count` random points of the disk, relative to
    /// |w_xx| + |w_yy| + |w| / R^2.
    double laplacian_defect(std::uint64_t seed, int count = 10) const;

private:
    Point2 origin_;
    std::vector<double> a_, b_;
    std::vector<Dipole> dipoles_;
    Point2 domain_center_;
    double domain_radius_;
};

/// Max of |w| over the closed disk, read off the boundary circle. Starts at 2048 nodes, polishes
/// the best node with Brent, and doubles until the value moves less than 1e-8 (relative).
double disk_sup_norm(const ScalarField& w, const Point2& center, double r);
/// Plain max of |w| over n equispaced boundary nodes.
double sampled_sup_norm(const ScalarField& w, const Point2& center, double r, int n);

struct ThreeSphere {
    double M1 = 0.0, M2 = 0.0, M4 = 0.0;
    double alpha_star = 1.0;
    /// M2 <= M4^(1 - a) M1^a for a given exponent, with a relative slack of 1e-12.
    bool holds(double alpha) const;
};

/// Sup norms on B_r, B_2r, B_4r and alpha* = log(M4/M2) / log(M4/M1) (1 when M1 >= M4).
ThreeSphere three_sphere_check(const ScalarField& w, const Point2& center, double r);
/// As above; also checks that B_4r lies inside the sample's disk.
ThreeSphere three_sphere_check(const HarmonicSample& w, const Point2& center, double r);

/// Centers x_1 .. x_{N+1} along a polyline, N = ceil(length / r), equally spaced in arc length.
struct DiskChain {
    std::vector<Point2> curve;
    double r = 0.0;
    double length = 0.0;
    std::vector<Point2> centers;

    static DiskChain along(std::vector<Point2> curve, double r);
    std::size_t steps() const { return centers.size() - 1; }
};

struct ChainResult {
    double start_norm = 0.0;  // ||w|| on B_r(start)
    double observed = 0.0;    // ||w|| on B_r(end)
    double bound = 0.0;       // T start_norm^(alpha^(d/r + 1))
    double exponent = 0.0;    // alpha^(d/r + 1)
    double slack = 0.0;       // bound - observed
    bool holds = false;
};

/// Chain-of-disks estimate. Preconditions (||w|| <= 1 on B_4r(start), T >= 1 and T at least the
/// sup of w over the sample's disk, alpha no larger than alpha* at every center, every 4r disk
/// inside the sample's disk) throw Precondition when violated.
ChainResult chain_propagation(const HarmonicSample& w, const DiskChain& chain, double alpha_tilde, double T);

/// Smallest alpha* over the chain centers.
double chain_alpha(const HarmonicSample& w, const DiskChain& chain);

struct ChainCorpusRow {
    std::uint64_t seed = 0;
    double r = 0.0;
    ThreeSphere sphere;     // at a random center
    bool sphere_holds = false;
    ChainResult chain;
    double alpha = 0.0;
};

/// One random sample, three-sphere check at a random center, chain along a random polyline.
ChainCorpusRow run_chain_sample(std::uint64_t seed);

/// Boundary of G_r for the exterior Omega' = Omega \ Q: points at distance exactly r from the
/// outer boundary or from Q that lie no closer than r to the other. Corner arcs of the offset
/// of Q follow a 16-gon.
std::vector<Point2> offset_outline(const ConvexPolygon& q, double r);
std::vector<Point2> g_r_boundary(const Domain& domain, const ConvexPolygon& q, double r, double spacing);
double exterior_distance(const Domain& domain, const ConvexPolygon& q, const Point2& x);

struct PropagationSetup {
    Domain domain = Domain::disk({0.0, 0.0}, 1.0);
    ConvexPolygon hull = ConvexPolygon::rectangle({-0.1, -0.1}, {0.1, 0.1});
    Point2 corner;
    BoundaryArc gamma0;
    double r0 = 0.2;        // radius of the half disk anchored on gamma0 at its midpoint
    double r = 0.0;         // chain radius; 0 picks 0.9 min(r0, r_m) / 5
    double alpha = 0.5;     // Hoelder exponent, eta_m
    double delta0 = 0.1;
    int rays = 5;
    int samples_per_ray = 64;
    double spacing = 0.0;   // sampling step along curves; 0 picks r / 8
};

struct EnvelopeRow {
    int P = 0;             // 0: |w|, 1: |grad w| times dist(x, dQ)
    double envelope = 0.0; // max over the ray samples
    double rate = 0.0;     // (ln|ln eps|)^-alpha
    double ratio = 0.0;    // envelope / (T rate)
};

struct PropagationReport {
    double epsilon = 0.0;         // sup |w| + sup |d_n w| on gamma0
    double epsilon_ball = 0.0;    // sup |w| on B_{r0/5}(x0), x0 = P - (r0/4) n inside the half disk
    Point2 x0;
    double r = 0.0;
    double r_m = 0.0;
    double perimeter = 0.0;       // |dOmega'|
    double T_r = 0.0;             // sup |w| on G_r
    double T = 0.0;               // max(T_r, 1)
    double alpha_tilde = 1.0;     // min alpha* over the sampled disks
    double chain_exponent = 0.0;  // alpha_tilde^(|dOmega'| / r + 1)
    double sup_g5r = 0.0;
    double bound_stated = 0.0;    // T_r eps^exponent
    double bound_homogeneous = 0.0;  // T_r^(1 - exponent) eps^exponent
    bool T_r_at_least_one = false;
    bool stated_holds = false;
    bool homogeneous_holds = false;
    double regime_log_threshold = 0.0;  // eps < eps_m iff ln|ln eps| exceeds this
    bool in_regime = false;
    std::vector<EnvelopeRow> envelope;
};

/// w = u - up on Omega' = Omega \ Q. Throws Precondition when w is not small on gamma0 (eps >= 1).
PropagationReport propagation_experiment(const DiscreteField& u, const DiscreteField& up,
                                         const PropagationSetup& setup);

}  // namespace calderon
