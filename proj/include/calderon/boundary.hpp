#pragma once

#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"

#include <vector>

namespace calderon {

/// Counter-clockwise arc of the outer boundary between two polar angles about the domain
/// center. A span of 2 pi or more means the whole closed boundary.
struct BoundaryArc {
    double theta0 = 0.0;
    double theta1 = 2.0 * M_PI;

    static BoundaryArc full() { return {}; }
    bool closed() const { return theta1 - theta0 >= 2.0 * M_PI - 1e-14; }
    bool contains(double theta) const;
};

/// Piecewise-linear function on a boundary polyline.
struct BoundaryFunction {
    std::vector<Point2> x;      // polyline vertices in counter-clockwise order
    std::vector<double> theta;  // polar angle of each vertex, increasing
    std::vector<double> f;      // values at the vertices
    bool closed = false;        // the last vertex joins the first

    std::size_t panels() const { return closed ? x.size() : (x.empty() ? 0 : x.size() - 1); }
    double length() const;
};

/// Restriction of u to the arc, sampled at the mesh boundary nodes (plus interpolated arc ends).
BoundaryFunction trace(const DiscreteField& u, const BoundaryArc& arc, const Domain& domain);

/// u - up on the arc, with both traces evaluated at the union of their boundary angles and the
/// points placed on the exact boundary curve.
BoundaryFunction trace_difference(const DiscreteField& u, const DiscreteField& up, const BoundaryArc& arc,
                                  const Domain& domain);

/// Trace of u at polar angle theta, along the mesh boundary polyline.
double trace_at(const DiscreteField& u, const Domain& domain, double theta);

double l2_norm(const BoundaryFunction& f);
/// Slobodeckij seminorm |f|_{1/2}.
double h_half_seminorm(const BoundaryFunction& f);
/// (|f|_{L2}^2 + |f|_{1/2}^2)^{1/2}.
double h_half_norm(const BoundaryFunction& f);

BoundaryFunction scaled(BoundaryFunction f, double c);

}  // namespace calderon
