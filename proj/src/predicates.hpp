#pragma once

// Orientation and in-circle tests with a floating-point filter and an exact rational
// fallback for near-degenerate input.

#include "calderon/geometry.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <limits>

namespace calderon::detail {

using Exact = boost::multiprecision::cpp_rational;

inline int sign_of(const Exact& v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

/// +1 when c lies left of a->b, -1 right, 0 collinear.
inline int orient2d(const Point2& a, const Point2& b, const Point2& c)
{
    const double l = (a.x - c.x) * (b.y - c.y);
    const double r = (a.y - c.y) * (b.x - c.x);
    const double det = l - r;
    const double bound = 3.3306690738754716e-16 * (std::abs(l) + std::abs(r));
    if (det > bound) return 1;
    if (-det > bound) return -1;
    const Exact ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
    return sign_of((ax - cx) * (by - cy) - (ay - cy) * (bx - cx));
}

/// +1 when d lies strictly inside the circle through counter-clockwise a, b, c.
inline int incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d)
{
    const double adx = a.x - d.x, ady = a.y - d.y;
    const double bdx = b.x - d.x, bdy = b.y - d.y;
    const double cdx = c.x - d.x, cdy = c.y - d.y;
    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double alift = adx * adx + ady * ady;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double blift = bdx * bdx + bdy * bdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;
    const double clift = cdx * cdx + cdy * cdy;
    const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                             (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                             (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    const double bound = 1.1102230246251577e-15 * permanent;
    if (det > bound) return 1;
    if (-det > bound) return -1;
    const Exact ex_adx = Exact(a.x) - Exact(d.x), ex_ady = Exact(a.y) - Exact(d.y);
    const Exact ex_bdx = Exact(b.x) - Exact(d.x), ex_bdy = Exact(b.y) - Exact(d.y);
    const Exact ex_cdx = Exact(c.x) - Exact(d.x), ex_cdy = Exact(c.y) - Exact(d.y);
    const Exact e = (ex_adx * ex_adx + ex_ady * ex_ady) * (ex_bdx * ex_cdy - ex_cdx * ex_bdy) +
                    (ex_bdx * ex_bdx + ex_bdy * ex_bdy) * (ex_cdx * ex_ady - ex_adx * ex_cdy) +
                    (ex_cdx * ex_cdx + ex_cdy * ex_cdy) * (ex_adx * ex_bdy - ex_bdx * ex_ady);
    return sign_of(e);
}

/// Circumcenter of a triangle (not robust for slivers; callers only use it for refinement).
inline Point2 circumcenter(const Point2& a, const Point2& b, const Point2& c)
{
    const Point2 ba = b - a, ca = c - a;
    const double bl = dot(ba, ba), cl = dot(ca, ca);
    const double d = 2.0 * cross(ba, ca);
    return {a.x + (ca.y * bl - ba.y * cl) / d, a.y + (ba.x * cl - ca.x * bl) / d};
}

}  // namespace calderon::detail
