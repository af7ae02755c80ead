#include "calderon/corner.hpp"
#include "calderon/error.hpp"

#include <Eigen/LU>
#include <doctest.h>

#include <chrono>

using namespace calderon;

namespace {

// first sign change of the 4x4 determinant on a 1e-6 grid, then bisection
double determinant_scan(double a, double k)
{
    auto det = [&](double eta) { return matching_matrix(eta, a, k).determinant(); };
    const double step = 1e-6;
    double lo = step, flo = det(lo);
    for (double eta = 2 * step; eta <= 1.0 + 1e-12; eta += step) {
        const double f = det(eta);
        if ((f < 0) != (flo < 0) || f == 0.0) {
            double hi = eta;
            for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
                const double mid = 0.5 * (lo + hi);
                if ((det(mid) < 0) == (flo < 0))
                    lo = mid;
                else
                    hi = mid;
            }
            return 0.5 * (lo + hi);
        }
        lo = eta, flo = f;
    }
    return 1.0;
}

std::shared_ptr<const Mesh> corner_mesh(const NestedGeometry& g, double h)
{
    MeshOptions o;
    o.target_h = h;
    o.grading = corner_grading(g);
    return std::make_shared<const Mesh>(generate_mesh(Domain::disk({0, 0}, 1), g, o));
}

}  // namespace

TEST_CASE("exponent: trivial cases")
{
    for (double a : {0.5, 1.0, M_PI / 2, 2.5}) CHECK(solve_exponent(a, 1.0).eta == 1.0);
    for (double k : {0.25, 0.5, 2.0, 4.0}) CHECK(solve_exponent(M_PI, k).eta == 1.0);
    CHECK_THROWS_AS(solve_exponent(0.0, 2.0), Error);
    CHECK_THROWS_AS(solve_exponent(2 * M_PI, 2.0), Error);
    CHECK_THROWS_AS(solve_exponent(1.0, -1.0), Error);
}

TEST_CASE("exponent matches the fine determinant scan")
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto se = solve_exponent(M_PI / 2, 2.0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 1.0);
    const double oracle = determinant_scan(M_PI / 2, 2.0);
    CHECK(std::abs(se.eta - oracle) < 1e-9);
    CHECK(se.eta > 0.0);
    CHECK(se.eta < 1.0);
    for (double a : {0.7, 2.0}) {
        for (double k : {0.3, 3.0}) CHECK(std::abs(solve_exponent(a, k).eta - determinant_scan(a, k)) < 1e-9);
    }
}

TEST_CASE("exponent: contrast duality")
{
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            const double a = 0.5 + 0.5 * i, k = 0.3 + 0.8 * j;
            if (std::abs(k - 1.0) < 1e-3) continue;
            CHECK(std::abs(solve_exponent(a, k).eta - solve_exponent(2 * M_PI - a, 1 / k).eta) < 1e-9);
        }
    }
}

TEST_CASE("exponent: monotone limit as k -> 1")
{
    double prev = 0.0;
    for (double k : {1.5, 1.25, 1.1, 1.01}) {
        const double eta = solve_exponent(M_PI / 2, k).eta;
        CHECK(eta > prev);
        CHECK(eta < 1.0);
        prev = eta;
    }
}

TEST_CASE("exponent band lies inside (0, 1)")
{
    const auto band = exponent_band({0.5, 2.5, 0.6, 0.3, 0.25, 4.0}, 11, 11);
    CHECK(band.eta_min > 0.0);
    CHECK(band.eta_max < 1.0);
    CHECK(band.eta_min <= band.eta_max);
}

TEST_CASE("angular profile: continuity and flux ratio")
{
    for (double a : {0.8, M_PI / 2, 2.2}) {
        for (double k : {0.4, 2.0, 3.5}) {
            const auto se = solve_exponent(a, k);
            const double e = 1e-11;
            for (double s : {1.0, -1.0}) {
                const double t = s * a / 2;
                const double in = eval_angular(se, t - s * e), out = eval_angular(se, t + s * e);
                CHECK(std::abs(in - out) < 1e-10);
                const double din = eval_angular_derivative(se, t - s * e);
                const double dout = eval_angular_derivative(se, t + s * e);
                if (std::abs(din) > 1e-6) CHECK(dout / din == doctest::Approx(k).epsilon(1e-8));
            }
        }
    }
    const auto one = solve_exponent(1.0, 1.0);
    for (double t = -3.0; t <= 3.0; t += 0.37)
        CHECK(eval_angular(one, t) == doctest::Approx(std::cos(t + one.phi_in)).epsilon(1e-12));
}

TEST_CASE("corner fit recovers synthetic fields")
{
    const auto se = solve_exponent(M_PI / 2, 2.0);
    const CornerFrame f{{0.1, -0.2}, normalized(Point2{1, 1})};
    const FieldSampler sing = [&](const Point2& x) -> std::optional<double> {
        const Point2 d = x - f.corner;
        const double r = norm(d);
        const double th = std::atan2(cross(f.bisector, d), dot(f.bisector, d));
        return 3.0 * std::pow(r, se.eta) * eval_angular(se, th);
    };
    const auto fit = fit_corner_coefficient(sing, f, se, 0.01, 0.1);
    CHECK(std::abs(fit.K - 3.0) < 1e-8);

    const FieldSampler lin = [](const Point2& x) -> std::optional<double> { return x.x; };
    CHECK(std::abs(fit_corner_coefficient(lin, f, se, 0.01, 0.1).K) < 1e-6);

    // smooth H^2 remainder: bias shrinks with the annulus
    const FieldSampler mixed = [&](const Point2& x) -> std::optional<double> {
        const Point2 d = x - f.corner;
        return *sing(x) + 5.0 * (d.x * d.x - d.y * d.y) + 2.0 * d.x * d.y;
    };
    const double b1 = std::abs(fit_corner_coefficient(mixed, f, se, 0.02, 0.2).K - 3.0);
    const double b2 = std::abs(fit_corner_coefficient(mixed, f, se, 0.01, 0.1).K - 3.0);
    CHECK(b2 < b1);
}

TEST_CASE("corner coefficient of a solved field is stable across annuli")
{
    const auto sq = ConvexPolygon::rectangle({-0.4, -0.3}, {0.2, 0.3});
    const NestedGeometry g({{sq, 2.0}});
    const auto u = solve_transmission(corner_mesh(g, 0.02), ConductivityField(g), NeumannData::cosine({0, 0}));
    const auto se = solve_exponent(M_PI / 2, 2.0);
    const auto frame = CornerFrame::at_vertex(sq, 0);
    const auto a = extract_corner_coefficient(u, frame, se, 0.03, 0.3);
    const auto b = extract_corner_coefficient(u, frame, se, 0.04, 0.2);
    CHECK(std::abs(a.K - b.K) <= 0.02 * std::abs(a.K));
    CHECK(a.residual < 0.05);
    CHECK_THROWS_AS(extract_corner_coefficient(u, frame, se, 1e-5, 2e-5), Error);
}

TEST_CASE("admissibility")
{
    const auto sq = ConvexPolygon::rectangle({-0.3, -0.3}, {0.3, 0.3});
    const NestedGeometry g({{sq, 2.0}});
    const auto mesh = corner_mesh(g, 0.02);
    const auto se = solve_exponent(M_PI / 2, 2.0);
    const auto corner = *sq.find_vertex({0.3, 0.3});
    const auto frame = CornerFrame::at_vertex(sq, corner);
    const auto dom = Domain::disk({0, 0}, 1);

    // g odd under the reflection across the diagonal through the corner kills the even mode
    const auto odd = NeumannData::cosine({0, 0}, 1, M_PI / 4);
    const auto u_odd = solve_transmission(mesh, ConductivityField(g), odd);
    CHECK_FALSE(admissibility_check(u_odd, frame, se, default_admissibility_threshold(odd, dom), 0.03, 0.3).admissible);

    const NestedGeometry off({{sq.translated({-0.1, 0.05}), 2.0}});
    const auto gen = NeumannData::cosine({0, 0});
    const auto u = solve_transmission(corner_mesh(off, 0.02), ConductivityField(off), gen);
    const auto sq2 = off.layer(0).polygon;
    CHECK(admissibility_check(u, CornerFrame::at_vertex(sq2, 0), se, default_admissibility_threshold(gen, dom), 0.03, 0.3)
              .admissible);

    const DiscreteField zero(mesh, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh->num_nodes())));
    CHECK_FALSE(admissibility_check(zero, frame, se, 1e-12, 0.03, 0.3).admissible);
}
