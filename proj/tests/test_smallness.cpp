#include "calderon/corner.hpp"
#include "calderon/error.hpp"
#include "calderon/smallness.hpp"

#include <doctest.h>

using namespace calderon;

namespace {

// alpha* from plain boundary sampling at a fixed node count
double sampled_alpha(const ScalarField& w, const Point2& c, double r, int n)
{
    const double m1 = sampled_sup_norm(w, c, r, n), m2 = sampled_sup_norm(w, c, 2 * r, n),
                 m4 = sampled_sup_norm(w, c, 4 * r, n);
    return std::log(m4 / m2) / std::log(m4 / m1);
}

}  // namespace

TEST_CASE("harmonic samples are harmonic")
{
    for (std::uint64_t s = 0; s < 40; ++s) CHECK(HarmonicSample::random(s).laplacian_defect(s) < 1e-7);
    CHECK_THROWS_AS(HarmonicSample({0, 0}, {0}, {0}, {{{0.5, 0}, {1, 0}}}, {0, 0}, 1.0), Error);
}

TEST_CASE("three-sphere: constants")
{
    const auto one = HarmonicSample::constant(1.0);
    const auto t = three_sphere_check(one, {0.1, 0.1}, 0.1);
    CHECK(t.M1 == doctest::Approx(1.0));
    CHECK(t.M2 == doctest::Approx(1.0));
    CHECK(t.M4 == doctest::Approx(1.0));
    for (double a : {0.05, 0.3, 0.7, 0.99}) CHECK(t.holds(a));
}

TEST_CASE("three-sphere: pure modes give alpha* = 1/2")
{
    for (int n = 1; n <= 8; ++n) {
        const auto w = HarmonicSample::mode(n, 1.0);
        const auto t = three_sphere_check(w, {0, 0}, 0.2);
        CHECK(t.M1 == doctest::Approx(std::pow(0.2, n)).epsilon(1e-10));
        CHECK(t.M4 == doctest::Approx(std::pow(0.8, n)).epsilon(1e-10));
        CHECK(std::abs(t.alpha_star - 0.5) < 1e-8);
        CHECK(t.holds(t.alpha_star));
    }
}

TEST_CASE("three-sphere: dipole against a dense sampling oracle")
{
    const auto w = HarmonicSample::dipole({3.0, 0.5}, 2.0);
    const ScalarField f = w;
    for (const Point2 c : {Point2{0, 0}, Point2{0.5, -0.2}, Point2{0.9, 0.3}}) {
        const auto t = three_sphere_check(w, c, 0.2);
        CHECK(std::abs(t.alpha_star - sampled_alpha(f, c, 0.2, 20480)) < 1e-6);
        CHECK(t.holds(t.alpha_star));
        CHECK(t.alpha_star > 0.0);
        CHECK(t.alpha_star <= 1.0);
    }
    CHECK_THROWS_AS(three_sphere_check(w, {1.5, 0}, 0.2), Error);   // B_4r leaves the disk
}

TEST_CASE("disk chain geometry")
{
    const auto c = DiskChain::along({{0, 0}, {0.5, 0}, {0.5, 0.5}}, 0.1);
    CHECK(c.length == doctest::Approx(1.0));
    CHECK(c.steps() == 10);
    for (std::size_t i = 1; i < c.centers.size(); ++i) CHECK(distance(c.centers[i], c.centers[i - 1]) <= 0.1 + 1e-12);
    const auto one = DiskChain::along({{0, 0}, {0.05, 0}}, 0.1);
    CHECK(one.steps() == 1);
}

TEST_CASE("chain propagation")
{
    // constant field, T = 1
    const auto c = HarmonicSample::constant(0.5);
    const auto chain = DiskChain::along({{-0.2, 0}, {0.2, 0}}, 0.05);
    const auto r = chain_propagation(c, chain, 0.5, 1.0);
    CHECK(r.holds);
    CHECK(r.observed == doctest::Approx(0.5));
    CHECK(r.bound >= 0.5);

    // single step reduces to the three-sphere inequality with T = M4
    const auto w = HarmonicSample::dipole({2.0, 1.0}, 1.0).scaled(0.3);
    const auto short_chain = DiskChain::along({{0, 0}, {0.03, 0}}, 0.05);
    const double alpha = chain_alpha(w, short_chain);
    const auto s = chain_propagation(w, short_chain, alpha, std::max(1.0, disk_sup_norm(w, {0, 0}, 1.0)));
    CHECK(s.holds);

    // dipole along an L-shaped corridor
    const auto d = HarmonicSample::dipole({1.6, 0.2}, 1.0);
    const auto L = DiskChain::along({{-0.5, -0.4}, {0.3, -0.4}, {0.3, 0.4}}, 0.06);
    const double start = disk_sup_norm(d, L.centers.front(), 0.24);
    const auto ds = d.scaled(0.5 / start);
    const double T = std::max(1.0, disk_sup_norm(ds, {0, 0}, 1.0));
    const auto lr = chain_propagation(ds, L, chain_alpha(ds, L), T);
    CHECK(lr.holds);
    CHECK(lr.slack >= 0.0);
    MESSAGE("L-corridor slack " << lr.slack << " bound " << lr.bound << " observed " << lr.observed);

    CHECK_THROWS_AS(chain_propagation(ds, L, 0.0, T), Error);
    CHECK_THROWS_AS(chain_propagation(ds, L, 0.5, 0.5), Error);
    CHECK_THROWS_AS(chain_propagation(d.scaled(10.0 / start), L, 0.4, 100.0), Error);
}

TEST_CASE("random corpus has no violations")
{
    int bad = 0;
    for (std::uint64_t s = 1; s <= 50; ++s) {
        const auto row = run_chain_sample(s);
        if (!row.sphere_holds || !row.chain.holds) ++bad;
        CHECK(row.sphere.alpha_star > 0.0);
        CHECK(row.sphere.alpha_star <= 1.0);
    }
    CHECK(bad == 0);
}

TEST_CASE("offsets of the exterior set")
{
    const auto q = ConvexPolygon::rectangle({-0.2, -0.2}, {0.2, 0.2});
    const double r = 0.05;
    const double sag = r * (1 - std::cos(M_PI / 16));
    for (const auto& x : offset_outline(q, r)) {
        CHECK(q.distance(x) <= r + 1e-12);
        CHECK(q.distance(x) >= r - sag - 1e-12);
    }
    const auto dom = Domain::disk({0, 0}, 1);
    const auto pts = g_r_boundary(dom, q, r, 0.01);
    CHECK_FALSE(pts.empty());
    for (const auto& x : pts) {
        CHECK(dom.contains(x));
        CHECK(exterior_distance(dom, q, x) == doctest::Approx(r).epsilon(sag / r + 1e-9));
    }
    CHECK(exterior_distance(dom, q, {0.5, 0}) == doctest::Approx(0.3));
    CHECK(exterior_distance(dom, q, {0.9, 0}) == doctest::Approx(0.1));
}

TEST_CASE("propagation experiment on solved fields")
{
    const auto dom = Domain::disk({0, 0}, 1);
    const auto D = ConvexPolygon::rectangle({-0.4, -0.3}, {0.2, 0.3});
    const NestedGeometry g({{D, 2.0}});
    auto solve = [&](const NestedGeometry& geo) {
        MeshOptions o;
        o.target_h = 0.04;
        o.grading = corner_grading(geo);
        return solve_transmission(std::make_shared<const Mesh>(generate_mesh(dom, geo, o)), ConductivityField(geo),
                                  NeumannData::cosine({0, 0}));
    };
    const auto u = solve(g);
    auto setup_for = [&](const ConvexPolygon& dp) {
        PropagationSetup s;
        s.domain = dom;
        s.hull = convex_hull(D, dp);
        s.corner = extremal_vertex(D, dp).vertex;
        s.gamma0 = {0.0, M_PI / 2};
        s.alpha = 0.6;
        s.delta0 = 0.25;
        return s;
    };

    {
        const auto dp = D.translated({0.1, 0});
        const auto rep = propagation_experiment(u, u, setup_for(dp));
        CHECK(rep.epsilon == 0.0);
        for (const auto& e : rep.envelope) CHECK(e.envelope == 0.0);
    }

    double prev_eps = 1e9, prev_sup = 1e9;
    for (double t : {0.2, 0.1, 0.05, 0.025}) {
        const auto dp = D.translated({t, 0});
        const auto rep = propagation_experiment(u, solve(NestedGeometry({{dp, 2.0}})), setup_for(dp));
        CHECK(rep.epsilon < prev_eps);
        CHECK(rep.sup_g5r < prev_sup);
        CHECK(rep.alpha_tilde > 0.0);
        CHECK(rep.alpha_tilde <= 1.0);
        CHECK(rep.bound_homogeneous >= 0.0);
        CHECK(rep.envelope.size() == 2);
        prev_eps = rep.epsilon, prev_sup = rep.sup_g5r;
    }
}
