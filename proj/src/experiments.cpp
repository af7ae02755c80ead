#include "calderon/experiments.hpp"

#include "calderon/error.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace calderon {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& token)
{
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (token.empty() || end != token.c_str() + token.size())
        throw Error(ErrorKind::Config, key + ": not a number: '" + token + "'");
    return v;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source)
{
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::Config, source + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw Error(ErrorKind::Config, source + ":" + std::to_string(lineno) + ": empty key");
        if (c.has(key))
            throw Error(ErrorKind::Config, source + ":" + std::to_string(lineno) + ": duplicate key " + key);
        c.values_[key] = value;
    }
    return c;
}

Config Config::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open " + path);
    return parse(in, path);
}

const std::string& Config::text(const std::string& key) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::Config, "missing key " + key);
    return it->second;
}

std::string Config::text(const std::string& key, const std::string& fallback) const
{
    return has(key) ? text(key) : fallback;
}

double Config::number(const std::string& key) const { return parse_double(key, text(key)); }

double Config::number(const std::string& key, double fallback) const
{
    return has(key) ? number(key) : fallback;
}

std::vector<double> Config::numbers(const std::string& key) const
{
    std::string s = text(key);
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream is(s);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) out.push_back(parse_double(key, tok));
    return out;
}

bool Config::flag(const std::string& key, bool fallback) const
{
    if (!has(key)) return fallback;
    const auto& v = text(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(ErrorKind::Config, key + ": expected a boolean, got '" + v + "'");
}

std::size_t worker_count()
{
    if (const char* env = std::getenv("CALDERON_WORKERS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body)
{
    if (n == 0) return;
    const std::size_t workers = std::min(worker_count(), n);
    std::vector<std::exception_ptr> errors(n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- scenarios ----

namespace {

std::vector<Point2> read_points(const Config& c, const std::string& key)
{
    const auto v = c.numbers(key);
    if (v.size() < 6 || v.size() % 2 != 0)
        throw Error(ErrorKind::Config, key + ": expected at least three x y pairs");
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < v.size(); i += 2) pts.push_back({v[i], v[i + 1]});
    return pts;
}

Point2 read_point(const Config& c, const std::string& key)
{
    const auto v = c.numbers(key);
    if (v.size() != 2) throw Error(ErrorKind::Config, key + ": expected x y");
    return {v[0], v[1]};
}

ConvexPolygon read_polygon_key(const Config& c, const std::string& key)
{
    try {
        return ConvexPolygon(read_points(c, key));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        throw Error(ErrorKind::Config, key + ": " + e.what());
    }
}

bool known_key(const std::string& key)
{
    static const std::set<std::string> fixed{
        "name", "seed", "svg", "domain", "domain.center", "domain.radius", "domain.vertices",
        "comparison.vertices", "comparison.shift", "comparison.k", "neumann.mode", "neumann.phase",
        "neumann.amplitude", "gamma0", "mesh.h", "mesh.graded", "class.a_m", "class.a_M", "class.l",
        "class.delta0", "class.k_m", "class.k_M", "probe.tau_factors", "sweep.t", "sweep.direction",
        "recover.band"};
    if (fixed.count(key)) return true;
    if (key.rfind("layer", 0) == 0) {
        const auto dot = key.find('.');
        if (dot == std::string::npos || dot == 5) return false;
        for (std::size_t i = 5; i < dot; ++i)
            if (!std::isdigit(static_cast<unsigned char>(key[i]))) return false;
        const auto field = key.substr(dot + 1);
        return field == "vertices" || field == "k";
    }
    return false;
}

}  // namespace

Scenario Scenario::from_config(const Config& c)
{
    for (const auto& [key, value] : c.entries())
        if (!known_key(key)) throw Error(ErrorKind::Config, "unknown key " + key);

    Scenario s;
    s.name = c.text("name", "scenario");
    s.seed = static_cast<std::uint64_t>(c.number("seed", 0.0));
    s.svg = c.flag("svg", false);

    const std::string dtype = c.text("domain", "disk");
    if (dtype == "disk") {
        const Point2 center = c.has("domain.center") ? read_point(c, "domain.center") : Point2{0.0, 0.0};
        const double radius = c.number("domain.radius", 1.0);
        if (!(radius > 0.0)) throw Error(ErrorKind::Config, "domain.radius must be positive");
        s.domain = Domain::disk(center, radius);
    } else if (dtype == "polygon") {
        s.domain = Domain::polygon(read_polygon_key(c, "domain.vertices"));
    } else {
        throw Error(ErrorKind::Config, "domain must be disk or polygon");
    }

    std::vector<NestedGeometry::Layer> layers;
    for (int j = 1;; ++j) {
        const std::string prefix = "layer" + std::to_string(j);
        if (!c.has(prefix + ".vertices")) break;
        layers.push_back({read_polygon_key(c, prefix + ".vertices"), c.number(prefix + ".k")});
    }
    if (layers.empty()) throw Error(ErrorKind::Config, "layer1.vertices is required");
    for (const auto& [key, value] : c.entries()) {
        if (key.rfind("layer", 0) != 0) continue;
        const int j = std::atoi(key.c_str() + 5);
        if (j < 1 || static_cast<std::size_t>(j) > layers.size())
            throw Error(ErrorKind::Config, key + ": layers must be numbered 1, 2, ... without gaps");
    }
    try {
        s.geometry = NestedGeometry(layers);
    } catch (const Error& e) {
        throw Error(ErrorKind::Config, e.what());
    }

    if (c.has("comparison.vertices") && c.has("comparison.shift"))
        throw Error(ErrorKind::Config, "give comparison.vertices or comparison.shift, not both");
    const double kp = c.number("comparison.k", layers.front().k);
    if (c.has("comparison.vertices"))
        s.comparison = NestedGeometry({{read_polygon_key(c, "comparison.vertices"), kp}});
    else if (c.has("comparison.shift"))
        s.comparison = NestedGeometry({{layers.front().polygon.translated(read_point(c, "comparison.shift")), kp}});

    const double mode = c.number("neumann.mode", 1.0);
    if (mode < 1.0 || mode != std::floor(mode)) throw Error(ErrorKind::Config, "neumann.mode must be a positive integer");
    s.g = NeumannData::cosine(s.domain.center(), static_cast<int>(mode), c.number("neumann.phase", 0.0),
                              c.number("neumann.amplitude", 1.0));

    if (c.has("gamma0")) {
        const auto v = c.numbers("gamma0");
        if (v.size() != 2) throw Error(ErrorKind::Config, "gamma0: expected theta0 theta1");
        s.gamma0 = {v[0], v[1]};
    }
    s.target_h = c.number("mesh.h", s.target_h);
    s.graded = c.flag("mesh.graded", s.graded);

    s.params.a_m = c.number("class.a_m", s.params.a_m);
    s.params.a_M = c.number("class.a_M", s.params.a_M);
    s.params.l = c.number("class.l", s.params.l);
    s.params.delta0 = c.number("class.delta0", s.params.delta0);
    s.params.k_m = c.number("class.k_m", s.params.k_m);
    s.params.k_M = c.number("class.k_M", s.params.k_M);

    if (c.has("probe.tau_factors")) s.tau_factors = c.numbers("probe.tau_factors");
    if (c.has("sweep.t")) s.sweep_t = c.numbers("sweep.t");
    if (c.has("sweep.direction")) s.sweep_direction = read_point(c, "sweep.direction");
    if (c.has("recover.band")) {
        const auto v = c.numbers("recover.band");
        if (v.size() != 2) throw Error(ErrorKind::Config, "recover.band: expected lo hi");
        s.band_lo = v[0];
        s.band_hi = v[1];
    }
    return s;
}

Scenario Scenario::bundled()
{
    Scenario s;
    s.name = "bundled";
    const auto d = ConvexPolygon::rectangle({-0.4, -0.3}, {0.2, 0.3});
    s.geometry = NestedGeometry({{d, 2.0}});
    s.comparison = NestedGeometry({{d.translated({0.2, 0.0}), 3.0}});
    s.tau_factors.clear();
    for (int i = 0; i <= 10; ++i) s.tau_factors.push_back(2.0 * std::pow(10.0, i / 10.0));
    s.sweep_t = {0.0, 0.02, 0.04, 0.06, 0.08, 0.1};
    return s;
}

void Scenario::validate() const
{
    params.validate();
    if (!(target_h > 0.0)) throw Error(ErrorKind::InvalidArgument, "mesh size must be positive");
    if (!(gamma0.theta1 > gamma0.theta0)) throw Error(ErrorKind::InvalidArgument, "gamma0 is empty");
    if (!(band_lo > 0.0) || !(band_hi > band_lo)) throw Error(ErrorKind::InvalidArgument, "contrast band is empty");
    if (geometry.empty()) throw Error(ErrorKind::InvalidArgument, "no inclusion");
    auto check = [&](const NestedGeometry& g, const char* what) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            const auto rep = validate_class_d(g.layer(j).polygon, g.layer(j).k, params, domain);
            for (const auto& cl : rep.clauses) {
                if (!cl.passed)
                    throw Error(ErrorKind::InvalidArgument, std::string(what) + " layer " + std::to_string(j + 1) +
                                                                " fails " + cl.name + ": " + cl.detail);
            }
        }
    };
    check(geometry, "inclusion");
    check(comparison, "comparison");
    if (!comparison.empty()) {
        const auto cl = check_hull_clearance(geometry.layer(0).polygon, comparison.layer(0).polygon, params, domain);
        if (!cl.passed) throw Error(ErrorKind::InvalidArgument, "pair fails " + cl.name + ": " + cl.detail);
    }
    g.check_compatible(domain);
}

std::shared_ptr<const Mesh> scenario_mesh(const Scenario& s, const NestedGeometry& geometry, double h)
{
    MeshOptions o;
    o.target_h = h;
    if (s.graded) o.grading = corner_grading(geometry);
    return std::make_shared<const Mesh>(generate_mesh(s.domain, geometry, o));
}

DiscreteField scenario_solve(const Scenario& s, const NestedGeometry& geometry, double h, const NeumannData& g)
{
    return solve_transmission(scenario_mesh(s, geometry, h), ConductivityField(geometry), g);
}

double boundary_misfit(const DiscreteField& u, const DiscreteField& up, const Scenario& s)
{
    return h_half_norm(trace_difference(u, up, s.gamma0, s.domain));
}

// ---- statistics ----

namespace {

std::vector<double> average_ranks(const std::vector<double>& v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) r[idx[m]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size()) throw Error(ErrorKind::InvalidArgument, "spearman: length mismatch");
    if (a.size() < 2) throw Error(ErrorKind::InvalidArgument, "spearman: need two samples");
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::optional<BetaFit> fit_beta(const std::vector<double>& eps, const std::vector<double>& d)
{
    if (eps.size() != d.size()) throw Error(ErrorKind::InvalidArgument, "fit_beta: length mismatch");
    std::vector<double> L, y;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0) || !(eps[i] < 1.0)) continue;
        const double l = std::log(std::abs(std::log(eps[i])));
        if (!(l > 0.0)) continue;
        L.push_back(l);
        y.push_back(d[i]);
    }
    if (L.size() < 4) return std::nullopt;

    auto project = [&](double beta, double& C) {
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < L.size(); ++i) {
            const double x = std::pow(L[i], -beta);
            sxy += x * y[i];
            sxx += x * x;
        }
        C = sxy / sxx;
        double ss = 0.0;
        for (std::size_t i = 0; i < L.size(); ++i) {
            const double r = y[i] - C * std::pow(L[i], -beta);
            ss += r * r;
        }
        return ss;
    };
    // coarse scan first; the objective can have a shallow second basin
    double best = 0.0, best_ss = std::numeric_limits<double>::infinity(), C = 0.0;
    const double lo = -20.0, hi = 60.0;
    const int n = 800;
    for (int i = 0; i <= n; ++i) {
        const double b = lo + (hi - lo) * i / n;
        const double ss = project(b, C);
        if (ss < best_ss) best_ss = ss, best = b;
    }
    const double step = (hi - lo) / n;
    const auto r = boost::math::tools::brent_find_minima([&](double b) { return project(b, C); },
                                                         std::max(lo, best - step), std::min(hi, best + step), 52);
    BetaFit f;
    f.beta = r.first;
    project(f.beta, f.C);
    f.rms = std::sqrt(r.second / static_cast<double>(L.size()));
    f.rows = L.size();
    return f;
}

// ---- stability sweep ----

namespace {

double contour_radius(double d_h, const ClassDParams& p) { return std::min({d_h / 2.0, p.l / 5.0, p.delta0}); }

double delta_of(double eps, double eta_m)
{
    if (!(eps > 0.0) || !(eps < 1.0)) return std::numeric_limits<double>::quiet_NaN();
    const double l = std::log(std::abs(std::log(eps)));
    if (!(l > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::pow(l, -eta_m);
}

double tau_e_of(double h, double eps, double eta_m)
{
    if (h == 0.0 || eps == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (h * std::sqrt(delta_of(eps, eta_m)));
}

}  // namespace

SweepResult run_stability_sweep(const Scenario& s)
{
    if (s.sweep_t.empty()) throw Error(ErrorKind::InvalidArgument, "sweep needs at least one t");
    if (s.geometry.size() != 1) throw Error(ErrorKind::InvalidArgument, "sweep needs a single inclusion");
    if (!(norm(s.sweep_direction) > 0.0)) throw Error(ErrorKind::InvalidArgument, "sweep direction is zero");
    s.validate();

    SweepResult out;
    out.name = s.name;
    out.eta_m = exponent_band(s.params).eta_min;

    const auto& d = s.geometry.layer(0);
    const double kp = s.comparison.empty() ? d.k : s.comparison.layer(0).k;
    const Point2 dir = normalized(s.sweep_direction);

    // D' at each t is checked before any solve
    std::vector<NestedGeometry> family;
    for (double t : s.sweep_t) {
        if (t < 0.0) throw Error(ErrorKind::InvalidArgument, "sweep t must be non-negative");
        const auto dp = d.polygon.translated(t * dir);
        const auto rep = validate_class_d(dp, kp, s.params, s.domain);
        if (!rep.passed()) throw Error(ErrorKind::InvalidArgument, "D' at t = " + format_number(t) + " leaves the class");
        const auto cl = check_hull_clearance(d.polygon, dp, s.params, s.domain);
        if (!cl.passed) throw Error(ErrorKind::InvalidArgument, "pair at t = " + format_number(t) + " fails " + cl.name);
        family.push_back(NestedGeometry({{dp, kp}}));
    }

    std::optional<DiscreteField> u, u_fine;
    parallel_for(2, [&](std::size_t i) {
        if (i == 0)
            u.emplace(scenario_solve(s, s.geometry, s.target_h, s.g));
        else
            u_fine.emplace(scenario_solve(s, s.geometry, s.target_h / 2.0, s.g));
    });
    out.floor = boundary_misfit(*u, *u_fine, s);

    out.records.resize(family.size());
    parallel_for(family.size(), [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        SweepRecord& r = out.records[i];
        r.t = s.sweep_t[i];
        const auto up = scenario_solve(s, family[i], s.target_h, s.g);
        r.eps = boundary_misfit(*u, up, s);
        r.d_h = hausdorff_distance(d.polygon, family[i].layer(0).polygon);
        r.h = contour_radius(r.d_h, s.params);
        r.tau_e = tau_e_of(r.h, r.eps, out.eta_m);
        r.reliable = r.t > 0.0 && r.eps >= 3.0 * out.floor;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    // trend over the whole family, the fit only over rows above the floor
    std::vector<double> e, dh, fe, fd;
    for (const auto& r : out.records) {
        e.push_back(r.eps);
        dh.push_back(r.d_h);
        if (r.reliable) fe.push_back(r.eps), fd.push_back(r.d_h);
    }
    if (e.size() >= 2) {
        out.rank_correlation = spearman(e, dh);
        std::vector<std::size_t> idx(e.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dh[a] < dh[b]; });
        out.monotone = true;
        for (std::size_t i = 1; i < idx.size(); ++i)
            if (!(e[idx[i]] > e[idx[i - 1]])) out.monotone = false;
    }
    out.beta = fit_beta(fe, fd);
    return out;
}

void write_sweep_csv(std::ostream& os, const SweepResult& r)
{
    os << "t,eps,d_h,h,tau_e,beta_fit\n";
    const double beta = r.beta ? r.beta->beta : std::numeric_limits<double>::quiet_NaN();
    for (const auto& x : r.records) {
        os << format_number(x.t) << ',' << format_number(x.eps) << ',' << format_number(x.d_h) << ','
           << format_number(x.h) << ',' << format_number(x.tau_e) << ',' << format_number(beta) << '\n';
    }
}

void write_sweep_report(std::ostream& os, const SweepResult& r)
{
    os << "scenario " << r.name << '\n';
    os << "rows " << r.records.size() << '\n';
    os << "discretization floor " << format_number(r.floor) << '\n';
    os << "eta_m " << format_number(r.eta_m) << '\n';
    std::size_t reliable = 0;
    double lmin = std::numeric_limits<double>::infinity(), lmax = -lmin;
    for (const auto& x : r.records) {
        if (!x.reliable) continue;
        ++reliable;
        if (x.eps > 0.0 && x.eps < 1.0) {
            const double l = std::log(std::abs(std::log(x.eps)));
            lmin = std::min(lmin, l);
            lmax = std::max(lmax, l);
        }
    }
    os << "reliable rows " << reliable << '\n';
    os << "spearman(eps, d_h) " << format_number(r.rank_correlation) << '\n';
    os << "eps increasing in d_h " << (r.monotone ? "yes" : "no") << '\n';
    if (r.beta)
        os << "fit d_h = C (ln|ln eps|)^-beta: C " << format_number(r.beta->C) << " beta "
           << format_number(r.beta->beta) << " rms " << format_number(r.beta->rms) << " over " << r.beta->rows
           << " rows\n";
    else
        os << "fit d_h = C (ln|ln eps|)^-beta: fewer than 4 usable rows\n";
    if (reliable > 0 && lmax >= lmin)
        os << "ln|ln eps| spans [" << format_number(lmin) << ", " << format_number(lmax)
           << "]; the log-log rate is an asymptotic statement, so the fitted beta only describes this "
              "pre-asymptotic range and is not an estimate of the theoretical exponent\n";
    for (const auto& x : r.records)
        os << "t " << format_number(x.t) << " solve " << format_number(x.seconds) << " s"
           << (x.reliable ? "" : " (below 3x floor or t = 0)") << '\n';
}

void write_sweep_svg(std::ostream& os, const SweepResult& r)
{
    std::vector<std::pair<double, double>> pts;
    for (const auto& x : r.records)
        if (x.eps > 0.0 && x.d_h > 0.0) pts.push_back({std::log10(x.d_h), std::log10(x.eps)});
    const double W = 640, H = 420, L = 70, R = 20, T = 30, B = 50;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << r.name
       << ": boundary misfit against Hausdorff distance</text>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">log10 d_H</text>\n";
    os << "<text x=\"15\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 "
       << H / 2 << ")\">log10 eps</text>\n";
    if (pts.empty()) {
        os << "</svg>\n";
        return;
    }
    double x0 = pts[0].first, x1 = x0, y0 = pts[0].second, y1 = y0;
    for (const auto& [x, y] : pts) {
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
    if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
    const double px = 0.05 * (x1 - x0), py = 0.05 * (y1 - y0);
    x0 -= px, x1 += px, y0 -= py, y1 += py;
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    char buf[128];
    os << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
    for (const auto& [x, y] : pts) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(x), sy(y));
        os << buf;
    }
    os << "\"/>\n";
    for (const auto& [x, y] : pts) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"steelblue\"/>\n", sx(x), sy(y));
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"10\">%.3g</text>\n", L, H - B + 14, x0);
    os << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"10\" text-anchor=\"end\">%.3g</text>\n",
                  W - R, H - B + 14, x1);
    os << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"10\" text-anchor=\"end\">%.3g</text>\n",
                  L - 4, H - B, y0);
    os << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"10\" text-anchor=\"end\">%.3g</text>\n",
                  L - 4, T + 10, y1);
    os << buf;
    os << "</svg>\n";
}

// ---- tau balance ----

namespace {

struct ArcSup {
    double w = 0.0;
    double dnw = 0.0;
};

ArcSup arc_sup(const DiscreteField& u, const DiscreteField& up, const std::vector<ContourNode>& nodes)
{
    ArcSup s;
    for (const auto& n : nodes) {
        const auto a = u.eval(n.x), b = up.eval(n.x);
        const auto ha = u.locator().locate(n.x), hb = up.locator().locate(n.x);
        if (!a || !b || !ha || !hb) throw Error(ErrorKind::ContourOutsideMesh, "arc node outside the mesh");
        s.w = std::max(s.w, std::abs(*a - *b));
        const Point2 g = u.gradient(static_cast<std::size_t>(ha->triangle)) -
                         up.gradient(static_cast<std::size_t>(hb->triangle));
        s.dnw = std::max(s.dnw, std::abs(dot(g, n.normal)));
    }
    return s;
}

}  // namespace

TauBalance run_tau_balance(const Scenario& s)
{
    if (s.comparison.empty()) throw Error(ErrorKind::InvalidArgument, "tau balance needs a comparison inclusion");
    s.validate();
    std::optional<DiscreteField> u, up;
    parallel_for(2, [&](std::size_t i) {
        if (i == 0)
            u.emplace(scenario_solve(s, s.geometry, s.target_h, s.g));
        else
            up.emplace(scenario_solve(s, s.comparison, s.target_h, s.g));
    });
    return run_tau_balance(s, *u, *up);
}

TauBalance run_tau_balance(const Scenario& s, const DiscreteField& u, const DiscreteField& up)
{
    if (s.geometry.size() != 1 || s.comparison.size() != 1)
        throw Error(ErrorKind::InvalidArgument, "tau balance needs one inclusion on each side");
    if (s.tau_factors.empty()) throw Error(ErrorKind::InvalidArgument, "no tau factors");
    const auto& d = s.geometry.layer(0);
    const auto& dp = s.comparison.layer(0);
    const auto ev = extremal_vertex(d.polygon, dp.polygon);
    const auto& owner = ev.on_first ? d : dp;
    const auto& other = ev.on_first ? dp : d;
    const DiscreteField& uo = ev.on_first ? u : up;
    const DiscreteField& ux = ev.on_first ? up : u;

    TauBalance b;
    b.corner = ev.vertex;
    b.se = solve_exponent(owner.polygon.angle(ev.index), owner.k);
    const double l = owner.polygon.min_edge();
    b.fit = extract_corner_coefficient(uo, CornerFrame::at_vertex(owner.polygon, ev.index), b.se, 0.05 * l, 0.5 * l);
    const auto probe_frame = build_sector_frame(owner.polygon, other.polygon, ev.vertex, 1e12, s.params);
    b.h = probe_frame.radius_h;
    b.tau0 = probe_frame.tau0;
    b.epsilon = boundary_misfit(u, up, s);
    b.eta_m = exponent_band(s.params).eta_min;
    b.tau_e = tau_e_of(b.h, b.epsilon, b.eta_m);
    b.tau_e_above_tau0 = b.tau_e >= b.tau0;
    const double delta = delta_of(b.epsilon, b.eta_m);
    const double K = std::abs(b.fit.K);
    const double R = std::hypot(b.fit.c1, b.fit.c2);
    const double eta = b.se.eta;

    IdentityOptions io;
    io.inside_region = 1;
    std::vector<std::pair<double, double>> lhs;
    for (double f : s.tau_factors) {
        if (!(f >= 1.0)) throw Error(ErrorKind::FrequencyTooLow, "tau factor below 1");
        TauRow row;
        row.tau = f * b.tau0;
        const auto frame = build_sector_frame(owner.polygon, other.polygon, ev.vertex, row.tau, s.params);
        const auto p = CgoProbe::from_frame(frame);
        const auto rep = contour_identity(uo, ux, owner.k, frame, p, io);
        row.lhs = rep.lhs;
        row.rhs = rep.rhs;
        row.inner = rep.inner;
        row.outer = rep.outer;
        row.residual = rep.residual;
        row.lower_bound = lower_bound(b.se, b.fit.K, row.tau);

        const double ap = frame.alpha_prime();
        const double decay = std::exp(-ap * row.tau * b.h);
        const auto in = arc_sup(uo, ux, frame.inner_nodes(rep.max_panel));
        const auto out = arc_sup(uo, ux, frame.outer_nodes(rep.max_panel));
        row.ub_sing = K * std::pow(row.tau, -eta) * std::exp(-ap * row.tau * b.h / 2.0);
        row.ub_reg_tau = R / row.tau;
        row.ub_reg_h = b.h * decay * R;
        row.ub_inner = b.h * decay * (in.dnw + row.tau * in.w);
        row.ub_outer = b.h * (out.dnw + row.tau * out.w);
        row.delta_term = b.h * std::pow(row.tau, eta + 1.0) * delta;
        row.above_inner = row.lower_bound > row.ub_inner;
        row.delta_dominates = !(row.delta_term < row.lower_bound);
        row.admissible = row.above_inner && !row.delta_dominates;
        b.rows.push_back(row);
        lhs.push_back({row.tau, std::abs(row.lhs)});
    }
    b.lhs_slope = lhs.size() >= 2 ? decay_fit(lhs) : std::numeric_limits<double>::quiet_NaN();
    return b;
}

void write_probe_csv(std::ostream& os, const TauBalance& b)
{
    os << "tau,lhs_re,lhs_im,rhs_re,rhs_im,residual,lower_bound\n";
    for (const auto& r : b.rows) {
        os << format_number(r.tau) << ',' << format_number(r.lhs.real()) << ',' << format_number(r.lhs.imag()) << ','
           << format_number(r.rhs.real()) << ',' << format_number(r.rhs.imag()) << ',' << format_number(r.residual)
           << ',' << format_number(r.lower_bound) << '\n';
    }
}

void write_tau_balance_csv(std::ostream& os, const TauBalance& b)
{
    os << "tau,lower_bound,ub_sing,ub_reg_tau,ub_reg_h,ub_inner,ub_outer,delta_term,lhs_abs,inner_abs,outer_abs,"
          "above_inner,delta_dominates,admissible\n";
    for (const auto& r : b.rows) {
        os << format_number(r.tau) << ',' << format_number(r.lower_bound) << ',' << format_number(r.ub_sing) << ','
           << format_number(r.ub_reg_tau) << ',' << format_number(r.ub_reg_h) << ',' << format_number(r.ub_inner)
           << ',' << format_number(r.ub_outer) << ',' << format_number(r.delta_term) << ','
           << format_number(std::abs(r.lhs)) << ',' << format_number(std::abs(r.inner)) << ','
           << format_number(std::abs(r.outer)) << ',' << int(r.above_inner) << ',' << int(r.delta_dominates) << ','
           << int(r.admissible) << '\n';
    }
}

// ---- contrast recovery ----

namespace {

class MisfitModel {
public:
    MisfitModel(const Scenario& s, const RecoveryOptions& o)
        : s_(s), g_(s.g.scaled(o.scale)),
          model_(scenario_mesh(s, s.geometry, s.target_h), g_, s.geometry.size() + 1)
    {
        const double dh = o.data_h > 0.0 ? o.data_h : s.target_h / 2.0;
        TransmissionOperator data_op(scenario_mesh(s, s.geometry, dh), g_, s.geometry.size() + 1);
        data_.emplace(data_op.solve(ConductivityField(s.geometry)));
    }

    double operator()(const std::vector<double>& ks)
    {
        if (const auto it = memo_.find(ks); it != memo_.end()) return it->second;
        std::vector<double> sigma{1.0};
        sigma.insert(sigma.end(), ks.begin(), ks.end());
        const auto u = model_.solve(ConductivityField(sigma));
        const double m = boundary_misfit(u, *data_, s_);
        memo_.emplace(ks, m);
        return m;
    }

private:
    const Scenario& s_;
    NeumannData g_;
    TransmissionOperator model_;
    std::optional<DiscreteField> data_;
    std::map<std::vector<double>, double> memo_;
};

std::vector<double> band_grid(double lo, double hi, double step)
{
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    std::vector<double> g;
    for (long i = 0; i <= n; ++i) g.push_back(lo + step * static_cast<double>(i));
    return g;
}

double golden(const std::function<double(double)>& f, double a, double b, double tol)
{
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d, d = c, fd = fc;
            c = b - r * (b - a), fc = f(c);
        } else {
            a = c, c = d, fc = fd;
            d = a + r * (b - a), fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

// box-clamped Nelder-Mead; stops when the simplex spans less than tol in every coordinate
std::vector<double> simplex_minimize(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x0, double lo, double hi, double size, double tol,
                                     int max_iter)
{
    const std::size_t n = x0.size();
    auto clampv = [&](std::vector<double> x) {
        for (auto& v : x) v = std::clamp(v, lo, hi);
        return x;
    };
    std::vector<std::vector<double>> pts{clampv(x0)};
    for (std::size_t i = 0; i < n; ++i) {
        auto x = pts[0];
        x[i] += x[i] + size <= hi ? size : -size;
        pts.push_back(clampv(x));
    }
    std::vector<double> fv;
    for (const auto& p : pts) fv.push_back(f(p));
    auto combo = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = a[i] + t * (b[i] - a[i]);
        return clampv(x);
    };
    for (int it = 0; it < max_iter; ++it) {
        std::vector<std::size_t> idx(n + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        decltype(pts) p2;
        std::vector<double> f2;
        for (auto i : idx) p2.push_back(pts[i]), f2.push_back(fv[i]);
        pts.swap(p2);
        fv.swap(f2);
        double span = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t c = 0; c < n; ++c) span = std::max(span, std::abs(pts[i][c] - pts[0][c]));
        if (span < tol) break;
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < n; ++c) centroid[c] += pts[i][c] / static_cast<double>(n);
        const auto xr = combo(centroid, pts[n], -1.0);
        const double fr = f(xr);
        if (fr < fv[0]) {
            const auto xe = combo(centroid, pts[n], -2.0);
            const double fe = f(xe);
            if (fe < fr)
                pts[n] = xe, fv[n] = fe;
            else
                pts[n] = xr, fv[n] = fr;
        } else if (fr < fv[n - 1]) {
            pts[n] = xr, fv[n] = fr;
        } else {
            const auto xc = fr < fv[n] ? combo(centroid, xr, 0.5) : combo(centroid, pts[n], 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[n])) {
                pts[n] = xc, fv[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    pts[i] = combo(pts[0], pts[i], 0.5);
                    fv[i] = f(pts[i]);
                }
            }
        }
    }
    const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
    return pts[static_cast<std::size_t>(best)];
}

}  // namespace

RecoveryResult recover_contrast(const Scenario& s, const RecoveryOptions& o)
{
    if (!(o.step > 0.0) || !(o.tol > 0.0) || !(o.scale != 0.0) || o.max_sweeps < 1)
        throw Error(ErrorKind::InvalidArgument, "recovery options out of range");
    s.validate();
    const std::size_t n = s.geometry.size();
    std::vector<double> truth;
    for (const auto& layer : s.geometry.layers()) truth.push_back(layer.k);

    MisfitModel misfit(s, o);
    RecoveryResult res;
    res.floor = misfit(truth);
    const auto grid = band_grid(s.band_lo, s.band_hi, o.step);

    std::vector<double> ks(n, 0.0);
    auto trial = [&](std::size_t j, double v, bool share) {
        auto k = ks;
        k[j] = v;
        if (share)
            for (std::size_t m = j + 1; m < n; ++m) k[m] = v;
        return misfit(k);
    };
    auto refine = [&](std::size_t j, double centre, bool share) {
        const double a = std::max(s.band_lo, centre - o.step), b = std::min(s.band_hi, centre + o.step);
        const double x = golden([&](double v) { return trial(j, v, share); }, a, b, o.tol);
        return trial(j, x, share) <= trial(j, centre, share) ? x : centre;
    };

    // sweep 1: full band per layer, outer first
    for (std::size_t j = 0; j < n; ++j) {
        double best = grid.front(), best_m = std::numeric_limits<double>::infinity();
        for (double v : grid) {
            const double m = trial(j, v, true);
            if (m < best_m) best_m = m, best = v;
        }
        ks[j] = refine(j, best, true);
        for (std::size_t m = j + 1; m < n; ++m) ks[m] = ks[j];
        res.order.push_back(j);
    }
    res.sweeps = 1;
    res.converged = n == 1;
    // layers interact through a narrow valley of the misfit; a joint simplex step moves along it
    if (n > 1) ks = simplex_minimize([&](const std::vector<double>& k) { return misfit(k); }, ks, s.band_lo,
                                     s.band_hi, 10.0 * o.step, o.tol, 2000);

    while (!res.converged && res.sweeps < o.max_sweeps) {
        ++res.sweeps;
        double moved = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double old = ks[j];
            double best = old, best_m = trial(j, old, false);
            for (int i = -5; i <= 5; ++i) {
                const double v = std::clamp(old + i * o.step, s.band_lo, s.band_hi);
                const double m = trial(j, v, false);
                if (m < best_m) best_m = m, best = v;
            }
            ks[j] = refine(j, best, false);
            moved = std::max(moved, std::abs(ks[j] - old));
        }
        res.converged = moved < o.tol;
    }

    // final full-band scan per layer with the others held at their estimates
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> scan;
        for (double v : grid) scan.push_back(trial(j, v, false));
        const auto [mn, mx] = std::minmax_element(scan.begin(), scan.end());
        if (!(*mx - *mn > 1e-12 * std::max(*mx, 1e-300)))
            throw Error(ErrorKind::FlatLandscape, "misfit does not vary over the band for layer " + std::to_string(j + 1));
        LayerRecovery lr;
        lr.layer = j;
        lr.k_true = truth[j];
        lr.k_found = ks[j];
        lr.misfit = misfit(ks);
        lr.floor = res.floor;
        lr.at_floor = lr.misfit <= 3.0 * res.floor;
        for (std::size_t i = 0; i < scan.size(); ++i) {
            const bool left = i == 0 || scan[i] < scan[i - 1];
            const bool right = i + 1 == scan.size() || scan[i] < scan[i + 1];
            if (left && right) ++lr.local_minima;
        }
        lr.unique = lr.local_minima == 1;
        const auto arg = static_cast<std::size_t>(mn - scan.begin());
        lr.at_edge = arg == 0 || arg + 1 == scan.size();
        lr.flagged = lr.at_edge && !lr.at_floor;
        res.layers.push_back(lr);
    }
    return res;
}

void write_recovery_csv(std::ostream& os, const RecoveryResult& r)
{
    os << "layer,k_true,k_found,abs_error,misfit,floor,at_floor,local_minima,unique,at_edge\n";
    for (const auto& l : r.layers) {
        os << l.layer + 1 << ',' << format_number(l.k_true) << ',' << format_number(l.k_found) << ','
           << format_number(std::abs(l.k_found - l.k_true)) << ',' << format_number(l.misfit) << ','
           << format_number(l.floor) << ',' << int(l.at_floor) << ',' << l.local_minima << ',' << int(l.unique) << ','
           << int(l.at_edge) << '\n';
    }
}

}  // namespace calderon
