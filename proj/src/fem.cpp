#include "calderon/fem.hpp"

#include "calderon/error.hpp"
#include "calderon/quadrature.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace calderon {

// ---------------------------------------------------------------------------
// Conductivity

ConductivityField::ConductivityField(const NestedGeometry& geometry)
{
    values_.push_back(1.0);
    for (const auto& layer : geometry.layers()) values_.push_back(layer.k);
}

ConductivityField::ConductivityField(std::vector<double> values) : values_(std::move(values))
{
    if (values_.empty()) throw Error(ErrorKind::InvalidArgument, "conductivity needs at least the background value");
    for (double v : values_)
        if (!(v > 0.0)) throw Error(ErrorKind::InvalidArgument, "conductivity values must be positive");
}

double ConductivityField::operator()(int region) const
{
    if (region < 0 || static_cast<std::size_t>(region) >= values_.size())
        throw Error(ErrorKind::OutOfRange, "region tag " + std::to_string(region) + " has no conductivity");
    return values_[static_cast<std::size_t>(region)];
}

// ---------------------------------------------------------------------------
// Neumann data

NeumannData NeumannData::scalar(Scalar g, std::string name)
{
    NeumannData d;
    d.scalar_ = std::move(g);
    d.name_ = std::move(name);
    return d;
}

NeumannData NeumannData::flux(Flux field, std::string name)
{
    NeumannData d;
    d.flux_ = std::move(field);
    d.name_ = std::move(name);
    return d;
}

NeumannData NeumannData::cosine(Point2 center, int mode, double phase, double amplitude)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.6g*cos(%d*theta%+.6g)", amplitude, mode, phase);
    return scalar(
        [=](const Point2& x) {
            const Point2 d = x - center;
            return amplitude * std::cos(mode * std::atan2(d.y, d.x) + phase);
        },
        buf);
}

double NeumannData::operator()(const Point2& x, const Point2& normal) const
{
    if (scalar_) return scale_ * scalar_(x);
    if (flux_) return scale_ * dot(flux_(x), normal);
    return 0.0;
}

NeumannData NeumannData::scaled(double c) const
{
    NeumannData d = *this;
    d.scale_ *= c;
    return d;
}

namespace {

// Composite 8-point Gauss over the exact boundary; fn receives (g value, arclength weight).
template <class Fn>
void boundary_quadrature(const NeumannData& g, const Domain& domain, Fn&& fn)
{
    const auto& rule = gauss_legendre(8);
    if (domain.is_disk()) {
        const int panels = 256;
        const double r = domain.radius();
        for (int p = 0; p < panels; ++p) {
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double th = 2.0 * M_PI * (p + rule.nodes[q]) / panels;
                const Point2 n = polar(1.0, th);
                fn(g(domain.center() + n * r, n), rule.weights[q] * 2.0 * M_PI * r / panels);
            }
        }
        return;
    }
    const auto& poly = domain.as_polygon();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2 a = poly.vertex(i), b = poly.next(i);
        const Point2 n = normalized(Point2{b.y - a.y, a.x - b.x});
        const int panels = 64;
        const double len = distance(a, b) / panels;
        for (int p = 0; p < panels; ++p)
            for (std::size_t q = 0; q < rule.nodes.size(); ++q)
                fn(g(a + (b - a) * ((p + rule.nodes[q]) / panels), n), rule.weights[q] * len);
    }
}

}  // namespace

double NeumannData::boundary_integral(const Domain& domain) const
{
    double sum = 0.0;
    boundary_quadrature(*this, domain, [&](double v, double w) { sum += v * w; });
    return sum;
}

double NeumannData::boundary_l2_norm(const Domain& domain) const
{
    double sum = 0.0;
    boundary_quadrature(*this, domain, [&](double v, double w) { sum += v * v * w; });
    return std::sqrt(sum);
}

void NeumannData::check_compatible(const Domain& domain) const
{
    const double v = boundary_integral(domain);
    if (std::abs(v) > 1e-10) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "Neumann data has boundary integral %.3e (must vanish)", v);
        throw Error(ErrorKind::IncompatibleData, buf);
    }
}

// ---------------------------------------------------------------------------
// Field

DiscreteField::DiscreteField(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values, ConductivityField sigma)
    : mesh_(std::move(mesh)), values_(std::move(values)), sigma_(std::move(sigma))
{
    if (!mesh_ || static_cast<std::size_t>(values_.size()) != mesh_->num_nodes())
        throw Error(ErrorKind::InvalidArgument, "field size does not match mesh");
    locator_ = std::make_shared<MeshLocator>(*mesh_);
}

Point2 DiscreteField::gradient(std::size_t t) const
{
    const auto& tri = mesh_->triangles[t];
    const Point2 a = mesh_->nodes[tri[0]], b = mesh_->nodes[tri[1]], c = mesh_->nodes[tri[2]];
    const double area2 = cross(b - a, c - a);
    const double ua = value(tri[0]), ub = value(tri[1]), uc = value(tri[2]);
    // grad = sum u_i * rot(-edge opposite i) / (2 area)
    return Point2{ua * (b.y - c.y) + ub * (c.y - a.y) + uc * (a.y - b.y),
                  ua * (c.x - b.x) + ub * (a.x - c.x) + uc * (b.x - a.x)} *
           (1.0 / area2);
}

std::optional<double> DiscreteField::eval(const Point2& p, double tol) const
{
    const auto hit = locator_->locate(p, tol);
    if (!hit) return std::nullopt;
    const auto& tri = mesh_->triangles[hit->triangle];
    return hit->bary[0] * value(tri[0]) + hit->bary[1] * value(tri[1]) + hit->bary[2] * value(tri[2]);
}

std::optional<Point2> DiscreteField::gradient_in_region(const Point2& p, int region, double tol) const
{
    for (const auto& h : locator_->locate_all(p, tol))
        if (mesh_->region[h.triangle] == region) return gradient(static_cast<std::size_t>(h.triangle));
    return std::nullopt;
}

double DiscreteField::boundary_integral() const
{
    double s = 0.0;
    for (const auto& e : mesh_->boundary_edges) {
        if (e.tag != kOuterBoundary) continue;
        s += 0.5 * (value(e.nodes[0]) + value(e.nodes[1])) * distance(mesh_->nodes[e.nodes[0]], mesh_->nodes[e.nodes[1]]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Assembly and solve

Assembly assemble(const Mesh& mesh, const ConductivityField& sigma, const NeumannData& g)
{
    Assembly out;
    const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
    out.triplets.reserve(9 * mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Point2 p[3] = {mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]};
        const double area = 0.5 * cross(p[1] - p[0], p[2] - p[0]);
        if (!(area > 0.0)) throw Error(ErrorKind::MeshResolution, "non-positive triangle area");
        const double k = sigma(mesh.region[t]);
        Point2 e[3];
        for (int i = 0; i < 3; ++i) e[i] = p[(i + 2) % 3] - p[(i + 1) % 3];  // edge opposite i
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) out.triplets.emplace_back(tri[i], tri[j], k * dot(e[i], e[j]) / (4.0 * area));
    }

    out.load = Eigen::VectorXd::Zero(n);
    out.boundary_mass = Eigen::VectorXd::Zero(n);
    const auto& rule = gauss_legendre(4);
    for (const auto& be : mesh.boundary_edges) {
        if (be.tag != kOuterBoundary) continue;
        const Point2 a = mesh.nodes[be.nodes[0]], b = mesh.nodes[be.nodes[1]];
        const double len = distance(a, b);
        const Point2 normal{(b.y - a.y) / len, (a.x - b.x) / len};
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double s = rule.nodes[q];
            const double gv = g(a + (b - a) * s, normal) * rule.weights[q] * len;
            out.load[be.nodes[0]] += gv * (1.0 - s);
            out.load[be.nodes[1]] += gv * s;
        }
        out.boundary_mass[be.nodes[0]] += 0.5 * len;
        out.boundary_mass[be.nodes[1]] += 0.5 * len;
    }
    return out;
}

namespace {

struct PcgResult {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

PcgResult jacobi_pcg(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a, const Eigen::VectorXd& rhs,
                     Eigen::VectorXd& x, double tol, std::size_t max_it)
{
    const Eigen::VectorXd inv_diag = a.diagonal().cwiseInverse();
    Eigen::VectorXd r = rhs - a * x;
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        x.setZero();
        return {0, 0.0};
    }
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    Eigen::VectorXd ap(x.size());
    double rz = r.dot(z);
    PcgResult res;
    for (res.iterations = 0; res.iterations < max_it; ++res.iterations) {
        res.relative_residual = r.norm() / rhs_norm;
        if (res.relative_residual <= tol) return res;
        ap.noalias() = a * p;
        const double alpha = rz / p.dot(ap);
        x += alpha * p;
        r -= alpha * ap;
        // Periodic true-residual refresh keeps roundoff from stalling the last digits.
        if (res.iterations % 200 == 199) r = rhs - a * x;
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    res.relative_residual = (rhs - a * x).norm() / rhs_norm;
    return res;
}

}  // namespace

DiscreteField solve_transmission(std::shared_ptr<const Mesh> mesh, const ConductivityField& sigma,
                                 const NeumannData& g, const SolveOptions& options)
{
    if (!mesh || mesh->num_triangles() == 0) throw Error(ErrorKind::InvalidArgument, "empty mesh");
    for (int r : mesh->region)
        if (static_cast<std::size_t>(r) >= sigma.regions())
            throw Error(ErrorKind::InvalidArgument, "mesh region without conductivity");

    const Assembly as = assemble(*mesh, sigma, g);
    const auto n = static_cast<Eigen::Index>(mesh->num_nodes());
    Eigen::SparseMatrix<double, Eigen::RowMajor> a(n, n);
    a.setFromTriplets(as.triplets.begin(), as.triplets.end());

    // Bordered system [A c; c^T 0][u; lambda] = [b; 0]. Since A 1 = 0 the multiplier is fixed by
    // the row sums, and u follows from the consistent singular system up to a constant.
    const double lambda = as.load.sum() / as.boundary_mass.sum();
    const Eigen::VectorXd rhs = as.load - lambda * as.boundary_mass;

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    const std::size_t max_it = options.max_iterations ? options.max_iterations : 20 * static_cast<std::size_t>(n) + 100;
    const PcgResult pcg = jacobi_pcg(a, rhs, u, options.rel_tol, max_it);
    if (!(pcg.relative_residual <= options.rel_tol)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "conjugate gradients stalled at relative residual %.3e after %zu iterations",
                      pcg.relative_residual, pcg.iterations);
        throw Error(ErrorKind::SolverFailure, buf);
    }
    u.array() -= as.boundary_mass.dot(u) / as.boundary_mass.sum();

    SolveReport rep;
    rep.iterations = pcg.iterations;
    rep.relative_residual = pcg.relative_residual;
    rep.multiplier = lambda;
    rep.energy = u.dot(a * u);
    rep.boundary_work = as.load.dot(u);

    DiscreteField field(std::move(mesh), std::move(u), sigma);
    field.set_report(rep);
    return field;
}

TransmissionOperator::TransmissionOperator(std::shared_ptr<const Mesh> mesh, const NeumannData& g, std::size_t regions)
    : mesh_(std::move(mesh))
{
    if (!mesh_ || mesh_->num_triangles() == 0) throw Error(ErrorKind::InvalidArgument, "empty mesh");
    const auto n = static_cast<Eigen::Index>(mesh_->num_nodes());
    // assemble() emits nine triplets per triangle in triangle order
    const Assembly as = assemble(*mesh_, ConductivityField(std::vector<double>(regions, 1.0)), g);
    std::vector<std::vector<Eigen::Triplet<double>>> split(regions);
    for (std::size_t i = 0; i < as.triplets.size(); ++i)
        split[static_cast<std::size_t>(mesh_->region[i / 9])].push_back(as.triplets[i]);
    for (const auto& tr : split) {
        Eigen::SparseMatrix<double> a(n, n);
        a.setFromTriplets(tr.begin(), tr.end());
        blocks_.push_back(std::move(a));
    }
    multiplier_ = as.load.sum() / as.boundary_mass.sum();
    rhs_ = as.load - multiplier_ * as.boundary_mass;
    boundary_mass_ = as.boundary_mass;
    Eigen::SparseMatrix<double> pattern = blocks_[0];
    for (std::size_t r = 1; r < blocks_.size(); ++r) pattern += blocks_[r];
    pattern.coeffRef(0, 0) += 1.0;
    ldlt_.analyzePattern(pattern);
}

DiscreteField TransmissionOperator::solve(const ConductivityField& sigma)
{
    if (sigma.regions() != blocks_.size()) throw Error(ErrorKind::InvalidArgument, "conductivity has the wrong number of regions");
    Eigen::SparseMatrix<double> a = sigma(0) * blocks_[0];
    for (std::size_t r = 1; r < blocks_.size(); ++r) a += sigma(static_cast<int>(r)) * blocks_[r];
    // Pinning node 0 leaves the consistent system unchanged: summing the rows forces u_0 = 0.
    a.coeffRef(0, 0) += 1.0;
    ldlt_.factorize(a);
    if (ldlt_.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "sparse LDLT factorization failed");
    Eigen::VectorXd u = ldlt_.solve(rhs_);
    a.coeffRef(0, 0) -= 1.0;
    SolveReport rep;
    const double bn = rhs_.norm();
    rep.relative_residual = bn > 0.0 ? (a * u - rhs_).norm() / bn : 0.0;
    u.array() -= boundary_mass_.dot(u) / boundary_mass_.sum();
    rep.multiplier = multiplier_;
    rep.energy = u.dot(a * u);
    rep.boundary_work = (rhs_ + multiplier_ * boundary_mass_).dot(u);
    DiscreteField field(mesh_, std::move(u), sigma);
    field.set_report(rep);
    return field;
}

// ---------------------------------------------------------------------------
// Interface residual

double flux_jump_residual(const DiscreteField& u, int interface)
{
    const Mesh& m = u.mesh();
    if (interface < 1 || static_cast<std::size_t>(interface) >= u.conductivity().regions())
        throw Error(ErrorKind::OutOfRange, "interface index " + std::to_string(interface) + " out of range");

    std::map<std::pair<int, int>, int> left_of;  // directed edge -> triangle on its left
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles[t];
        for (int i = 0; i < 3; ++i) left_of[{tri[i], tri[(i + 1) % 3]}] = static_cast<int>(t);
    }
    double sum = 0.0;
    Point2 lo{1e300, 1e300}, hi{-1e300, -1e300};
    bool any = false;
    for (const auto& e : m.boundary_edges) {
        if (e.tag != interface) continue;
        any = true;
        const Point2 a = m.nodes[e.nodes[0]], b = m.nodes[e.nodes[1]];
        lo = {std::min({lo.x, a.x, b.x}), std::min({lo.y, a.y, b.y})};
        hi = {std::max({hi.x, a.x, b.x}), std::max({hi.y, a.y, b.y})};
        const auto in = left_of.find({e.nodes[0], e.nodes[1]});
        const auto out = left_of.find({e.nodes[1], e.nodes[0]});
        if (in == left_of.end() || out == left_of.end())
            throw Error(ErrorKind::InconsistentGeometry, "interface edge is missing a neighbor");
        const double len = distance(a, b);
        const Point2 n{(b.y - a.y) / len, (a.x - b.x) / len};
        const double k_in = u.conductivity()(m.region[in->second]);
        const double k_out = u.conductivity()(m.region[out->second]);
        const double jump = k_in * dot(u.gradient(in->second), n) - k_out * dot(u.gradient(out->second), n);
        sum += len * jump * jump;
    }
    if (!any) throw Error(ErrorKind::OutOfRange, "no edges carry interface tag " + std::to_string(interface));
    return std::sqrt(sum * norm(hi - lo));
}

// ---------------------------------------------------------------------------

Eigen::VectorXd interpolate(const Mesh& mesh, const std::function<double(const Point2&)>& f)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) v[static_cast<Eigen::Index>(i)] = f(mesh.nodes[i]);
    return v;
}

double l2_error(const DiscreteField& u, const std::function<double(const Point2&)>& exact)
{
    const Mesh& m = u.mesh();
    double sum = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles[t];
        const double area = m.signed_area(t);
        for (int i = 0; i < 3; ++i) {
            const int a = tri[i], b = tri[(i + 1) % 3];
            const Point2 mid = (m.nodes[a] + m.nodes[b]) * 0.5;
            const double d = 0.5 * (u.value(a) + u.value(b)) - exact(mid);
            sum += area / 3.0 * d * d;
        }
    }
    return std::sqrt(sum);
}

void write_field(std::ostream& os, const DiscreteField& u)
{
    char buf[64];
    for (std::size_t i = 0; i < u.mesh().num_nodes(); ++i) {
        std::snprintf(buf, sizeof buf, "val %zu %.17g\n", i, u.value(i));
        os << buf;
    }
}

Eigen::VectorXd read_field(std::istream& is)
{
    std::vector<double> vals;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kind;
        std::size_t i = 0;
        double v = 0.0;
        ls >> kind >> i >> v;
        if (!ls || kind != "val" || i != vals.size()) throw Error(ErrorKind::Config, "malformed field line: " + line);
        vals.push_back(v);
    }
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace calderon
