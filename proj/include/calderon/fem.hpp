#pragma once

#include "calderon/geometry.hpp"
#include "calderon/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace calderon {

/// Piecewise-constant conductivity indexed by region tag; region 0 is the background with value 1.
class ConductivityField {
public:
    ConductivityField() : values_{1.0} {}
    explicit ConductivityField(const NestedGeometry& geometry);
    explicit ConductivityField(std::vector<double> values);

    double operator()(int region) const;
    std::size_t regions() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> values_;
};

/// Neumann datum g on the outer boundary, either a scalar function of position or the normal
/// component of a vector field.
class NeumannData {
public:
    using Scalar = std::function<double(const Point2&)>;
    using Flux = std::function<Point2(const Point2&)>;

    static NeumannData scalar(Scalar g, std::string name = "g");
    static NeumannData flux(Flux field, std::string name = "grad");
    /// amplitude * cos(mode * theta + phase), theta the polar angle about center.
    static NeumannData cosine(Point2 center, int mode = 1, double phase = 0.0, double amplitude = 1.0);

    double operator()(const Point2& x, const Point2& normal) const;
    NeumannData scaled(double c) const;
    const std::string& name() const { return name_; }

    /// Boundary integral of g over the exact domain boundary.
    double boundary_integral(const Domain& domain) const;
    double boundary_l2_norm(const Domain& domain) const;
    /// Throws IncompatibleData unless the boundary integral vanishes within 1e-10.
    void check_compatible(const Domain& domain) const;

private:
    Scalar scalar_;
    Flux flux_;
    double scale_ = 1.0;
    std::string name_;
};

struct SolveOptions {
    double rel_tol = 1e-10;
    std::size_t max_iterations = 0;  // 0 picks 20 * number of nodes
};

struct SolveReport {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
    double multiplier = 0.0;     // Lagrange multiplier of the boundary-mean constraint
    double energy = 0.0;         // integral of sigma |grad u|^2
    double boundary_work = 0.0;  // boundary integral of g u
};

/// Continuous piecewise-linear field on a mesh.
class DiscreteField {
public:
    DiscreteField(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values, ConductivityField sigma = {});

    const Mesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    const Eigen::VectorXd& values() const { return values_; }
    double value(std::size_t node) const { return values_[static_cast<Eigen::Index>(node)]; }
    const ConductivityField& conductivity() const { return sigma_; }
    const MeshLocator& locator() const { return *locator_; }
    const SolveReport& report() const { return report_; }
    void set_report(const SolveReport& r) { report_ = r; }

    Point2 gradient(std::size_t triangle) const;
    std::optional<double> eval(const Point2& p, double tol = 1e-10) const;
    /// Gradient on the triangle of the given region that contains p.
    std::optional<Point2> gradient_in_region(const Point2& p, int region, double tol = 1e-10) const;
    /// Boundary integral of u over the outer boundary of the mesh.
    double boundary_integral() const;

private:
    std::shared_ptr<const Mesh> mesh_;
    Eigen::VectorXd values_;
    ConductivityField sigma_;
    std::shared_ptr<const MeshLocator> locator_;
    SolveReport report_;
};

/// Neumann transmission solve with zero boundary mean, by Jacobi-preconditioned conjugate gradients.
DiscreteField solve_transmission(std::shared_ptr<const Mesh> mesh, const ConductivityField& sigma,
                                 const NeumannData& g, const SolveOptions& options = {});

/// Repeated solves on one mesh with fixed Neumann data and varying conductivity. Region stiffness
/// blocks are assembled once; a sparse LDLT of the stiffness matrix with one node pinned reuses
/// its symbolic analysis across solves. Not safe to share between threads.
class TransmissionOperator {
public:
    TransmissionOperator(std::shared_ptr<const Mesh> mesh, const NeumannData& g, std::size_t regions);
    DiscreteField solve(const ConductivityField& sigma);

private:
    std::shared_ptr<const Mesh> mesh_;
    std::vector<Eigen::SparseMatrix<double>> blocks_;
    Eigen::VectorXd rhs_;
    Eigen::VectorXd boundary_mass_;
    double multiplier_ = 0.0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

/// Stiffness matrix action and load vector, exposed for tests.
struct Assembly {
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd load;
    Eigen::VectorXd boundary_mass;  // integral of each hat function over the outer boundary
};
Assembly assemble(const Mesh& mesh, const ConductivityField& sigma, const NeumannData& g);

/// Weighted L2 norm over interface j (1-based layer index) of the flux jump
/// k_in grad u_in . n - k_out grad u_out . n, scaled by the diameter of the layer.
double flux_jump_residual(const DiscreteField& u, int interface);

/// Nodal interpolation of a function.
Eigen::VectorXd interpolate(const Mesh& mesh, const std::function<double(const Point2&)>& f);
/// L2 error against a function, by a 3-point rule per triangle.
double l2_error(const DiscreteField& u, const std::function<double(const Point2&)>& exact);

void write_field(std::ostream& os, const DiscreteField& u);
Eigen::VectorXd read_field(std::istream& is);

}  // namespace calderon
