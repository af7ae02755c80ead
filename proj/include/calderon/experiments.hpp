#pragma once

#include "calderon/boundary.hpp"
#include "calderon/cgo.hpp"
#include "calderon/corner.hpp"
#include "calderon/fem.hpp"
#include "calderon/geometry.hpp"
#include "calderon/mesh.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace calderon {

/// Flat `section.key = value` text; `#` starts a comment.
class Config {
public:
    static Config parse(std::istream& in, const std::string& source = "<config>");
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& text(const std::string& key) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    /// Numbers separated by blanks or commas.
    std::vector<double> numbers(const std::string& key) const;
    bool flag(const std::string& key, bool fallback) const;
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Worker threads: CALDERON_WORKERS when it holds a positive integer, else the hardware count.
std::size_t worker_count();
/// Runs body(i) for every i in [0, n) on the worker pool. The failure with the smallest index is
/// rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// %.17g
std::string format_number(double v);

struct Scenario {
    std::string name = "scenario";
    Domain domain = Domain::disk({0.0, 0.0}, 1.0);
    NestedGeometry geometry;    // D, or the nested layers with their true contrasts
    NestedGeometry comparison;  // D'
    NeumannData g = NeumannData::cosine({0.0, 0.0});
    BoundaryArc gamma0{-M_PI / 4.0, M_PI / 4.0};
    double target_h = 0.02;
    bool graded = true;
    ClassDParams params{0.5, 2.5, 0.6, 0.3, 0.25, 4.0};
    std::vector<double> tau_factors{2.0};   // tau = factor * tau0
    std::vector<double> sweep_t;
    Point2 sweep_direction{1.0, 0.0};
    double band_lo = 0.25, band_hi = 4.0;
    std::uint64_t seed = 0;
    bool svg = false;

    static Scenario from_config(const Config& config);
    /// Square D = [-0.4, 0.2] x [-0.3, 0.3] with k = 2 against D + (0.2, 0) with k' = 3 in the
    /// unit disk, g = cos(theta).
    static Scenario bundled();
    /// Throws InvalidArgument when a polygon fails its class clauses or gamma0 is empty.
    void validate() const;
};

std::shared_ptr<const Mesh> scenario_mesh(const Scenario& s, const NestedGeometry& geometry, double h);
DiscreteField scenario_solve(const Scenario& s, const NestedGeometry& geometry, double h, const NeumannData& g);
/// H^{1/2}(gamma0) norm of the trace difference.
double boundary_misfit(const DiscreteField& u, const DiscreteField& up, const Scenario& s);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct BetaFit {
    double C = 0.0;
    double beta = 0.0;
    double rms = 0.0;
    std::size_t rows = 0;
};
/// Least-squares fit of d = C (ln|ln eps|)^-beta; nullopt with fewer than 4 usable rows.
std::optional<BetaFit> fit_beta(const std::vector<double>& eps, const std::vector<double>& d);

struct SweepRecord {
    double t = 0.0;
    double eps = 0.0;
    double d_h = 0.0;
    double h = 0.0;       // contour radius min(d_h / 2, l / 5, delta0)
    double tau_e = 0.0;   // h^-1 delta(eps)^-1/2, delta(eps) = (ln|ln eps|)^-eta_m
    bool reliable = false;
    double seconds = 0.0;
};

struct SweepResult {
    std::string name;
    std::vector<SweepRecord> records;
    double floor = 0.0;   // misfit between meshes at h and h/2 for D alone
    double eta_m = 0.0;
    std::optional<BetaFit> beta;
    double rank_correlation = 0.0;
    bool monotone = false;
};

/// D fixed, D'_t = D + t * direction with the comparison contrast, one row per t.
SweepResult run_stability_sweep(const Scenario& s);
void write_sweep_csv(std::ostream& os, const SweepResult& r);
void write_sweep_report(std::ostream& os, const SweepResult& r);
/// eps against d_H on log axes.
void write_sweep_svg(std::ostream& os, const SweepResult& r);

struct TauRow {
    double tau = 0.0;
    cplx lhs, rhs, inner, outer;
    double residual = 0.0;
    double lower_bound = 0.0;   // K Gamma(eta) sin(a eta) tau^-eta
    double ub_sing = 0.0;       // K tau^-eta exp(-alpha' tau h / 2)
    double ub_reg_tau = 0.0;    // tau^-1 R
    double ub_reg_h = 0.0;      // h exp(-alpha' tau h) R
    double ub_inner = 0.0;      // h exp(-alpha' tau h) (sup |d_n w| + tau sup |w|) on the inner arc
    double ub_outer = 0.0;      // h (sup |d_n w| + tau sup |w|) on the outer arc
    double delta_term = 0.0;    // h tau^(eta + 1) delta(eps)
    bool above_inner = false;   // lower bound exceeds ub_inner
    bool delta_dominates = false;
    bool admissible = false;    // above_inner and not delta_dominates
};

struct TauBalance {
    std::vector<TauRow> rows;
    Point2 corner;
    SingularExponent se;
    CornerFit fit;          // R above is hypot(c1, c2) of this fit, a stand-in for the regular part
    double h = 0.0;
    double tau0 = 0.0;
    double epsilon = 0.0;
    double eta_m = 0.0;
    double tau_e = 0.0;
    bool tau_e_above_tau0 = false;
    double lhs_slope = 0.0;   // decay_fit of |lhs| over the grid
};

/// Runs on the first comparison pair of the scenario over tau = factor * tau0.
TauBalance run_tau_balance(const Scenario& s);
TauBalance run_tau_balance(const Scenario& s, const DiscreteField& u, const DiscreteField& up);
void write_probe_csv(std::ostream& os, const TauBalance& b);
void write_tau_balance_csv(std::ostream& os, const TauBalance& b);

struct RecoveryOptions {
    double step = 0.01;
    double tol = 1e-4;
    double scale = 1.0;     // multiplies g for both data and model
    int max_sweeps = 8;
    double data_h = 0.0;    // mesh size of the data solve; 0 picks target_h / 2
};

struct LayerRecovery {
    std::size_t layer = 0;
    double k_true = 0.0;
    double k_found = 0.0;
    double misfit = 0.0;
    double floor = 0.0;       // misfit at the true contrasts
    bool at_floor = false;    // misfit <= 3 floor
    bool unique = false;      // one local minimum on the final full-band scan
    bool at_edge = false;
    bool flagged = false;     // minimizer on the band edge above the floor: truth likely outside the band
    std::size_t local_minima = 0;
};

struct RecoveryResult {
    std::vector<LayerRecovery> layers;
    std::vector<std::size_t> order;   // layer indices in the order they were first fixed
    int sweeps = 0;
    bool converged = false;
    double floor = 0.0;
};

/// Layers are fixed outer first. Each trial solve uses the current estimates for the other layers;
/// layers not yet visited share the trial value. Sweeps repeat until no contrast moves more
/// than the tolerance.
RecoveryResult recover_contrast(const Scenario& s, const RecoveryOptions& options = {});
void write_recovery_csv(std::ostream& os, const RecoveryResult& r);

}  // namespace calderon
