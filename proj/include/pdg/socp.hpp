#pragma once

#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pdg::socp {

struct LinTerm {
    int var;
    double coef;
};

/// Sparse affine expression constant + sum coef_i * z_i.
struct LinExpr {
    double constant{0.0};
    std::vector<LinTerm> terms;

    LinExpr() = default;
    explicit LinExpr(double c) : constant(c) {}
    static LinExpr variable(int var, double coef = 1.0) {
        LinExpr e;
        e.terms.push_back({var, coef});
        return e;
    }
    LinExpr& add(int var, double coef) {
        terms.push_back({var, coef});
        return *this;
    }
};

/// a * u + b * v applied term-by-term.
LinExpr lin_comb(double a, const LinExpr& u, double b, const LinExpr& v);

enum class ConeType {
    soc,   // ||rows[1..]|| <= rows[0]
    rsoc   // 2 * rows[0] * rows[1] >= ||rows[2..]||^2, rows[0], rows[1] >= 0
};

struct ConeBlock {
    ConeType type;
    std::vector<LinExpr> rows;
};

/// A cone program over a flat variable vector: linear cost, affine
/// equalities, nonnegative-orthant rows and second-order cone blocks
/// (standard and rotated).
struct ConicProgram {
    int num_vars{0};
    std::vector<double> cost;
    std::vector<LinExpr> eq;      // expr == 0
    std::vector<LinExpr> nonneg;  // expr >= 0
    std::vector<ConeBlock> cones;

    int add_var() {
        cost.push_back(0.0);
        return num_vars++;
    }
    int add_vars(int k) {
        const int first = num_vars;
        for (int i = 0; i < k; ++i) add_var();
        return first;
    }
    void add_cost(int var, double coef) { cost.at(var) += coef; }
    void add_eq(LinExpr e) { eq.push_back(std::move(e)); }
    void add_nonneg(LinExpr e) { nonneg.push_back(std::move(e)); }
    void add_soc(std::vector<LinExpr> rows) {
        cones.push_back({ConeType::soc, std::move(rows)});
    }
    void add_rsoc(std::vector<LinExpr> rows) {
        cones.push_back({ConeType::rsoc, std::move(rows)});
    }

    /// Checks index ranges, cone arities, and that every variable appears in
    /// at least one constraint or the cost. Throws InvalidInputError.
    void validate() const;

    /// Plain-text sparse dump for offline reproduction. One line per row:
    ///   vars N
    ///   cost <var> <coef>            (per nonzero)
    ///   eq <const> <nterms> (<var> <coef>)*
    ///   ge <const> <nterms> (<var> <coef>)*
    ///   soc <dim> | rsoc <dim>, followed by <dim> "row ..." lines
    ///   end
    void dump(std::ostream& os) const;
};

enum class SolveStatus { optimal, near_optimal, infeasible, numerical_failure };

const char* to_string(SolveStatus s);

struct SocpSolution {
    SolveStatus status{SolveStatus::numerical_failure};
    std::string detail;  // verbatim backend condition (e.g. "dual infeasible")
    Eigen::VectorXd x;
    double objective{std::numeric_limits<double>::quiet_NaN()};
    int iterations{0};
    double gap{0.0};
    double rel_gap{0.0};
    double primal_res{0.0};
    double dual_res{0.0};
};

/// Narrow conic backend interface: submit a cone program, receive primal
/// values and a status.
class SocpBackend {
  public:
    virtual ~SocpBackend() = default;
    virtual SocpSolution solve(const ConicProgram& prog) = 0;
    virtual std::string name() const = 0;
};

struct IpmSettings {
    int max_iters{60};
    double feas_tol{1e-9};
    double abs_gap_tol{1e-9};
    double rel_gap_tol{1e-9};
    double near_tol_factor{1e4};  // relaxed acceptance when progress stalls
    double static_reg{1e-8};
    int refine_steps{2};
    bool verbose{false};
};

/// Primal-dual interior-point solver on the homogeneous self-dual
/// embedding with Nesterov-Todd scaling and a Mehrotra predictor-corrector,
/// specialized to nonnegative-orthant and second-order cones.
class InteriorPointSolver final : public SocpBackend {
  public:
    explicit InteriorPointSolver(IpmSettings settings = {});
    ~InteriorPointSolver() override;
    SocpSolution solve(const ConicProgram& prog) override;
    std::string name() const override { return "pdg-ipm"; }

  private:
    IpmSettings settings_;
    struct SymbolicCache;
    std::unique_ptr<SymbolicCache> cache_;
};

}  // namespace pdg::socp
