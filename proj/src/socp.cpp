#include "pdg/socp.hpp"

#include <ostream>
#include <vector>

#include "pdg/errors.hpp"

namespace pdg::socp {

LinExpr lin_comb(double a, const LinExpr& u, double b, const LinExpr& v) {
    LinExpr out;
    out.constant = a * u.constant + b * v.constant;
    out.terms.reserve(u.terms.size() + v.terms.size());
    for (const auto& t : u.terms) out.terms.push_back({t.var, a * t.coef});
    for (const auto& t : v.terms) out.terms.push_back({t.var, b * t.coef});
    return out;
}

void ConicProgram::validate() const {
    std::vector<bool> used(num_vars, false);
    for (int i = 0; i < num_vars; ++i) {
        if (cost[i] != 0.0) used[i] = true;
    }
    const auto check_expr = [&](const LinExpr& e) {
        for (const auto& t : e.terms) {
            if (t.var < 0 || t.var >= num_vars) {
                throw InvalidInputError("ConicProgram: variable index out of range");
            }
            if (!std::isfinite(t.coef)) {
                throw InvalidInputError("ConicProgram: non-finite coefficient");
            }
            used[t.var] = true;
        }
        if (!std::isfinite(e.constant)) {
            throw InvalidInputError("ConicProgram: non-finite constant");
        }
    };
    for (const auto& e : eq) check_expr(e);
    for (const auto& e : nonneg) check_expr(e);
    for (const auto& blk : cones) {
        const std::size_t min_rows = blk.type == ConeType::soc ? 2 : 3;
        if (blk.rows.size() < min_rows) {
            throw InvalidInputError("ConicProgram: cone block with too few rows");
        }
        for (const auto& e : blk.rows) check_expr(e);
    }
    for (int i = 0; i < num_vars; ++i) {
        if (!used[i]) {
            throw InvalidInputError("ConicProgram: variable " + std::to_string(i) +
                                    " appears in no constraint or cost");
        }
    }
}

namespace {

void dump_expr(std::ostream& os, const char* tag, const LinExpr& e) {
    os << tag << ' ' << e.constant << ' ' << e.terms.size();
    for (const auto& t : e.terms) os << ' ' << t.var << ' ' << t.coef;
    os << '\n';
}

}  // namespace

void ConicProgram::dump(std::ostream& os) const {
    os << "vars " << num_vars << '\n';
    for (int i = 0; i < num_vars; ++i) {
        if (cost[i] != 0.0) os << "cost " << i << ' ' << cost[i] << '\n';
    }
    for (const auto& e : eq) dump_expr(os, "eq", e);
    for (const auto& e : nonneg) dump_expr(os, "ge", e);
    for (const auto& blk : cones) {
        os << (blk.type == ConeType::soc ? "soc " : "rsoc ") << blk.rows.size() << '\n';
        for (const auto& e : blk.rows) dump_expr(os, "row", e);
    }
    os << "end\n";
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::near_optimal: return "near-optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

}  // namespace pdg::socp
