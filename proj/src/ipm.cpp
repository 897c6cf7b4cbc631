#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "pdg/errors.hpp"
#include "pdg/socp.hpp"

namespace pdg::socp {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Vec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// min c'x  s.t.  A x = b,  G x + s = h,  s in K = R+^l x SOC(d_1) x ...
struct StandardForm {
    int n{0};
    int p{0};
    int m{0};
    int l{0};
    std::vector<int> soc_dims;
    Vec c, b, h;
    SpMat a, g;
    double cost_scale{1.0};  // c is divided by this; objectives multiply back
    Vec col_scale;           // x_original = col_scale .* x_solved

    int cone_degree() const { return l + static_cast<int>(soc_dims.size()); }
};

StandardForm to_standard_form(const ConicProgram& prog) {
    StandardForm sf;
    sf.n = prog.num_vars;
    sf.c = Eigen::Map<const Vec>(prog.cost.data(), prog.num_vars);

    sf.p = static_cast<int>(prog.eq.size());
    sf.b.resize(sf.p);
    std::vector<Triplet> at;
    for (int i = 0; i < sf.p; ++i) {
        const LinExpr& e = prog.eq[i];
        sf.b(i) = -e.constant;
        for (const auto& t : e.terms) at.emplace_back(i, t.var, t.coef);
    }
    sf.a.resize(sf.p, sf.n);
    sf.a.setFromTriplets(at.begin(), at.end());

    // s-rows: orthant first, then cone blocks with rotated cones lowered to
    // standard ones via (u, v, w) -> ((u+v)/sqrt2, (u-v)/sqrt2, w).
    std::vector<LinExpr> rows(prog.nonneg.begin(), prog.nonneg.end());
    sf.l = static_cast<int>(rows.size());
    for (const auto& blk : prog.cones) {
        if (blk.type == ConeType::soc) {
            sf.soc_dims.push_back(static_cast<int>(blk.rows.size()));
            for (const auto& r : blk.rows) rows.push_back(r);
        } else {
            const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
            sf.soc_dims.push_back(static_cast<int>(blk.rows.size()));
            rows.push_back(lin_comb(inv_sqrt2, blk.rows[0], inv_sqrt2, blk.rows[1]));
            rows.push_back(lin_comb(inv_sqrt2, blk.rows[0], -inv_sqrt2, blk.rows[1]));
            for (std::size_t i = 2; i < blk.rows.size(); ++i) rows.push_back(blk.rows[i]);
        }
    }
    sf.m = static_cast<int>(rows.size());
    sf.h.resize(sf.m);
    std::vector<Triplet> gt;
    for (int i = 0; i < sf.m; ++i) {
        sf.h(i) = rows[i].constant;
        for (const auto& t : rows[i].terms) gt.emplace_back(i, t.var, -t.coef);
    }
    sf.g.resize(sf.m, sf.n);
    sf.g.setFromTriplets(gt.begin(), gt.end());

    // Ruiz equilibration of [A; G]. Rows of one SOC block share a single
    // factor so the cone geometry is preserved; columns rescale the
    // variables, undone at extraction through col_scale.
    sf.col_scale = Vec::Ones(sf.n);
    Vec ea = Vec::Ones(sf.p);
    Vec eg = Vec::Ones(sf.m);
    for (int pass = 0; pass < 10; ++pass) {
        Vec row_a = Vec::Zero(sf.p), row_g = Vec::Zero(sf.m), col = Vec::Zero(sf.n);
        for (int k = 0; k < sf.a.outerSize(); ++k) {
            for (SpMat::InnerIterator it(sf.a, k); it; ++it) {
                const double v = std::abs(it.value());
                row_a(it.row()) = std::max(row_a(it.row()), v);
                col(it.col()) = std::max(col(it.col()), v);
            }
        }
        for (int k = 0; k < sf.g.outerSize(); ++k) {
            for (SpMat::InnerIterator it(sf.g, k); it; ++it) {
                const double v = std::abs(it.value());
                row_g(it.row()) = std::max(row_g(it.row()), v);
                col(it.col()) = std::max(col(it.col()), v);
            }
        }
        // one factor per cone block
        {
            int off = sf.l;
            for (const int d : sf.soc_dims) {
                const double blk = row_g.segment(off, d).maxCoeff();
                row_g.segment(off, d).setConstant(blk);
                off += d;
            }
        }
        const auto inv_sqrt = [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; };
        Vec ra = row_a.unaryExpr(inv_sqrt);
        Vec rg = row_g.unaryExpr(inv_sqrt);
        Vec dc = col.unaryExpr(inv_sqrt);
        ea = ea.cwiseProduct(ra);
        eg = eg.cwiseProduct(rg);
        sf.col_scale = sf.col_scale.cwiseProduct(dc);
        for (int k = 0; k < sf.a.outerSize(); ++k) {
            for (SpMat::InnerIterator it(sf.a, k); it; ++it) {
                it.valueRef() *= ra(it.row()) * dc(it.col());
            }
        }
        for (int k = 0; k < sf.g.outerSize(); ++k) {
            for (SpMat::InnerIterator it(sf.g, k); it; ++it) {
                it.valueRef() *= rg(it.row()) * dc(it.col());
            }
        }
    }
    sf.b = sf.b.cwiseProduct(ea);
    sf.h = sf.h.cwiseProduct(eg);
    sf.c = sf.c.cwiseProduct(sf.col_scale);
    // Normalizing the cost keeps the dual initialization and the barrier
    // parameter on the same scale as the constraint rows; the primal
    // solution is unchanged.
    sf.cost_scale = std::max(1.0, sf.c.cwiseAbs().maxCoeff());
    sf.c /= sf.cost_scale;
    return sf;
}

// Nesterov-Todd scaling per cone. For the orthant W = diag(sqrt(s/z));
// for a second-order cone W is the hyperbolic Householder form
// eta * [wbar0, wbar1'; wbar1, I + wbar1 wbar1'/(1+wbar0)].
struct SocScale {
    double eta{1.0};
    Vec wbar;
    Eigen::MatrixXd w;
    Eigen::MatrixXd w2;
};

struct Scalings {
    Vec w2_orth;  // s_i / z_i
    Vec w_orth;   // sqrt(s_i / z_i)
    std::vector<SocScale> socs;
    Vec lambda;  // scaled point, lambda = W z = W^-1 s
};

bool compute_scalings(const StandardForm& sf, const Vec& s, const Vec& z, Scalings& sc) {
    sc.w_orth.resize(sf.l);
    sc.w2_orth.resize(sf.l);
    sc.lambda.resize(sf.m);
    for (int i = 0; i < sf.l; ++i) {
        if (s(i) <= 0.0 || z(i) <= 0.0) return false;
        sc.w2_orth(i) = s(i) / z(i);
        sc.w_orth(i) = std::sqrt(sc.w2_orth(i));
        sc.lambda(i) = std::sqrt(s(i) * z(i));
    }
    sc.socs.assign(sf.soc_dims.size(), SocScale{});
    int off = sf.l;
    for (std::size_t ci = 0; ci < sf.soc_dims.size(); ++ci) {
        const int d = sf.soc_dims[ci];
        const auto sb = s.segment(off, d);
        const auto zb = z.segment(off, d);
        const double rs2 = sb(0) * sb(0) - sb.tail(d - 1).squaredNorm();
        const double rz2 = zb(0) * zb(0) - zb.tail(d - 1).squaredNorm();
        if (rs2 <= 0.0 || rz2 <= 0.0 || sb(0) <= 0.0 || zb(0) <= 0.0) return false;
        const double rs = std::sqrt(rs2);
        const double rz = std::sqrt(rz2);
        const Vec sbar = sb / rs;
        const Vec zbar = zb / rz;
        const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
        SocScale& ss = sc.socs[ci];
        ss.wbar.resize(d);
        ss.wbar(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
        ss.wbar.tail(d - 1) = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
        ss.eta = std::sqrt(rs / rz);
        const Vec w1 = ss.wbar.tail(d - 1);
        ss.w.resize(d, d);
        ss.w(0, 0) = ss.wbar(0);
        ss.w.block(0, 1, 1, d - 1) = w1.transpose();
        ss.w.block(1, 0, d - 1, 1) = w1;
        ss.w.block(1, 1, d - 1, d - 1) =
            Eigen::MatrixXd::Identity(d - 1, d - 1) + w1 * w1.transpose() / (1.0 + ss.wbar(0));
        ss.w *= ss.eta;
        ss.w2 = ss.w * ss.w;
        sc.lambda.segment(off, d) = ss.w * zb;
        off += d;
    }
    return true;
}

Vec apply_w(const StandardForm& sf, const Scalings& sc, const Vec& r) {
    Vec out(sf.m);
    out.head(sf.l) = sc.w_orth.cwiseProduct(r.head(sf.l));
    int off = sf.l;
    for (std::size_t ci = 0; ci < sf.soc_dims.size(); ++ci) {
        const int d = sf.soc_dims[ci];
        out.segment(off, d) = sc.socs[ci].w * r.segment(off, d);
        off += d;
    }
    return out;
}

Vec apply_winv(const StandardForm& sf, const Scalings& sc, const Vec& r) {
    Vec out(sf.m);
    out.head(sf.l) = r.head(sf.l).cwiseQuotient(sc.w_orth);
    int off = sf.l;
    for (std::size_t ci = 0; ci < sf.soc_dims.size(); ++ci) {
        const int d = sf.soc_dims[ci];
        const SocScale& ss = sc.socs[ci];
        const Vec rb = r.segment(off, d);
        const Vec w1 = ss.wbar.tail(d - 1);
        Vec o(d);
        o(0) = ss.wbar(0) * rb(0) - w1.dot(rb.tail(d - 1));
        o.tail(d - 1) = -rb(0) * w1 + rb.tail(d - 1) +
                        w1 * (w1.dot(rb.tail(d - 1)) / (1.0 + ss.wbar(0)));
        out.segment(off, d) = o / ss.eta;
        off += d;
    }
    return out;
}

Vec jordan_mul(const StandardForm& sf, const Vec& u, const Vec& v) {
    Vec out(sf.m);
    out.head(sf.l) = u.head(sf.l).cwiseProduct(v.head(sf.l));
    int off = sf.l;
    for (const int d : sf.soc_dims) {
        const auto ub = u.segment(off, d);
        const auto vb = v.segment(off, d);
        out(off) = ub.dot(vb);
        out.segment(off + 1, d - 1) = ub(0) * vb.tail(d - 1) + vb(0) * ub.tail(d - 1);
        off += d;
    }
    return out;
}

// Solves lambda o x = d within each cone block.
Vec jordan_div(const StandardForm& sf, const Vec& lambda, const Vec& d) {
    Vec out(sf.m);
    out.head(sf.l) = d.head(sf.l).cwiseQuotient(lambda.head(sf.l));
    int off = sf.l;
    for (const int dim : sf.soc_dims) {
        const auto lb = lambda.segment(off, dim);
        const auto db = d.segment(off, dim);
        double det = lb(0) * lb(0) - lb.tail(dim - 1).squaredNorm();
        det = std::max(det, 1e-280);
        const double x0 = (lb(0) * db(0) - lb.tail(dim - 1).dot(db.tail(dim - 1))) / det;
        out(off) = x0;
        out.segment(off + 1, dim - 1) = (db.tail(dim - 1) - x0 * lb.tail(dim - 1)) / lb(0);
        off += dim;
    }
    return out;
}

Vec cone_unit(const StandardForm& sf) {
    Vec e = Vec::Zero(sf.m);
    e.head(sf.l).setOnes();
    int off = sf.l;
    for (const int d : sf.soc_dims) {
        e(off) = 1.0;
        off += d;
    }
    return e;
}

// Largest step alpha with u + alpha du staying in the cone (capped).
double step_to_boundary(const StandardForm& sf, const Vec& u, const Vec& du) {
    double alpha = kInf;
    for (int i = 0; i < sf.l; ++i) {
        if (du(i) < 0.0) alpha = std::min(alpha, -u(i) / du(i));
    }
    int off = sf.l;
    for (const int d : sf.soc_dims) {
        const auto ub = u.segment(off, d);
        const auto db = du.segment(off, d);
        // roots of (u0 + a d0)^2 - ||u1 + a d1||^2 = 0
        const double qa = db(0) * db(0) - db.tail(d - 1).squaredNorm();
        const double qb = 2.0 * (ub(0) * db(0) - ub.tail(d - 1).dot(db.tail(d - 1)));
        const double qc = ub(0) * ub(0) - ub.tail(d - 1).squaredNorm();
        double root = kInf;
        if (std::abs(qa) < 1e-300) {
            if (qb < 0.0) root = -qc / qb;
        } else {
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                const double qq = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
                for (const double r : {qq / qa, qc / qq}) {
                    if (r > 0.0) root = std::min(root, r);
                }
            }
        }
        alpha = std::min(alpha, root);
        off += d;
    }
    return alpha;
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

struct BestIterate {
    double score{kInf};
    Vec x;
    double tau{1.0};
    double pres{kInf}, dres{kInf}, gap{kInf}, relgap{kInf};
    double pcost{0.0};
    int iters{0};
};

}  // namespace

struct InteriorPointSolver::SymbolicCache {
    bool analyzed{false};
    std::vector<int> outer;
    std::vector<int> inner;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
};

InteriorPointSolver::InteriorPointSolver(IpmSettings settings)
    : settings_(settings), cache_(std::make_unique<SymbolicCache>()) {}

InteriorPointSolver::~InteriorPointSolver() = default;

SocpSolution InteriorPointSolver::solve(const ConicProgram& prog) {
    prog.validate();
    const StandardForm sf = to_standard_form(prog);
    SocpSolution sol;
    sol.x = Vec::Zero(sf.n);
    if (sf.m == 0) {
        sol.detail = "program has no inequality or cone constraints";
        return sol;
    }

    const int nk = sf.n + sf.p + sf.m;
    const double reg = settings_.static_reg;

    // Constant KKT entries (lower triangle): x-regularization, A, -reg on y,
    // G. The z-diagonal regularization is folded into the W^2 values.
    std::vector<Triplet> trips;
    for (int i = 0; i < sf.n; ++i) trips.emplace_back(i, i, reg);
    const std::size_t y_diag_base = trips.size() + sf.a.nonZeros();
    for (int k = 0; k < sf.a.outerSize(); ++k) {
        for (SpMat::InnerIterator it(sf.a, k); it; ++it) {
            trips.emplace_back(sf.n + static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
        }
    }
    for (int i = 0; i < sf.p; ++i) trips.emplace_back(sf.n + i, sf.n + i, -reg);
    for (int k = 0; k < sf.g.outerSize(); ++k) {
        for (SpMat::InnerIterator it(sf.g, k); it; ++it) {
            trips.emplace_back(sf.n + sf.p + static_cast<int>(it.row()),
                               static_cast<int>(it.col()), it.value());
        }
    }
    const std::size_t n_const = trips.size();
    // W^2 slots: orthant diagonal then dense lower blocks per cone.
    const int zoff = sf.n + sf.p;
    for (int i = 0; i < sf.l; ++i) trips.emplace_back(zoff + i, zoff + i, -1.0 - reg);
    {
        int off = sf.l;
        for (const int d : sf.soc_dims) {
            for (int cidx = 0; cidx < d; ++cidx) {
                for (int ridx = cidx; ridx < d; ++ridx) {
                    trips.emplace_back(zoff + off + ridx, zoff + off + cidx,
                                       -(ridx == cidx ? 1.0 + reg : 0.0));
                }
            }
            off += d;
        }
    }

    SpMat kkt(nk, nk);
    kkt.setFromTriplets(trips.begin(), trips.end());
    kkt.makeCompressed();

    // Map each triplet slot to its compressed-storage index. Positions are
    // unique by construction, so the mapping is one value per slot.
    std::vector<std::ptrdiff_t> slot(trips.size());
    for (std::size_t t = 0; t < trips.size(); ++t) {
        const int col = trips[t].col();
        const int row = trips[t].row();
        const int* ib = kkt.innerIndexPtr();
        const int lo = kkt.outerIndexPtr()[col];
        const int hi = kkt.outerIndexPtr()[col + 1];
        const int* pos = std::lower_bound(ib + lo, ib + hi, row);
        slot[t] = pos - ib;
    }

    // Reuse the symbolic factorization across solves with the same pattern.
    const int nnz = static_cast<int>(kkt.nonZeros());
    const bool same_pattern =
        cache_->analyzed && cache_->outer.size() == static_cast<std::size_t>(nk + 1) &&
        cache_->inner.size() == static_cast<std::size_t>(nnz) &&
        std::equal(cache_->outer.begin(), cache_->outer.end(), kkt.outerIndexPtr()) &&
        std::equal(cache_->inner.begin(), cache_->inner.end(), kkt.innerIndexPtr());
    if (!same_pattern) {
        cache_->ldlt.analyzePattern(kkt);
        cache_->outer.assign(kkt.outerIndexPtr(), kkt.outerIndexPtr() + nk + 1);
        cache_->inner.assign(kkt.innerIndexPtr(), kkt.innerIndexPtr() + nnz);
        cache_->analyzed = true;
    }
    auto& ldlt = cache_->ldlt;

    const auto set_w2 = [&](const Scalings& sc) {
        double* vals = kkt.valuePtr();
        std::size_t t = n_const;
        for (int i = 0; i < sf.l; ++i) vals[slot[t++]] = -sc.w2_orth(i) - reg;
        int off = sf.l;
        for (std::size_t ci = 0; ci < sf.soc_dims.size(); ++ci) {
            const int d = sf.soc_dims[ci];
            const Eigen::MatrixXd& w2 = sc.socs[ci].w2;
            for (int cidx = 0; cidx < d; ++cidx) {
                for (int ridx = cidx; ridx < d; ++ridx) {
                    vals[slot[t++]] = -w2(ridx, cidx) - (ridx == cidx ? reg : 0.0);
                }
            }
            off += d;
        }
    };

    const auto factor = [&]() -> bool {
        ldlt.factorize(kkt);
        return ldlt.info() == Eigen::Success;
    };

    const auto solve_kkt = [&](const Vec& rhs) -> Vec {
        Vec x = ldlt.solve(rhs);
        for (int it = 0; it < settings_.refine_steps; ++it) {
            const Vec r = rhs - kkt.selfadjointView<Eigen::Lower>() * x;
            x += ldlt.solve(r);
        }
        return x;
    };

    const auto pack = [&](const Vec& rx, const Vec& ry, const Vec& rz) {
        Vec rhs(nk);
        rhs.head(sf.n) = rx;
        rhs.segment(sf.n, sf.p) = ry;
        rhs.tail(sf.m) = rz;
        return rhs;
    };

    // --- initialization: least-norm primal/dual points pushed into the cone
    {
        Scalings ident;
        ident.w_orth = Vec::Ones(sf.l);
        ident.w2_orth = Vec::Ones(sf.l);
        ident.socs.assign(sf.soc_dims.size(), SocScale{});
        for (std::size_t ci = 0; ci < sf.soc_dims.size(); ++ci) {
            const int d = sf.soc_dims[ci];
            ident.socs[ci].eta = 1.0;
            ident.socs[ci].wbar = Vec::Zero(d);
            ident.socs[ci].wbar(0) = 1.0;
            ident.socs[ci].w = Eigen::MatrixXd::Identity(d, d);
            ident.socs[ci].w2 = Eigen::MatrixXd::Identity(d, d);
        }
        set_w2(ident);
    }
    if (!factor()) {
        sol.detail = "initial KKT factorization failed";
        return sol;
    }

    Vec x(sf.n), y(sf.p), s(sf.m), z(sf.m);
    {
        const Vec sol_p = solve_kkt(pack(Vec::Zero(sf.n), sf.b, sf.h));
        x = sol_p.head(sf.n);
        const Vec s_tilde = -sol_p.tail(sf.m);
        const Vec e = cone_unit(sf);
        double viol = -kInf;
        {
            int off = 0;
            for (int i = 0; i < sf.l; ++i) viol = std::max(viol, -s_tilde(i));
            off = sf.l;
            for (const int d : sf.soc_dims) {
                viol = std::max(viol, s_tilde.segment(off + 1, d - 1).norm() - s_tilde(off));
                off += d;
            }
        }
        s = viol < 0.0 ? s_tilde : Vec(s_tilde + (1.0 + viol) * e);

        const Vec sol_d = solve_kkt(pack(-sf.c, Vec::Zero(sf.p), Vec::Zero(sf.m)));
        y = sol_d.segment(sf.n, sf.p);
        const Vec z_tilde = sol_d.tail(sf.m);
        double dviol = -kInf;
        {
            for (int i = 0; i < sf.l; ++i) dviol = std::max(dviol, -z_tilde(i));
            int off = sf.l;
            for (const int d : sf.soc_dims) {
                dviol = std::max(dviol,
                                 z_tilde.segment(off + 1, d - 1).norm() - z_tilde(off));
                off += d;
            }
        }
        z = dviol < 0.0 ? z_tilde : Vec(z_tilde + (1.0 + dviol) * e);
    }
    double tau = 1.0;
    double kappa = 1.0;

    const double norm_b = 1.0 + inf_norm(sf.b);
    const double norm_h = 1.0 + inf_norm(sf.h);
    const double norm_c = 1.0 + inf_norm(sf.c);
    const int deg = sf.cone_degree();

    BestIterate best;
    Scalings sc;
    int stall = 0;
    double prev_mu = kInf;

    for (int iter = 0; iter <= settings_.max_iters; ++iter) {
        // residuals of the homogeneous embedding
        const Vec r1 = sf.h * tau - sf.g * x - s;
        const Vec r2 = sf.b * tau - sf.a * x;
        const Vec r3 = -(sf.a.transpose() * y + sf.g.transpose() * z + sf.c * tau);
        const double r4 = -(sf.c.dot(x) + sf.b.dot(y) + sf.h.dot(z) + kappa);
        const double mu = (s.dot(z) + tau * kappa) / (deg + 1);

        const double pcost = sf.c.dot(x) / tau;
        const double dcost = -(sf.b.dot(y) + sf.h.dot(z)) / tau;
        const double gap = s.dot(z) / (tau * tau);
        const double relgap = gap / std::max({1.0, std::abs(pcost), std::abs(dcost)});
        const double pres =
            std::max(inf_norm(r2) / tau / norm_b, inf_norm(r1) / tau / norm_h);
        const double dres = inf_norm(r3) / tau / norm_c;

        if (settings_.verbose) {
            std::printf("ipm %3d: pcost %+.6e dcost %+.6e gap %.3e pres %.3e dres %.3e\n", iter,
                        pcost, dcost, gap, pres, dres);
        }
        const double score = std::max({pres, dres, relgap});
        if (score < best.score) {
            best.score = score;
            best.x = x;
            best.tau = tau;
            best.pres = pres;
            best.dres = dres;
            best.gap = gap;
            best.relgap = relgap;
            best.pcost = pcost;
            best.iters = iter;
        }

        if (pres <= settings_.feas_tol && dres <= settings_.feas_tol &&
            (gap <= settings_.abs_gap_tol || relgap <= settings_.rel_gap_tol)) {
            sol.status = SolveStatus::optimal;
            sol.detail = "optimal";
            sol.x = (x / tau).cwiseProduct(sf.col_scale);
            sol.objective = pcost * sf.cost_scale;
            sol.iterations = iter;
            sol.gap = gap;
            sol.rel_gap = relgap;
            sol.primal_res = pres;
            sol.dual_res = dres;
            return sol;
        }

        // infeasibility certificates of the embedding
        const double by_hz = sf.b.dot(y) + sf.h.dot(z);
        if (by_hz < -1e-12 && kappa / tau > 1.0) {
            const Vec yc = y / -by_hz;
            const Vec zc = z / -by_hz;
            if (inf_norm(sf.a.transpose() * yc + sf.g.transpose() * zc) / norm_c <=
                settings_.feas_tol) {
                sol.status = SolveStatus::infeasible;
                sol.detail = "primal infeasible";
                sol.iterations = iter;
                return sol;
            }
        }
        const double cx = sf.c.dot(x);
        if (cx < -1e-12 && kappa / tau > 1.0) {
            const Vec xc = x / -cx;
            const Vec sc_cert = s / -cx;
            if (std::max(inf_norm(sf.a * xc) / norm_b,
                         inf_norm(sf.g * xc + sc_cert) / norm_h) <= settings_.feas_tol) {
                sol.status = SolveStatus::infeasible;
                sol.detail = "dual infeasible (primal unbounded)";
                sol.iterations = iter;
                return sol;
            }
        }

        if (iter == settings_.max_iters) break;

        if (!compute_scalings(sf, s, z, sc)) {
            sol.detail = "iterate left the cone interior";
            break;
        }
        set_w2(sc);
        double local_reg = reg;
        bool ok = factor();
        while (!ok && local_reg < 1e-2) {
            // bump every regularized diagonal, not just the x block
            local_reg *= 100.0;
            double* vals = kkt.valuePtr();
            for (int i = 0; i < sf.n; ++i) vals[slot[i]] = local_reg;
            for (int i = 0; i < sf.p; ++i) vals[slot[y_diag_base + i]] -= local_reg;
            std::size_t t = n_const;
            for (int i = 0; i < sf.l; ++i) vals[slot[t++]] -= local_reg;
            {
                int off = sf.l;
                for (std::size_t ci = 0; ci < sf.soc_dims.size(); ++ci) {
                    const int d = sf.soc_dims[ci];
                    for (int cidx = 0; cidx < d; ++cidx) {
                        for (int ridx = cidx; ridx < d; ++ridx) {
                            if (ridx == cidx) vals[slot[t]] -= local_reg;
                            ++t;
                        }
                    }
                    off += d;
                }
            }
            ok = factor();
        }
        if (!ok) {
            sol.detail = "KKT factorization failed";
            break;
        }

        const Vec sol_c = solve_kkt(pack(-sf.c, sf.b, sf.h));
        const double dot_c = sf.c.dot(sol_c.head(sf.n)) + sf.b.dot(sol_c.segment(sf.n, sf.p)) +
                             sf.h.dot(sol_c.tail(sf.m));

        const auto direction = [&](double gamma_r, const Vec& ds, double dkap, Vec& dx, Vec& dy,
                                   Vec& dz, Vec& dsv, double& dtau, double& dkappa) {
            const Vec wlds = apply_w(sf, sc, jordan_div(sf, sc.lambda, ds));
            const Vec sol_b =
                solve_kkt(pack(gamma_r * r3, gamma_r * r2, gamma_r * r1 - wlds));
            const double dot_b = sf.c.dot(sol_b.head(sf.n)) +
                                 sf.b.dot(sol_b.segment(sf.n, sf.p)) +
                                 sf.h.dot(sol_b.tail(sf.m));
            dtau = (gamma_r * r4 - dkap / tau - dot_b) / (dot_c - kappa / tau);
            dx = sol_b.head(sf.n) + dtau * sol_c.head(sf.n);
            dy = sol_b.segment(sf.n, sf.p) + dtau * sol_c.segment(sf.n, sf.p);
            dz = sol_b.tail(sf.m) + dtau * sol_c.tail(sf.m);
            dsv = apply_w(sf, sc, jordan_div(sf, sc.lambda, ds) - apply_w(sf, sc, dz));
            dkappa = (dkap - kappa * dtau) / tau;
        };

        // predictor
        const Vec lam_lam = jordan_mul(sf, sc.lambda, sc.lambda);
        Vec dx_a, dy_a, dz_a, ds_a;
        double dtau_a, dkap_a;
        direction(1.0, -lam_lam, -tau * kappa, dx_a, dy_a, dz_a, ds_a, dtau_a, dkap_a);

        double alpha_aff = std::min(
            {step_to_boundary(sf, s, ds_a), step_to_boundary(sf, z, dz_a),
             dtau_a < 0.0 ? -tau / dtau_a : kInf, dkap_a < 0.0 ? -kappa / dkap_a : kInf, 1.0});
        const double sigma = std::pow(1.0 - alpha_aff, 3);

        // corrector
        const Vec e = cone_unit(sf);
        const Vec corr = jordan_mul(sf, apply_winv(sf, sc, ds_a), apply_w(sf, sc, dz_a));
        const Vec ds_rhs = sigma * mu * e - lam_lam - corr;
        const double dkap_rhs = sigma * mu - tau * kappa - dtau_a * dkap_a;
        Vec dx, dy, dz, ds;
        double dtau, dkap;
        direction(1.0 - sigma, ds_rhs, dkap_rhs, dx, dy, dz, ds, dtau, dkap);

        double alpha = std::min({step_to_boundary(sf, s, ds), step_to_boundary(sf, z, dz),
                                 dtau < 0.0 ? -tau / dtau : kInf,
                                 dkap < 0.0 ? -kappa / dkap : kInf});
        alpha = std::min(1.0, 0.99 * alpha);

        if (!std::isfinite(alpha) || alpha <= 1e-8) {
            sol.detail = "step length collapsed";
            break;
        }

        // Accept the step only if the trial point stays in the cone interior
        // and no complementarity pair collapses far below the mean; both
        // guards backtrack alpha geometrically.
        const auto centrality = [&](const Vec& sv, const Vec& zv, double tv, double kv) {
            if (tv <= 0.0 || kv <= 0.0) return false;
            double min_prod = tv * kv;
            double total = tv * kv;
            for (int i = 0; i < sf.l; ++i) {
                if (sv(i) <= 0.0 || zv(i) <= 0.0) return false;
                const double prod = sv(i) * zv(i);
                min_prod = std::min(min_prod, prod);
                total += prod;
            }
            int off = sf.l;
            for (const int d : sf.soc_dims) {
                const double dets =
                    sv(off) * sv(off) - sv.segment(off + 1, d - 1).squaredNorm();
                const double detz =
                    zv(off) * zv(off) - zv.segment(off + 1, d - 1).squaredNorm();
                if (sv(off) <= 0.0 || zv(off) <= 0.0 || dets <= 0.0 || detz <= 0.0) return false;
                min_prod = std::min(min_prod, std::sqrt(dets * detz));
                total += sv.segment(off, d).dot(zv.segment(off, d));
                off += d;
            }
            const double mean = total / (deg + 1);
            return min_prod >= 1e-8 * mean;
        };
        bool stepped = false;
        for (int tries = 0; tries < 30; ++tries) {
            const Vec s_try = s + alpha * ds;
            const Vec z_try = z + alpha * dz;
            const double tau_try = tau + alpha * dtau;
            const double kap_try = kappa + alpha * dkap;
            if (centrality(s_try, z_try, tau_try, kap_try)) {
                x += alpha * dx;
                y += alpha * dy;
                s = s_try;
                z = z_try;
                tau = tau_try;
                kappa = kap_try;
                stepped = true;
                break;
            }
            alpha *= 0.7;
        }
        if (!stepped) {
            sol.detail = "could not stay centered in the cone interior";
            break;
        }

        if (tau <= 1e-12 || !std::isfinite(mu)) {
            sol.detail = "tau collapsed";
            break;
        }
        if (mu > 0.9 * prev_mu) {
            if (++stall >= 5) {
                sol.detail = "no progress on the barrier parameter";
                break;
            }
        } else {
            stall = 0;
        }
        prev_mu = mu;
    }

    // stalled or hit the iteration limit: report the best iterate honestly
    const double near = settings_.near_tol_factor;
    sol.x = (best.x / best.tau).cwiseProduct(sf.col_scale);
    sol.objective = best.pcost * sf.cost_scale;
    sol.iterations = best.iters;
    sol.gap = best.gap;
    sol.rel_gap = best.relgap;
    sol.primal_res = best.pres;
    sol.dual_res = best.dres;
    if (best.pres <= near * settings_.feas_tol && best.dres <= near * settings_.feas_tol &&
        (best.gap <= near * settings_.abs_gap_tol || best.relgap <= near * settings_.rel_gap_tol)) {
        sol.status = SolveStatus::near_optimal;
        if (sol.detail.empty()) sol.detail = "iteration limit";
        sol.detail = "near-optimal: " + sol.detail;
    } else {
        sol.status = SolveStatus::numerical_failure;
        if (sol.detail.empty()) sol.detail = "iteration limit without convergence";
    }
    return sol;
}

}  // namespace pdg::socp
