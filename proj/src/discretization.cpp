#include "pdg/discretization.hpp"

#include <cmath>
#include <string>

#include "pdg/errors.hpp"

namespace pdg {

FohWeights foh_weights(double tau, double tau_k, double tau_k1) {
    const double dt = tau_k1 - tau_k;
    if (dt <= 0.0) {
        throw InvalidInputError("foh_weights: degenerate interval");
    }
    return FohWeights{(tau_k1 - tau) / dt, (tau - tau_k) / dt};
}

namespace {

// Integration state of the coupled segment system.
struct SegFlow {
    Eigen::VectorXd x;
    Eigen::MatrixXd phi;      // state transition matrix
    Eigen::MatrixXd phi_inv;  // accumulated inverse STM
    Eigen::MatrixXd bhat;
    Eigen::MatrixXd b;
    Eigen::VectorXd s;
    Eigen::VectorXd c;

    SegFlow(int nx, int nu)
        : x(nx),
          phi(Eigen::MatrixXd::Identity(nx, nx)),
          phi_inv(Eigen::MatrixXd::Identity(nx, nx)),
          bhat(Eigen::MatrixXd::Zero(nx, nu)),
          b(Eigen::MatrixXd::Zero(nx, nu)),
          s(Eigen::VectorXd::Zero(nx)),
          c(Eigen::VectorXd::Zero(nx)) {}

    SegFlow& axpy(double h, const SegFlow& k) {
        x += h * k.x;
        phi += h * k.phi;
        phi_inv += h * k.phi_inv;
        bhat += h * k.bhat;
        b += h * k.b;
        s += h * k.s;
        c += h * k.c;
        return *this;
    }

    bool finite() const {
        return x.allFinite() && phi.allFinite() && phi_inv.allFinite() && bhat.allFinite() &&
               b.allFinite() && s.allFinite() && c.allFinite();
    }
};

}  // namespace

GenericSegment propagate_segment_generic(const OdeSystem& sys, const Eigen::VectorXd& x_k,
                                         const Eigen::VectorXd& u_k, const Eigen::VectorXd& u_k1,
                                         double tf, double tau_k, double tau_k1, int substeps) {
    if (substeps < 1) throw InvalidInputError("propagate_segment: n_substeps must be >= 1");
    if (tf <= 0.0) throw InvalidInputError("propagate_segment: tf must be positive");
    const int nx = sys.nx;
    const int nu = sys.nu;

    SegFlow y(nx, nu);
    y.x = x_k;

    Eigen::VectorXd f(nx);
    Eigen::MatrixXd dfdx(nx, nx), dfdu(nx, nu);
    Eigen::VectorXd u(nu);

    const auto deriv = [&](double tau, const SegFlow& in, SegFlow& d) {
        const auto [eta_hat, eta] = foh_weights(tau, tau_k, tau_k1);
        u = eta_hat * u_k + eta * u_k1;
        sys.eval(in.x, u, f, &dfdx, &dfdu);
        const Eigen::MatrixXd a = tf * dfdx;
        const Eigen::MatrixXd b = tf * dfdu;
        d.x = tf * f;
        d.phi = a * in.phi;
        d.phi_inv = -in.phi_inv * a;
        d.bhat = in.phi_inv * (eta_hat * b);
        d.b = in.phi_inv * (eta * b);
        d.s = in.phi_inv * f;                      // dF/dtf = f
        d.c = in.phi_inv * (-a * in.x - b * u);    // c = -A x~ - B u~
    };

    const double h = (tau_k1 - tau_k) / substeps;
    SegFlow k1(nx, nu), k2(nx, nu), k3(nx, nu), k4(nx, nu), tmp(nx, nu);
    for (int i = 0; i < substeps; ++i) {
        const double tau = tau_k + i * h;
        deriv(tau, y, k1);
        tmp = y;
        tmp.axpy(0.5 * h, k1);
        deriv(tau + 0.5 * h, tmp, k2);
        tmp = y;
        tmp.axpy(0.5 * h, k2);
        deriv(tau + 0.5 * h, tmp, k3);
        tmp = y;
        tmp.axpy(h, k3);
        deriv(tau + h, tmp, k4);
        y.axpy(h / 6.0, k1);
        y.axpy(h / 3.0, k2);
        y.axpy(h / 3.0, k3);
        y.axpy(h / 6.0, k4);
        if (!y.finite()) {
            throw PropagationError("propagate_segment: non-finite values during integration");
        }
    }

    GenericSegment out;
    out.a = y.phi;
    out.bhat = y.phi * y.bhat;
    out.b = y.phi * y.b;
    out.s = y.phi * y.s;
    out.c = y.phi * y.c;
    out.x_end = y.x;
    return out;
}

namespace {

OdeSystem vehicle_system(const VehicleParams& p) {
    OdeSystem sys;
    sys.nx = kStateDim;
    sys.nu = kControlDim;
    sys.eval = [&p](const Eigen::VectorXd& xv, const Eigen::VectorXd& uv, Eigen::VectorXd& f,
                    Eigen::MatrixXd* a, Eigen::MatrixXd* b) {
        const State x = State::unpack(xv);
        const Control u = uv;
        if (a != nullptr && b != nullptr) {
            const Jacobians j = jacobians(x, u, 1.0, p);  // tf = 1 gives unscaled parts
            *a = j.a;
            *b = j.b;
            f = j.s;
        } else {
            f = dynamics(x, u, p);
        }
    };
    return sys;
}

}  // namespace

LinearizedSegment propagate_segment(const ReferenceTrajectory& ref, int k,
                                    const DiscretizationConfig& cfg, const VehicleParams& p) {
    if (k < 0 || k >= ref.n() - 1) {
        throw InvalidInputError("propagate_segment: segment index out of range");
    }
    const OdeSystem sys = vehicle_system(p);
    GenericSegment g;
    try {
        g = propagate_segment_generic(sys, ref.xs[k].pack(), ref.us[k], ref.us[k + 1], ref.tf,
                                      ref.tau(k), ref.tau(k + 1), cfg.n_substeps);
    } catch (const Error& e) {
        throw PropagationError("segment " + std::to_string(k) + ": " + e.what());
    }
    LinearizedSegment seg;
    seg.a = g.a;
    seg.bhat = g.bhat;
    seg.b = g.b;
    seg.s = g.s;
    seg.c = g.c;
    return seg;
}

std::vector<LinearizedSegment> discretize(const ReferenceTrajectory& ref,
                                          const DiscretizationConfig& cfg,
                                          const VehicleParams& p) {
    if (ref.n() < 2) throw InvalidInputError("discretize: need at least two nodes");
    std::vector<LinearizedSegment> segs;
    segs.reserve(ref.n() - 1);
    for (int k = 0; k < ref.n() - 1; ++k) {
        segs.push_back(propagate_segment(ref, k, cfg, p));
    }
    return segs;
}

StateVec segment_endpoint(const ReferenceTrajectory& ref, int k, int substeps,
                          const VehicleParams& p) {
    const double tau_k = ref.tau(k);
    const double tau_k1 = ref.tau(k + 1);
    const double h = (tau_k1 - tau_k) / substeps;
    StateVec x = ref.xs[k].pack();
    const auto f = [&](double tau, const StateVec& xv) -> StateVec {
        const auto [eta_hat, eta] = foh_weights(tau, tau_k, tau_k1);
        const Control u = eta_hat * ref.us[k] + eta * ref.us[k + 1];
        return ref.tf * dynamics(State::unpack(xv), u, p);
    };
    for (int i = 0; i < substeps; ++i) {
        const double tau = tau_k + i * h;
        const StateVec k1 = f(tau, x);
        const StateVec k2 = f(tau + 0.5 * h, x + 0.5 * h * k1);
        const StateVec k3 = f(tau + 0.5 * h, x + 0.5 * h * k2);
        const StateVec k4 = f(tau + h, x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!x.allFinite()) {
        throw PropagationError("segment_endpoint: non-finite state in segment " +
                               std::to_string(k));
    }
    return x;
}

}  // namespace pdg
