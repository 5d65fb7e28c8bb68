// SPDX-License-Identifier: Apache-2.0
//
// milac-sim: multiport-network simulator for microwave linear analog computers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// MISO downlink with a transmit-side MiLAC (one RF chain, N_T coupled
// antennas, one matched receive antenna).
//
// The coupling-aware design maximizes P_T |h f|^2 over real symmetric
// susceptance matrices B in closed form. With Yhat = blkdiag(Y0, Y_TT), the
// substitution
//
//     Bbar = Y0 Re{Yhat}^{-1/2} (B + Im{Yhat}) Re{Yhat}^{-1/2}
//
// whitens the antenna load, and the Cayley map
//
//     Thetabar = (Y0 I + j Bbar)^{-1} (Y0 I - j Bbar)
//
// turns the problem into a search over unitary symmetric matrices, whose
// optimum puts (h Re{Y_TT}^{-1/2})^H / ||.|| in the first column below the
// pivot. The achieved power is then (P_T Y0 / 16) ||z_RT Re{Z_TT}^{-1/2}||^2.

#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "milac/coupling.hpp"
#include "milac/error.hpp"
#include "milac/matrixkit.hpp"
#include "milac/netmodels.hpp"

namespace milac {

/// Relative tolerance between the pipeline power of a design and its closed form.
inline constexpr double kBoundTolerance = 1e-8;
/// Reciprocal condition number of I + Thetabar below which the phase is rotated.
inline constexpr double kCayleyRcond = 1e-12;
inline constexpr int kMaxPhaseRetries = 8;

/// Coupling matrix together with the factors every MISO formula reuses.
///
/// Built once per array and shared read-only between trials.
class PreparedCoupling {
public:
    PreparedCoupling(const CMatrix &z, double z0) : z_(z), z0_(z0) {
        require_square(z_, "coupling matrix");
        require_finite(z_, "coupling matrix");
        if (!(z0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "z0 must be positive");
        if ((z_ - z_.transpose()).norm() > kHermitianTolerance * z_.norm())
            throw Error(ErrorCode::InvalidArgument, "coupling matrix must be symmetric");
        const Eigen::Index n = z_.rows();
        const RMatrix re_z = z_.real();
        re_z_inv_sqrt_ = hermitian_power(re_z, HermitianExponent::MinusHalf);
        re_z_sqrt_ = hermitian_power(re_z, HermitianExponent::Half);
        re_z_inv_ = hermitian_power(re_z, HermitianExponent::MinusOne);
        y_tt_ = CheckedLu(z_, ErrorCode::SingularCoupling, "Z_TT").inverse();
        const RMatrix re_y = y_tt_.real();
        re_y_sqrt_ = hermitian_power(re_y, HermitianExponent::Half);
        re_y_inv_sqrt_ = hermitian_power(re_y, HermitianExponent::MinusHalf);
        loaded_lu_ = std::make_shared<CheckedLu>(CMatrix(z_ + z0_ * CMatrix::Identity(n, n)),
                                                 ErrorCode::SingularSystem, "Z_TT + Z0 I");
    }

    explicit PreparedCoupling(const CouplingMatrix &cm) : PreparedCoupling(cm.z(), cm.z0()) {}

    const CMatrix &z() const { return z_; }
    double z0() const { return z0_; }
    double y0() const { return 1.0 / z0_; }
    Eigen::Index size() const { return z_.rows(); }
    const CMatrix &y_tt() const { return y_tt_; }
    const RMatrix &re_z_inv_sqrt() const { return re_z_inv_sqrt_; }
    const RMatrix &re_z_sqrt() const { return re_z_sqrt_; }
    const RMatrix &re_z_inv() const { return re_z_inv_; }
    const RMatrix &re_y_sqrt() const { return re_y_sqrt_; }
    const RMatrix &re_y_inv_sqrt() const { return re_y_inv_sqrt_; }
    /// Factorization of Z_TT + Z0 I.
    const CheckedLu &loaded() const { return *loaded_lu_; }

private:
    CMatrix z_;
    double z0_;
    CMatrix y_tt_;
    RMatrix re_z_inv_sqrt_, re_z_sqrt_, re_z_inv_, re_y_sqrt_, re_y_inv_sqrt_;
    std::shared_ptr<const CheckedLu> loaded_lu_;
};

/// One MISO realization. A null coupling means Z_TT = Z0 I.
struct MisoChannel {
    CMatrix z_rt; ///< 1 x N_T [Ohm]
    std::shared_ptr<const PreparedCoupling> coupling;
    double p_t = 1.0;
    double rho = 1.0;
    double z0 = 50.0;

    double y0() const { return 1.0 / z0; }
    Eigen::Index n_t() const { return z_rt.cols(); }

    void validate() const {
        if (z_rt.rows() != 1 || z_rt.cols() < 1)
            throw Error(ErrorCode::DimensionMismatch, "z_rt must be a nonempty row");
        require_finite(z_rt, "z_rt");
        if (!(p_t > 0.0) || !(rho > 0.0) || !(z0 > 0.0))
            throw Error(ErrorCode::InvalidArgument, "p_t, rho and z0 must be positive");
        if (coupling && coupling->size() != z_rt.cols())
            throw Error(ErrorCode::DimensionMismatch, "coupling size differs from N_T");
        if (coupling && std::abs(coupling->z0() - z0) > 1e-12 * z0)
            throw Error(ErrorCode::InvalidArgument, "coupling and channel use different z0");
    }

    /// h = z_RT Y_TT / 2, or z_RT / (2 Z0) without coupling.
    CMatrix h() const {
        if (!coupling) return z_rt / (2.0 * z0);
        return z_rt * coupling->y_tt() / 2.0;
    }

    /// MilacTx scenario with N_S = N_R = 1 and a matched receive antenna.
    ScenarioSpec scenario() const {
        ScenarioSpec s;
        s.architecture = Architecture::MilacTx;
        s.n_s = 1;
        s.n_t = n_t();
        s.n_r = 1;
        s.n_z = 0;
        if (coupling) s.coupling_tx = coupling->z();
        s.z_rt = z_rt;
        s.z0 = z0;
        return s;
    }
};

struct DesignDiagnostics {
    double bbar_imag_residue = 0.0; ///< ||Im{Bbar}||_F / ||Bbar||_F before projection
    double b_asymmetry = 0.0;       ///< ||B - B^T||_F / ||B||_F before symmetrization
    int phase_retries = 0;
    double phase = 0.0;             ///< rotation applied to the leading singular vector
};

/// Real symmetric susceptance matrix of an (N_T+1)-port MiLAC.
struct MilacDesign {
    RMatrix b;
    CMatrix theta_bar; ///< Thetabar (aware) or Theta (unaware)
    double achieved_power = 0.0;
    DesignDiagnostics diagnostics;

    MilacPorts ports() const { return MilacPorts::from_susceptance(b, Side::Tx); }
};

struct PowerReport {
    double milac_mc = 0.0;
    double milac_nomc = 0.0;
    double digital_matching = 0.0;
    double digital_nomatching = 0.0;
    double expected_milac_mc = 0.0;
    double expected_milac_nomc = 0.0;
    double expected_digital_matching = 0.0;
    double expected_digital_nomatching = 0.0;
};

// ---------------------------------------------------------------------------
// Closed-form powers

/// (P_T Y0 / 16) ||z_RT Re{Z_TT}^{-1/2}||^2.
inline double power_milac_mc(const MisoChannel &ch) {
    ch.validate();
    if (!ch.coupling) return ch.p_t * ch.y0() * ch.y0() * ch.z_rt.squaredNorm() / 16.0;
    return ch.p_t * ch.y0() / 16.0 * (ch.z_rt * ch.coupling->re_z_inv_sqrt().cast<cd>()).squaredNorm();
}

/// (P_T Y0 / 16) z_RT Re{Z_TT}^{-1} z_RT^H.
inline double power_milac_mc_quadratic(const MisoChannel &ch) {
    ch.validate();
    if (!ch.coupling) return ch.p_t * ch.y0() * ch.y0() * ch.z_rt.squaredNorm() / 16.0;
    const cd q = (ch.z_rt * ch.coupling->re_z_inv().cast<cd>() * ch.z_rt.adjoint())(0, 0);
    return ch.p_t * ch.y0() / 16.0 * q.real();
}

/// (P_T Y0 / 16) z_RT Y_TT Re{Y_TT}^{-1} Y_TT^H z_RT^H, built from admittances only.
inline double power_milac_mc_admittance(const MisoChannel &ch) {
    ch.validate();
    if (!ch.coupling) return ch.p_t * ch.y0() * ch.y0() * ch.z_rt.squaredNorm() / 16.0;
    const CMatrix zy = ch.z_rt * ch.coupling->y_tt();
    const CMatrix w = zy * ch.coupling->re_y_inv_sqrt().cast<cd>();
    return ch.p_t * ch.y0() / 16.0 * w.squaredNorm();
}

/// P_T Y0^2 ||z_RT||^2 / 16: the MiLAC optimum when the antennas are uncoupled.
inline double power_milac_nomc(const MisoChannel &ch) {
    ch.validate();
    return ch.p_t * ch.y0() * ch.y0() * ch.z_rt.squaredNorm() / 16.0;
}

/// Digital MRT behind the fixed matching network: P_T ||h||^2 with
/// h = z_RT J_T^T (Z_T + Z0 I)^{-1} / 2 evaluated from the network's
/// impedance-form blocks.
inline double power_digital_matching(const MisoChannel &ch);

/// Digital MRT with no matching network: (P_T / 4) ||z_RT (Z_TT + Z0 I)^{-1}||^2.
inline double power_digital_nomatching(const MisoChannel &ch) {
    ch.validate();
    if (!ch.coupling) return ch.p_t * ch.y0() * ch.y0() * ch.z_rt.squaredNorm() / 16.0;
    return ch.p_t / 4.0 * ch.coupling->loaded().solve_right(ch.z_rt).squaredNorm();
}

/// (P_T Y0 rho / 16) Tr(Re{Z_TT}^{-1}).
inline double expected_power_milac_mc(const PreparedCoupling &c, double p_t, double rho) {
    return p_t * c.y0() * rho / 16.0 * c.re_z_inv().trace();
}

/// (P_T Y0^2 rho / 16) N_T.
inline double expected_power_milac_nomc(Eigen::Index n_t, double z0, double p_t, double rho) {
    return p_t * rho * static_cast<double>(n_t) / (16.0 * z0 * z0);
}

/// (P_T rho / 4) Tr(((Z_TT + Z0 I)^H (Z_TT + Z0 I))^{-1}).
inline double expected_power_digital_nomatching(const PreparedCoupling &c, double p_t, double rho) {
    const Eigen::Index n = c.size();
    const CMatrix loaded = c.z() + c.z0() * CMatrix::Identity(n, n);
    const CMatrix gram = loaded.adjoint() * loaded;
    return p_t * rho / 4.0 * hermitian_power(gram, HermitianExponent::MinusOne).trace().real();
}

// ---------------------------------------------------------------------------
// Matching network

/// 2N_T-port lossless reciprocal matching network
///
///     Z_F = [ 0                    -j sqrt(Z0) Re{Z}^{1/2} ]
///           [ -j sqrt(Z0) Re{Z}^{1/2}    -j Im{Z}          ]
///
/// which presents Z_T = Z0 I to the RF chains.
inline CMatrix matching_network_impedance(const PreparedCoupling &c) {
    const Eigen::Index n = c.size();
    const CMatrix off = -kJ * std::sqrt(c.z0()) * c.re_z_sqrt().cast<cd>();
    CMatrix z_f = CMatrix::Zero(2 * n, 2 * n);
    z_f.topRightCorner(n, n) = off;
    z_f.bottomLeftCorner(n, n) = off;
    z_f.bottomRightCorner(n, n) = -kJ * c.z().imag().cast<cd>();
    return z_f;
}

inline double power_digital_matching(const MisoChannel &ch) {
    ch.validate();
    const Eigen::Index n = ch.n_t();
    ScenarioSpec s;
    s.architecture = Architecture::MilacTx;
    s.n_s = n;
    s.n_t = n;
    s.n_r = 1;
    s.z_rt = ch.z_rt;
    s.z0 = ch.z0;
    CMatrix z_f;
    if (ch.coupling) {
        s.coupling_tx = ch.coupling->z();
        z_f = matching_network_impedance(*ch.coupling);
    } else {
        z_f = CMatrix::Zero(2 * n, 2 * n);
        z_f.topRightCorner(n, n) = -kJ * ch.z0 * CMatrix::Identity(n, n);
        z_f.bottomLeftCorner(n, n) = -kJ * ch.z0 * CMatrix::Identity(n, n);
    }
    const TxMatchingForm m = matching_form_tx(z_f, s);
    const CMatrix h = CheckedLu(m.z_t + ch.z0 * CMatrix::Identity(n, n), ErrorCode::SingularSystem, "Z_T + Z0 I")
                          .solve_right(CMatrix(ch.z_rt * m.j_t.transpose())) /
                      2.0;
    return ch.p_t * h.squaredNorm();
}

/// ||Y_TT Re{Y_TT}^{-1} Y_TT^H - Re{Z_TT}^{-1}||_F / ||Re{Z_TT}^{-1}||_F.
inline double admittance_identity_residual(const PreparedCoupling &c) {
    const CMatrix re_y_inv = (c.re_y_inv_sqrt() * c.re_y_inv_sqrt()).cast<cd>();
    const CMatrix lhs = c.y_tt() * re_y_inv * c.y_tt().adjoint();
    return relative_difference(lhs, CMatrix(c.re_z_inv().cast<cd>()));
}

/// Smallest eigenvalue of (Z - Z0 I)^H (Z - Z0 I); nonnegative by construction.
inline double mismatch_gram_min_eigenvalue(const PreparedCoupling &c) {
    const Eigen::Index n = c.size();
    const CMatrix d = c.z() - c.z0() * CMatrix::Identity(n, n);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(d.adjoint() * d, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

inline PowerReport power_report(const MisoChannel &ch) {
    PowerReport r;
    r.milac_mc = power_milac_mc(ch);
    r.milac_nomc = power_milac_nomc(ch);
    r.digital_matching = power_digital_matching(ch);
    r.digital_nomatching = power_digital_nomatching(ch);
    r.expected_milac_nomc = expected_power_milac_nomc(ch.n_t(), ch.z0, ch.p_t, ch.rho);
    if (ch.coupling) {
        r.expected_milac_mc = expected_power_milac_mc(*ch.coupling, ch.p_t, ch.rho);
        r.expected_digital_nomatching = expected_power_digital_nomatching(*ch.coupling, ch.p_t, ch.rho);
    } else {
        r.expected_milac_mc = r.expected_milac_nomc;
        r.expected_digital_nomatching = r.expected_milac_nomc;
    }
    r.expected_digital_matching = r.expected_milac_mc;
    return r;
}

// ---------------------------------------------------------------------------
// Designs

namespace detail {

struct CayleyResult {
    RMatrix bbar;
    CMatrix theta;
    double imag_residue = 0.0;
    int retries = 0;
    double phase = 0.0;
};

/// Theta = [[0, v^T], [v, V V^T]] and its susceptance -j y0 (I - Theta)(I + Theta)^{-1}.
///
/// If I + Theta is numerically singular the leading vector is rotated by
/// e^{j phi}, phi = pi/2, pi/4, ..., which leaves the objective unchanged.
inline CayleyResult cayley_design(const SingularFrame &frame, double y0, double base_phase) {
    const Eigen::Index n = frame.lead.rows();
    const CMatrix tail = frame.rest * frame.rest.transpose();
    const CMatrix eye = CMatrix::Identity(n + 1, n + 1);
    double phase = base_phase;
    for (int attempt = 0; attempt <= kMaxPhaseRetries; ++attempt) {
        if (attempt > 0) phase = base_phase + std::numbers::pi / std::pow(2.0, attempt);
        const CMatrix v = frame.lead * std::polar(1.0, phase);
        CMatrix theta = CMatrix::Zero(n + 1, n + 1);
        theta.block(0, 1, 1, n) = v.transpose();
        theta.block(1, 0, n, 1) = v;
        theta.bottomRightCorner(n, n) = tail;

        Eigen::PartialPivLU<CMatrix> lu(eye + theta);
        if (!(lu.rcond() >= kCayleyRcond)) continue;
        const CMatrix num = eye - theta;
        const CMatrix num_t = num.transpose();
        const CMatrix ratio_t = lu.transpose().solve(num_t);
        const CMatrix ratio = ratio_t.transpose();
        const CMatrix bc = -kJ * y0 * ratio;
        CayleyResult out;
        const double scale = std::max(bc.norm(), std::numeric_limits<double>::min());
        out.imag_residue = bc.imag().norm() / scale;
        const RMatrix re = bc.real();
        out.bbar = (re + re.transpose()) / 2.0;
        out.theta = std::move(theta);
        out.retries = attempt;
        out.phase = phase;
        return out;
    }
    throw Error(ErrorCode::ThetaPlusIdentitySingular,
                "I + Theta stayed singular after " + std::to_string(kMaxPhaseRetries) + " phase rotations");
}

inline double pipeline_power_for(const RMatrix &b, const MisoChannel &ch) {
    const ScenarioSpec s = ch.scenario();
    const CMatrix h = channel_milac_tx(s);
    const CMatrix f = precoder_milac_tx(MilacPorts::from_susceptance(b, Side::Tx), s);
    return ch.p_t * std::norm((h * f)(0, 0));
}

} // namespace detail

/// P_T |h f|^2 with h and f assembled by the network models (never the closed form).
inline double pipeline_power(const MilacDesign &design, const MisoChannel &ch) {
    ch.validate();
    if (design.b.rows() != ch.n_t() + 1 || design.b.cols() != ch.n_t() + 1)
        throw Error(ErrorCode::DimensionMismatch, "design must have N_T + 1 ports");
    return detail::pipeline_power_for(design.b, ch);
}

inline MilacDesign optimize_milac_nomc(const MisoChannel &ch, double gauge_phase = 0.0);

/// Globally optimal susceptance matrix for the coupled array.
///
/// gauge_phase rotates the leading singular vector; the optimum does not depend on it.
inline MilacDesign optimize_milac_mc(const MisoChannel &ch, double gauge_phase = 0.0) {
    ch.validate();
    if (!ch.coupling) return optimize_milac_nomc(ch, gauge_phase);
    const PreparedCoupling &c = *ch.coupling;
    const double y0 = ch.y0();
    const Eigen::Index n = ch.n_t();

    const CMatrix g = ch.h() * c.re_y_inv_sqrt().cast<cd>();
    const detail::CayleyResult cay = detail::cayley_design(right_singular_frame(g), y0, gauge_phase);

    // B = Re{Yhat}^{1/2} Bbar Re{Yhat}^{1/2} / Y0 - Im{Yhat}, Yhat = blkdiag(Y0, Y_TT).
    RMatrix sqrt_re = RMatrix::Zero(n + 1, n + 1);
    sqrt_re(0, 0) = std::sqrt(y0);
    sqrt_re.bottomRightCorner(n, n) = c.re_y_sqrt();
    RMatrix im = RMatrix::Zero(n + 1, n + 1);
    im.bottomRightCorner(n, n) = c.y_tt().imag();
    const RMatrix b_raw = sqrt_re * cay.bbar * sqrt_re / y0 - im;

    MilacDesign d;
    d.diagnostics.bbar_imag_residue = cay.imag_residue;
    d.diagnostics.b_asymmetry = (b_raw - b_raw.transpose()).norm() / std::max(b_raw.norm(), 1e-300);
    d.diagnostics.phase_retries = cay.retries;
    d.diagnostics.phase = cay.phase;
    d.b = (b_raw + b_raw.transpose()) / 2.0;
    d.theta_bar = cay.theta;
    d.achieved_power = detail::pipeline_power_for(d.b, ch);
    const double bound = power_milac_mc(ch);
    if (relative_difference(d.achieved_power, bound) > kBoundTolerance)
        throw Error(ErrorCode::BoundMismatch, "pipeline power " + std::to_string(d.achieved_power) +
                                                  " differs from closed form " + std::to_string(bound));
    return d;
}

/// Coupling-unaware design: the precoder model assumes Z_TT = Z0 I.
///
/// Theta is built from the frame of the channel h itself (as estimated on the
/// real, possibly coupled, link). achieved_power is evaluated under the
/// uncoupled model and equals P_T ||h||^2 / 4; use pipeline_power() to
/// evaluate the same design on the coupled array.
inline MilacDesign optimize_milac_nomc(const MisoChannel &ch, double gauge_phase) {
    ch.validate();
    const CMatrix h = ch.h();
    const detail::CayleyResult cay = detail::cayley_design(right_singular_frame(h), ch.y0(), gauge_phase);

    MilacDesign d;
    d.diagnostics.bbar_imag_residue = cay.imag_residue;
    d.diagnostics.phase_retries = cay.retries;
    d.diagnostics.phase = cay.phase;
    d.b = cay.bbar;
    d.theta_bar = cay.theta;

    ScenarioSpec s = ch.scenario();
    s.coupling_tx.reset();
    const CMatrix f = precoder_milac_tx(MilacPorts::from_susceptance(d.b, Side::Tx), s);
    d.achieved_power = ch.p_t * std::norm((h * f)(0, 0));
    const double bound = ch.p_t * h.squaredNorm() / 4.0;
    if (relative_difference(d.achieved_power, bound) > kBoundTolerance)
        throw Error(ErrorCode::BoundMismatch, "uncoupled pipeline power " + std::to_string(d.achieved_power) +
                                                  " differs from P_T ||h||^2 / 4 = " + std::to_string(bound));
    return d;
}

/// 10 log10(p / p_ref).
inline double to_db(double p, double p_ref) { return 10.0 * std::log10(p / p_ref); }

// ---------------------------------------------------------------------------
// Susceptance CSV export

inline void write_real_csv(std::ostream &os, const RMatrix &m, const std::string &comment = {}) {
    if (!comment.empty()) os << "# " << comment << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) os << ',';
            std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
            os << buf;
        }
        os << '\n';
    }
}

inline void export_design_csv(const std::string &path, const MilacDesign &d, const std::string &comment = {}) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
    write_real_csv(os, d.b, comment);
}

} // namespace milac
