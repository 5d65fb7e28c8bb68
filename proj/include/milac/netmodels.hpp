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

// Channel, precoder and combiner matrices of digital and MiLAC-aided MIMO
// links under the unilateral approximation (no receiver-to-transmitter
// feedback block). Every quantity exists in an admittance form (what the
// MiLAC tunes) and, where applicable, an impedance "matching network" form
// used to cross-check it.

#pragma once

#include <optional>
#include <string>
#include <utility>

#include "milac/error.hpp"
#include "milac/matrixkit.hpp"

namespace milac {

enum class Architecture { DigitalMimo, MilacTx, MilacRx, MilacBoth };

inline std::string_view to_string(Architecture a) {
    switch (a) {
        case Architecture::DigitalMimo: return "DigitalMimo";
        case Architecture::MilacTx: return "MilacTx";
        case Architecture::MilacRx: return "MilacRx";
        case Architecture::MilacBoth: return "MilacBoth";
    }
    return "?";
}

/// Description of one link. An empty coupling means Z = Z0 I and selects the
/// simplified no-coupling formulas, which contain no matrix inversion.
struct ScenarioSpec {
    Architecture architecture = Architecture::DigitalMimo;
    Eigen::Index n_s = 0; ///< Tx RF chains (MilacTx, MilacBoth)
    Eigen::Index n_t = 0;
    Eigen::Index n_r = 0;
    Eigen::Index n_z = 0; ///< Rx RF chains (MilacRx, MilacBoth)
    std::optional<CMatrix> coupling_tx;
    std::optional<CMatrix> coupling_rx;
    CMatrix z_rt; ///< N_R x N_T transmission impedance [Ohm]
    double z0 = 50.0;

    double y0() const { return 1.0 / z0; }
    bool has_tx_milac() const {
        return architecture == Architecture::MilacTx || architecture == Architecture::MilacBoth;
    }
    bool has_rx_milac() const {
        return architecture == Architecture::MilacRx || architecture == Architecture::MilacBoth;
    }

    void validate() const {
        auto fail = [](const std::string &m) { throw Error(ErrorCode::DimensionMismatch, m); };
        if (!(z0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "z0 must be positive");
        if (n_t < 1 || n_r < 1) fail("n_t and n_r must be positive");
        if (z_rt.rows() != n_r || z_rt.cols() != n_t) fail("z_rt must be n_r x n_t");
        require_finite(z_rt, "z_rt");
        if (coupling_tx && (coupling_tx->rows() != n_t || coupling_tx->cols() != n_t))
            fail("coupling_tx must be n_t x n_t");
        if (coupling_rx && (coupling_rx->rows() != n_r || coupling_rx->cols() != n_r))
            fail("coupling_rx must be n_r x n_r");
        if (has_tx_milac() && n_s < 1) fail("n_s must be positive with a Tx MiLAC");
        if (has_rx_milac() && n_z < 1) fail("n_z must be positive with an Rx MiLAC");
    }
};

/// Exchanges the roles of transmitter and receiver (Z_RT -> Z_RT^T).
/// A MilacTx link becomes MilacRx and vice versa.
inline ScenarioSpec swap_roles(const ScenarioSpec &s) {
    ScenarioSpec out = s;
    out.n_t = s.n_r;
    out.n_r = s.n_t;
    out.n_s = s.n_z;
    out.n_z = s.n_s;
    out.coupling_tx = s.coupling_rx;
    out.coupling_rx = s.coupling_tx;
    out.z_rt = s.z_rt.transpose();
    if (s.architecture == Architecture::MilacTx) out.architecture = Architecture::MilacRx;
    else if (s.architecture == Architecture::MilacRx) out.architecture = Architecture::MilacTx;
    return out;
}

enum class Side { Tx, Rx };

/// Admittance matrix of a MiLAC seen from its (N_S + N_T) or (N_R + N_Z) ports.
class MilacPorts {
public:
    /// Lossless reciprocal network Y = jB with B real symmetric.
    static MilacPorts from_susceptance(const RMatrix &b, Side side) {
        require_square(b, "susceptance matrix");
        require_finite(b, "susceptance matrix");
        if ((b - b.transpose()).norm() > 1e-9 * b.norm())
            throw Error(ErrorCode::InvalidArgument, "susceptance matrix is not symmetric");
        return MilacPorts(kJ * b.cast<cd>(), side);
    }

    /// Arbitrary admittance; lossy or non-reciprocal inputs are accepted for oracle tests.
    static MilacPorts from_admittance(CMatrix y, Side side) {
        require_square(y, "admittance matrix");
        require_finite(y, "admittance matrix");
        return MilacPorts(std::move(y), side);
    }

    const CMatrix &y() const { return y_; }
    Side side() const { return side_; }
    Eigen::Index dims() const { return y_.rows(); }

    /// ||Re{Y}||_F and ||Im{Y} - Im{Y}^T||_F relative to ||Y||_F.
    bool is_lossless_reciprocal(double tol = 1e-9) const {
        const double scale = std::max(y_.norm(), std::numeric_limits<double>::min());
        const RMatrix b = y_.imag();
        return y_.real().norm() <= tol * scale && (b - b.transpose()).norm() <= tol * scale;
    }

    /// Z = Y^{-1}.
    CMatrix impedance() const {
        return CheckedLu(y_, ErrorCode::SingularSystem, "MiLAC admittance").inverse();
    }

private:
    MilacPorts(CMatrix y, Side side) : y_(std::move(y)), side_(side) {}
    CMatrix y_;
    Side side_;
};

/// End-to-end factors; absent factors act as identity.
struct ScenarioModel {
    CMatrix h;
    std::optional<CMatrix> f;
    std::optional<CMatrix> g;

    CMatrix end_to_end() const {
        CMatrix out = h;
        if (f) out = out * *f;
        if (g) out = *g * out;
        return out;
    }
};

namespace detail {

inline void require_architecture(const ScenarioSpec &s, Architecture a, const char *op) {
    s.validate();
    if (s.architecture != a)
        throw Error(ErrorCode::InvalidArgument,
                    std::string(op) + " requires architecture " + std::string(to_string(a)));
}

/// M^{-1} X for M = Z + Z0 I, or X / (2 Z0) when Z is absent.
inline CMatrix solve_loaded(const std::optional<CMatrix> &z, double z0, const CMatrix &x, const char *what) {
    if (!z) return x / (2.0 * z0);
    const Eigen::Index n = z->rows();
    return CheckedLu(*z + z0 * CMatrix::Identity(n, n), ErrorCode::SingularCoupling, what).solve(x);
}

/// X M^{-1} for M = Z + Z0 I, or X / (2 Z0) when Z is absent.
inline CMatrix solve_loaded_right(const CMatrix &x, const std::optional<CMatrix> &z, double z0, const char *what) {
    if (!z) return x / (2.0 * z0);
    const Eigen::Index n = z->rows();
    return CheckedLu(*z + z0 * CMatrix::Identity(n, n), ErrorCode::SingularCoupling, what).solve_right(x);
}

/// Z^{-1} X, or X / Z0 when Z is absent.
inline CMatrix solve_bare(const std::optional<CMatrix> &z, double z0, const CMatrix &x, const char *what) {
    if (!z) return x / z0;
    return CheckedLu(*z, ErrorCode::SingularCoupling, what).solve(x);
}

/// X Z^{-1}, or X / Z0 when Z is absent.
inline CMatrix solve_bare_right(const CMatrix &x, const std::optional<CMatrix> &z, double z0, const char *what) {
    if (!z) return x / z0;
    return CheckedLu(*z, ErrorCode::SingularCoupling, what).solve_right(x);
}

/// Z^{-1} / Y0 = Z0 Z^{-1}, or I when Z is absent.
inline CMatrix normalized_admittance(const std::optional<CMatrix> &z, double z0, Eigen::Index n, const char *what) {
    if (!z) return CMatrix::Identity(n, n);
    return z0 * CheckedLu(*z, ErrorCode::SingularCoupling, what).inverse();
}

inline void require_ports(const MilacPorts &p, Side side, Eigen::Index dims, const char *what) {
    if (p.side() != side)
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " was given a MiLAC for the other side");
    if (p.dims() != dims)
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + " expects a " + std::to_string(dims) +
                                                      "-port MiLAC, got " + std::to_string(p.dims()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Channels

/// H = Z0 (Z_RR + Z0 I)^{-1} Z_RT (Z_TT + Z0 I)^{-1}; Z_RT / (4 Z0) uncoupled.
inline CMatrix channel_digital(const ScenarioSpec &s) {
    detail::require_architecture(s, Architecture::DigitalMimo, "channel_digital");
    if (!s.coupling_tx && !s.coupling_rx) return s.z_rt / (4.0 * s.z0);
    const CMatrix left = detail::solve_loaded(s.coupling_rx, s.z0, s.z_rt, "Z_RR + Z0 I");
    return s.z0 * detail::solve_loaded_right(left, s.coupling_tx, s.z0, "Z_TT + Z0 I");
}

/// H = Z0 (Z_RR + Z0 I)^{-1} Z_RT Z_TT^{-1}; Z_RT / (2 Z0) uncoupled.
inline CMatrix channel_milac_tx(const ScenarioSpec &s) {
    detail::require_architecture(s, Architecture::MilacTx, "channel_milac_tx");
    if (!s.coupling_tx && !s.coupling_rx) return s.z_rt / (2.0 * s.z0);
    const CMatrix left = detail::solve_loaded(s.coupling_rx, s.z0, s.z_rt, "Z_RR + Z0 I");
    return s.z0 * detail::solve_bare_right(left, s.coupling_tx, s.z0, "Z_TT");
}

/// H = Z0 Z_RR^{-1} Z_RT (Z_TT + Z0 I)^{-1}; Z_RT / (2 Z0) uncoupled.
inline CMatrix channel_milac_rx(const ScenarioSpec &s) {
    detail::require_architecture(s, Architecture::MilacRx, "channel_milac_rx");
    if (!s.coupling_tx && !s.coupling_rx) return s.z_rt / (2.0 * s.z0);
    const CMatrix left = detail::solve_bare(s.coupling_rx, s.z0, s.z_rt, "Z_RR");
    return s.z0 * detail::solve_loaded_right(left, s.coupling_tx, s.z0, "Z_TT + Z0 I");
}

/// H = Z0 Z_RR^{-1} Z_RT Z_TT^{-1}; Z_RT / Z0 uncoupled.
inline CMatrix channel_milac_both(const ScenarioSpec &s) {
    detail::require_architecture(s, Architecture::MilacBoth, "channel_milac_both");
    if (!s.coupling_tx && !s.coupling_rx) return s.z_rt / s.z0;
    const CMatrix left = detail::solve_bare(s.coupling_rx, s.z0, s.z_rt, "Z_RR");
    return s.z0 * detail::solve_bare_right(left, s.coupling_tx, s.z0, "Z_TT");
}

// ---------------------------------------------------------------------------
// Precoder and combiner (admittance form)

/// F = [(Y_F/Y0 + blkdiag(I, Z_TT^{-1}/Y0))^{-1}]_{N_S+(1:N_T), 1:N_S}.
///
/// Only the first N_S columns of the inverse are needed, so they are
/// obtained by a single factorization and solve.
inline CMatrix precoder_milac_tx(const MilacPorts &y_f, const ScenarioSpec &s) {
    s.validate();
    if (!s.has_tx_milac()) throw Error(ErrorCode::InvalidArgument, "architecture has no Tx MiLAC");
    detail::require_ports(y_f, Side::Tx, s.n_s + s.n_t, "precoder_milac_tx");
    const CMatrix load = block_diagonal(CMatrix::Identity(s.n_s, s.n_s),
                                        detail::normalized_admittance(s.coupling_tx, s.z0, s.n_t, "Z_TT"));
    const CMatrix system = y_f.y() * s.z0 + load;
    CMatrix rhs = CMatrix::Zero(s.n_s + s.n_t, s.n_s);
    rhs.topRows(s.n_s).setIdentity();
    const CMatrix cols = CheckedLu(system, ErrorCode::SingularSystem, "precoder system").solve(rhs);
    return block(cols, IndexRange::after(s.n_s, s.n_t), IndexRange{1, s.n_s});
}

/// G = [(Y_G/Y0 + blkdiag(Z_RR^{-1}/Y0, I))^{-1}]_{N_R+(1:N_Z), 1:N_R}.
inline CMatrix combiner_milac_rx(const MilacPorts &y_g, const ScenarioSpec &s) {
    s.validate();
    if (!s.has_rx_milac()) throw Error(ErrorCode::InvalidArgument, "architecture has no Rx MiLAC");
    detail::require_ports(y_g, Side::Rx, s.n_r + s.n_z, "combiner_milac_rx");
    const CMatrix load = block_diagonal(detail::normalized_admittance(s.coupling_rx, s.z0, s.n_r, "Z_RR"),
                                        CMatrix::Identity(s.n_z, s.n_z));
    const CMatrix system = y_g.y() * s.z0 + load;
    CMatrix rhs = CMatrix::Zero(s.n_r + s.n_z, s.n_r);
    rhs.topRows(s.n_r).setIdentity();
    const CMatrix cols = CheckedLu(system, ErrorCode::SingularSystem, "combiner system").solve(rhs);
    return block(cols, IndexRange::after(s.n_r, s.n_z), IndexRange{1, s.n_r});
}

/// H, F and G of the link, according to its architecture.
inline ScenarioModel build_model(const ScenarioSpec &s, const std::optional<MilacPorts> &y_f = std::nullopt,
                                 const std::optional<MilacPorts> &y_g = std::nullopt) {
    ScenarioModel m;
    switch (s.architecture) {
        case Architecture::DigitalMimo: m.h = channel_digital(s); break;
        case Architecture::MilacTx: m.h = channel_milac_tx(s); break;
        case Architecture::MilacRx: m.h = channel_milac_rx(s); break;
        case Architecture::MilacBoth: m.h = channel_milac_both(s); break;
    }
    if (s.has_tx_milac()) {
        if (!y_f) throw Error(ErrorCode::InvalidArgument, "Tx MiLAC admittance required");
        m.f = precoder_milac_tx(*y_f, s);
    }
    if (s.has_rx_milac()) {
        if (!y_g) throw Error(ErrorCode::InvalidArgument, "Rx MiLAC admittance required");
        m.g = combiner_milac_rx(*y_g, s);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Impedance (matching-network) form

/// Z_T = Z_F11 - J_T Z_F21 and J_T = Z_F12 (Z_F22 + Z_TT)^{-1}.
struct TxMatchingForm {
    CMatrix z_t; ///< N_S x N_S
    CMatrix j_t; ///< N_S x N_T
};

/// Z_R = Z_G22 - J_R Z_G12 and J_R = Z_G21 (Z_G11 + Z_RR)^{-1}.
struct RxMatchingForm {
    CMatrix z_r; ///< N_Z x N_Z
    CMatrix j_r; ///< N_Z x N_R
};

inline TxMatchingForm matching_form_tx(const CMatrix &z_f, const ScenarioSpec &s) {
    s.validate();
    const Eigen::Index ns = s.n_s;
    const Eigen::Index nt = s.n_t;
    if (z_f.rows() != ns + nt || z_f.cols() != ns + nt)
        throw Error(ErrorCode::DimensionMismatch, "Z_F must be (N_S+N_T)-square");
    const CMatrix zf11 = z_f.topLeftCorner(ns, ns);
    const CMatrix zf12 = z_f.topRightCorner(ns, nt);
    const CMatrix zf21 = z_f.bottomLeftCorner(nt, ns);
    const CMatrix zf22 = z_f.bottomRightCorner(nt, nt);
    const CMatrix ztt = s.coupling_tx ? *s.coupling_tx : CMatrix(s.z0 * CMatrix::Identity(nt, nt));
    TxMatchingForm out;
    out.j_t = CheckedLu(zf22 + ztt, ErrorCode::SingularBlock, "Z_F22 + Z_TT").solve_right(zf12);
    out.z_t = zf11 - out.j_t * zf21;
    return out;
}

inline RxMatchingForm matching_form_rx(const CMatrix &z_g, const ScenarioSpec &s) {
    s.validate();
    const Eigen::Index nr = s.n_r;
    const Eigen::Index nz = s.n_z;
    if (z_g.rows() != nr + nz || z_g.cols() != nr + nz)
        throw Error(ErrorCode::DimensionMismatch, "Z_G must be (N_R+N_Z)-square");
    const CMatrix zg11 = z_g.topLeftCorner(nr, nr);
    const CMatrix zg12 = z_g.topRightCorner(nr, nz);
    const CMatrix zg21 = z_g.bottomLeftCorner(nz, nr);
    const CMatrix zg22 = z_g.bottomRightCorner(nz, nz);
    const CMatrix zrr = s.coupling_rx ? *s.coupling_rx : CMatrix(s.z0 * CMatrix::Identity(nr, nr));
    RxMatchingForm out;
    out.j_r = CheckedLu(zg11 + zrr, ErrorCode::SingularBlock, "Z_G11 + Z_RR").solve_right(zg21);
    out.z_r = zg22 - out.j_r * zg12;
    return out;
}

/// Z0 (Z_RR + Z0 I)^{-1} Z_RT J_T^T (Z_T + Z0 I)^{-1}.
inline CMatrix end_to_end_impedance_tx(const CMatrix &z_f, const ScenarioSpec &s) {
    const TxMatchingForm m = matching_form_tx(z_f, s);
    const CMatrix left = detail::solve_loaded(s.coupling_rx, s.z0, s.z_rt * m.j_t.transpose(), "Z_RR + Z0 I");
    return s.z0 * detail::solve_loaded_right(left, m.z_t, s.z0, "Z_T + Z0 I");
}

/// Z0 (Z_R + Z0 I)^{-1} J_R Z_RT (Z_TT + Z0 I)^{-1}.
inline CMatrix end_to_end_impedance_rx(const CMatrix &z_g, const ScenarioSpec &s) {
    const RxMatchingForm m = matching_form_rx(z_g, s);
    const CMatrix left = detail::solve_loaded(m.z_r, s.z0, m.j_r * s.z_rt, "Z_R + Z0 I");
    return s.z0 * detail::solve_loaded_right(left, s.coupling_tx, s.z0, "Z_TT + Z0 I");
}

/// Z0 (Z_R + Z0 I)^{-1} J_R Z_RT J_T^T (Z_T + Z0 I)^{-1}.
inline CMatrix end_to_end_impedance_both(const CMatrix &z_f, const CMatrix &z_g, const ScenarioSpec &s) {
    const TxMatchingForm t = matching_form_tx(z_f, s);
    const RxMatchingForm r = matching_form_rx(z_g, s);
    const CMatrix left = detail::solve_loaded(r.z_r, s.z0, r.j_r * s.z_rt * t.j_t.transpose(), "Z_R + Z0 I");
    return s.z0 * detail::solve_loaded_right(left, t.z_t, s.z0, "Z_T + Z0 I");
}

} // namespace milac
