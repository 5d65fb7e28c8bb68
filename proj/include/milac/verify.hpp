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

// Invariant suite over coupling fixtures: reciprocity, admittance versus
// impedance forms, the admittance-only power identity, the three power
// orderings and the unitarity of the designed scattering matrices.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "milac/beamopt.hpp"
#include "milac/coupling.hpp"
#include "milac/matrixkit.hpp"
#include "milac/montecarlo.hpp"
#include "milac/netmodels.hpp"

namespace milac {

struct CheckResult {
    std::string fixture;
    std::string name;
    double residual = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string note;
};

struct VerifyFixture {
    std::string name;
    CMatrix z_tt;
    double z0 = 50.0;
};

struct VerifyOptions {
    std::size_t n_instances = 100;
    std::uint64_t seed = 1;
    Eigen::Index n_s = 2; ///< RF chains of the MIMO scenarios
    Eigen::Index n_r = 3; ///< receive antennas of the MIMO scenarios
};

// Thresholds of the suite.
inline constexpr double kReciprocityTol = 1e-12;
inline constexpr double kDualFormTol = 1e-10;
inline constexpr double kAdmittanceIdentityTol = 1e-10;
inline constexpr double kUnitaryTol = 1e-10;
inline constexpr double kImagResidueTol = 1e-9;
inline constexpr double kMatchingEqualityTol = 1e-12;

/// Coupled array of quarter-wave dipoles at 28 GHz.
inline VerifyFixture dipole_fixture(std::size_t n_t = 16, double spacing_wl = 0.25,
                                    std::size_t quad_order = kDefaultQuadOrder) {
    const ArrayGeometry geom = build_geometry(n_t, std::min<std::size_t>(8, n_t), spacing_wl, 28e9);
    const PhysicalConstants consts = PhysicalConstants::for_wavelength(geom.wavelength);
    return {"dipole", build_coupling_matrix(geom, consts, quad_order).z(), consts.z0};
}

/// Z_TT = Z0 I.
inline VerifyFixture identity_fixture(std::size_t n_t = 16, double z0 = 50.0) {
    const auto n = static_cast<Eigen::Index>(n_t);
    return {"identity", CMatrix(z0 * CMatrix::Identity(n, n)), z0};
}

/// Dipole coupling with a skew-symmetric perturbation; only reciprocity is
/// meaningful (and must fail) on it.
inline VerifyFixture asymmetric_fixture(std::size_t n_t = 16) {
    VerifyFixture f = dipole_fixture(n_t);
    f.name = "asymmetric";
    for (Eigen::Index i = 0; i + 1 < f.z_tt.rows(); ++i) {
        f.z_tt(i, i + 1) += cd{2.0, -1.0};
        f.z_tt(i + 1, i) -= cd{2.0, -1.0};
    }
    return f;
}

namespace detail {

inline RMatrix random_susceptance(Eigen::Index n, double y0, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, y0);
    RMatrix b(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) b(i, j) = normal(rng);
    return (b + b.transpose()) / 2.0;
}

inline CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, double scale, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, scale);
    CMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double re = normal(rng);
            m(i, j) = cd{re, normal(rng)};
        }
    return m;
}

/// Moves the first `lead` ports of a susceptance matrix behind the others.
inline RMatrix rotate_ports(const RMatrix &b, Eigen::Index lead) {
    const Eigen::Index n = b.rows();
    Eigen::VectorXi perm(n);
    for (Eigen::Index i = 0; i < n; ++i) perm(i) = static_cast<int>((i + lead) % n);
    RMatrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = b(perm(i), perm(j));
    return out;
}

class Tracker {
public:
    Tracker(std::string fixture, std::string name, double threshold)
        : fixture_(std::move(fixture)), name_(std::move(name)), threshold_(threshold) {}

    void observe(double r) {
        if (!std::isfinite(r)) finite_ = false;
        else worst_ = std::max(worst_, r);
    }
    void fail(const std::string &why) {
        finite_ = false;
        note_ = why;
    }
    void note(std::string n) { note_ = std::move(n); }

    CheckResult result() const {
        CheckResult c{fixture_, name_, worst_, threshold_, finite_ && worst_ <= threshold_, note_};
        return c;
    }

private:
    std::string fixture_, name_;
    double threshold_;
    double worst_ = 0.0;
    bool finite_ = true;
    std::string note_;
};

} // namespace detail

/// H_Tx^T versus H_Rx of the role-swapped link, for the bare channel and for
/// the end-to-end map with the same MiLAC reused on the other side.
inline CheckResult check_reciprocity(const VerifyFixture &fx, const VerifyOptions &opt) {
    detail::Tracker t(fx.name, "reciprocity", kReciprocityTol);
    const Eigen::Index nt = fx.z_tt.rows();
    const Eigen::Index nr = std::min<Eigen::Index>(opt.n_r, nt);
    for (std::size_t i = 0; i < opt.n_instances; ++i) {
        std::mt19937_64 rng = make_stream(opt.seed, 101, i);
        ScenarioSpec s;
        s.architecture = Architecture::MilacTx;
        s.n_s = opt.n_s;
        s.n_t = nt;
        s.n_r = nr;
        s.coupling_tx = fx.z_tt;
        s.coupling_rx = CMatrix(fx.z_tt.topLeftCorner(nr, nr));
        s.z_rt = detail::random_complex(nr, nt, fx.z0, rng);
        s.z0 = fx.z0;
        const ScenarioSpec w = swap_roles(s);
        try {
            const CMatrix h_tx = channel_milac_tx(s);
            const CMatrix h_rx = channel_milac_rx(w);
            t.observe(relative_difference(h_tx.transpose(), h_rx));

            const RMatrix b = detail::random_susceptance(opt.n_s + nt, 1.0 / fx.z0, rng);
            const CMatrix f = precoder_milac_tx(MilacPorts::from_susceptance(b, Side::Tx), s);
            const CMatrix g = combiner_milac_rx(MilacPorts::from_susceptance(detail::rotate_ports(b, opt.n_s), Side::Rx), w);
            t.observe(relative_difference(CMatrix((h_tx * f).transpose()), CMatrix(g * h_rx)));
        } catch (const Error &e) {
            t.fail(e.what());
        }
    }
    return t.result();
}

/// Admittance form (H F, G H, G H F) versus impedance form of the same MiLACs.
inline CheckResult check_dual_forms(const VerifyFixture &fx, const VerifyOptions &opt) {
    detail::Tracker t(fx.name, "dual_form", kDualFormTol);
    const Eigen::Index nt = fx.z_tt.rows();
    const Eigen::Index nr = std::min<Eigen::Index>(opt.n_r, nt);
    const Eigen::Index nz = opt.n_s;
    for (std::size_t i = 0; i < opt.n_instances; ++i) {
        std::mt19937_64 rng = make_stream(opt.seed, 102, i);
        ScenarioSpec s;
        s.n_s = opt.n_s;
        s.n_t = nt;
        s.n_r = nr;
        s.n_z = nz;
        s.coupling_tx = fx.z_tt;
        s.coupling_rx = CMatrix(fx.z_tt.topLeftCorner(nr, nr));
        s.z_rt = detail::random_complex(nr, nt, fx.z0, rng);
        s.z0 = fx.z0;
        const RMatrix bf = detail::random_susceptance(opt.n_s + nt, 1.0 / fx.z0, rng);
        const RMatrix bg = detail::random_susceptance(nr + nz, 1.0 / fx.z0, rng);
        try {
            const MilacPorts pf = MilacPorts::from_susceptance(bf, Side::Tx);
            const MilacPorts pg = MilacPorts::from_susceptance(bg, Side::Rx);
            const CMatrix z_f = pf.impedance();
            const CMatrix z_g = pg.impedance();

            s.architecture = Architecture::MilacTx;
            t.observe(relative_difference(build_model(s, pf).end_to_end(), end_to_end_impedance_tx(z_f, s)));
            s.architecture = Architecture::MilacRx;
            t.observe(relative_difference(build_model(s, std::nullopt, pg).end_to_end(), end_to_end_impedance_rx(z_g, s)));
            s.architecture = Architecture::MilacBoth;
            t.observe(relative_difference(build_model(s, pf, pg).end_to_end(), end_to_end_impedance_both(z_f, z_g, s)));
        } catch (const Error &e) {
            t.fail(e.what());
        }
    }
    return t.result();
}

inline MisoChannel fixture_channel(const VerifyFixture &fx, const std::shared_ptr<const PreparedCoupling> &pc,
                                   std::uint64_t seed, std::uint64_t stream, std::size_t i) {
    std::mt19937_64 rng = make_stream(seed, stream, i);
    MisoChannel ch;
    ch.z_rt = sample_channel(static_cast<std::size_t>(fx.z_tt.rows()), 1.0, rng);
    ch.coupling = pc;
    ch.z0 = fx.z0;
    return ch;
}

/// Every symmetric-fixture check that goes through the MISO power formulas.
inline std::vector<CheckResult> check_power_invariants(const VerifyFixture &fx, const VerifyOptions &opt) {
    std::vector<CheckResult> out;
    std::shared_ptr<const PreparedCoupling> pc;
    try {
        pc = std::make_shared<const PreparedCoupling>(fx.z_tt, fx.z0);
    } catch (const Error &e) {
        CheckResult c{fx.name, "prepare_coupling", 0.0, 0.0, false, e.what()};
        out.push_back(c);
        return out;
    }
    const Eigen::Index n = fx.z_tt.rows();
    const bool uncoupled = relative_difference(fx.z_tt, CMatrix(fx.z0 * CMatrix::Identity(n, n))) == 0.0;

    // Trace inequality Tr(Re{Z}^{-1}) >= Y0 N_T.
    {
        const double ratio = pc->re_z_inv().trace() * fx.z0 / static_cast<double>(n);
        detail::Tracker t(fx.name, "trace_inequality", 1e-12);
        t.observe(std::max(0.0, 1.0 - ratio));
        char buf[64];
        std::snprintf(buf, sizeof buf, "ratio=%.6f%s", ratio, std::abs(ratio - 1.0) <= 1e-12 ? " (equality)" : "");
        t.note(buf);
        out.push_back(t.result());
    }

    detail::Tracker yyy(fx.name, "admittance_identity", kAdmittanceIdentityTol);
    detail::Tracker matching(fx.name, "matching_equals_milac", kMatchingEqualityTol);
    detail::Tracker order(fx.name, "milac_ge_unmatched_digital", 0.0);
    detail::Tracker gram(fx.name, "mismatch_gram_psd", 1e-9);
    detail::Tracker unit(fx.name, "unitary_symmetric", kUnitaryTol);
    detail::Tracker imag(fx.name, "susceptance_imag_residue", kImagResidueTol);
    detail::Tracker bound(fx.name, "bound_attainment", kBoundTolerance);
    double equality_gap = 0.0;
    std::size_t violations = 0;

    yyy.observe(admittance_identity_residual(*pc));
    {
        const double lam = mismatch_gram_min_eigenvalue(*pc);
        gram.observe(std::max(0.0, -lam) / (fx.z0 * fx.z0));
    }
    for (std::size_t i = 0; i < opt.n_instances; ++i) {
        const MisoChannel ch = fixture_channel(fx, pc, opt.seed, 103, i);
        try {
            const double p_mc = power_milac_mc(ch);
            yyy.observe(relative_difference(power_milac_mc_admittance(ch), p_mc));
            yyy.observe(relative_difference(power_milac_mc_quadratic(ch), p_mc));
            matching.observe(relative_difference(power_digital_matching(ch), p_mc));
            const double p_dig = power_digital_nomatching(ch);
            const double deficit = (p_dig - p_mc) / p_mc;
            // Rounding may push an exact tie a few ulps either way.
            if (deficit > 1e-13) ++violations;
            order.observe(std::max(0.0, deficit - 1e-13));
            equality_gap = std::max(equality_gap, std::abs(deficit));

            const MilacDesign d = optimize_milac_mc(ch);
            bound.observe(relative_difference(d.achieved_power, p_mc));
            imag.observe(d.diagnostics.bbar_imag_residue);
            const UnitarySymmetricResiduals rb = is_unitary_symmetric(d.theta_bar);
            unit.observe(std::max(rb.unitary, rb.symmetric));
            const Eigen::Index m = d.b.rows();
            const CMatrix yb = ch.y0() * CMatrix::Identity(m, m);
            const CMatrix jb = kJ * d.b.cast<cd>();
            const CMatrix theta = CheckedLu(yb + jb, ErrorCode::SingularSystem, "Y0 I + jB").solve(CMatrix(yb - jb));
            const UnitarySymmetricResiduals rt = is_unitary_symmetric(theta);
            unit.observe(std::max(rt.unitary, rt.symmetric));
        } catch (const Error &e) {
            bound.fail(e.what());
        }
    }
    order.note("violations=" + std::to_string(violations) +
               (uncoupled ? (equality_gap <= kMatchingEqualityTol ? " (equality branch)" : " (equality expected)") : ""));
    if (uncoupled && equality_gap > kMatchingEqualityTol) order.fail("no equality for Z = Z0 I");
    for (const detail::Tracker *t : {&yyy, &matching, &order, &gram, &unit, &imag, &bound}) out.push_back(t->result());
    return out;
}

/// Full suite on one fixture. Asymmetric fixtures only get the reciprocity check.
inline std::vector<CheckResult> verify_fixture(const VerifyFixture &fx, const VerifyOptions &opt) {
    std::vector<CheckResult> out;
    out.push_back(check_reciprocity(fx, opt));
    const bool symmetric = (fx.z_tt - fx.z_tt.transpose()).norm() <= kHermitianTolerance * fx.z_tt.norm();
    if (!symmetric) return out;
    out.push_back(check_dual_forms(fx, opt));
    for (CheckResult &c : check_power_invariants(fx, opt)) out.push_back(std::move(c));
    return out;
}

inline void print_checks(std::ostream &os, const std::vector<CheckResult> &checks) {
    char buf[64];
    for (const CheckResult &c : checks) {
        std::snprintf(buf, sizeof buf, "%.3e <= %.1e", c.residual, c.threshold);
        os << (c.pass ? "PASS " : "FAIL ") << c.fixture << ' ' << c.name << ' ' << buf;
        if (!c.note.empty()) os << "  " << c.note;
        os << '\n';
    }
}

} // namespace milac
