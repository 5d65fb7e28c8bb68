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

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "milac/beamopt.hpp"
#include "milac/coupling.hpp"
#include "oracles.hpp"

using namespace milac;

namespace {

constexpr double kZ0 = 50.0;

template <typename F>
ErrorCode code_of(F &&f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvalidArgument;
}

std::shared_ptr<const PreparedCoupling> dipoles(std::size_t n, double spacing) {
    const ArrayGeometry g = build_geometry(n, grid_columns(8, n), spacing, 28e9);
    return std::make_shared<const PreparedCoupling>(
        build_coupling_matrix(g, PhysicalConstants::for_wavelength(g.wavelength, kZ0)));
}

std::shared_ptr<const PreparedCoupling> random_prepared(Eigen::Index n, std::mt19937_64 &rng) {
    return std::make_shared<const PreparedCoupling>(oracle::random_coupling(n, kZ0, rng), kZ0);
}

MisoChannel channel(const CMatrix &z_rt, std::shared_ptr<const PreparedCoupling> c, double p_t = 1.0) {
    MisoChannel ch;
    ch.z_rt = z_rt;
    ch.coupling = std::move(c);
    ch.p_t = p_t;
    ch.z0 = kZ0;
    return ch;
}

} // namespace

TEST_CASE("optimize_milac_mc: two antennas with a hand-built coupling", "[beamopt]") {
    CMatrix z(2, 2);
    z << kZ0, 5.0, 5.0, kZ0;
    const auto c = std::make_shared<const PreparedCoupling>(z, kZ0);
    CMatrix zrt(1, 2);
    zrt << cd{3.0, 1.0}, cd{-2.0, 0.5};
    const MisoChannel ch = channel(zrt, c, 2.0);
    // Re{Z} has eigenvalues 55 and 45 along (1, 1)/sqrt(2) and (1, -1)/sqrt(2).
    const cd u1 = (zrt(0, 0) + zrt(0, 1)) / std::sqrt(2.0);
    const cd u2 = (zrt(0, 0) - zrt(0, 1)) / std::sqrt(2.0);
    const double hand = 2.0 / kZ0 / 16.0 * (std::norm(u1) / 55.0 + std::norm(u2) / 45.0);
    const MilacDesign d = optimize_milac_mc(ch);
    CHECK(d.achieved_power == Catch::Approx(hand).epsilon(1e-12));
    CHECK(power_milac_mc(ch) == Catch::Approx(hand).epsilon(1e-14));
    CHECK(pipeline_power(d, ch) == Catch::Approx(hand).epsilon(1e-12));
}

TEST_CASE("optimize_milac_mc: no susceptance perturbation beats the design", "[beamopt][oracle]") {
    std::mt19937_64 rng(51);
    const auto c = random_prepared(3, rng);
    const MisoChannel ch = channel(oracle::random_complex(1, 3, rng, 10.0), c);
    const MilacDesign d = optimize_milac_mc(ch);
    const double best = d.achieved_power;
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<int> scale_pick(0, 5);
    double worst_excess = -1.0;
    for (int k = 0; k < 100000; ++k) {
        const double scale = std::pow(10.0, -1 - scale_pick(rng)) * d.b.norm();
        RMatrix p(4, 4);
        for (Eigen::Index i = 0; i < 4; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) p(i, j) = p(j, i) = scale * nd(rng);
        const double trial = detail::pipeline_power_for(d.b + p, ch);
        worst_excess = std::max(worst_excess, (trial - best) / best);
    }
    CHECK(worst_excess <= 1e-10);
}

TEST_CASE("optimize_milac_nomc: single nonzero channel entry", "[beamopt]") {
    CMatrix zrt = CMatrix::Zero(1, 4);
    zrt(0, 0) = 2.0 * kZ0;
    const MisoChannel ch = channel(zrt, nullptr);
    REQUIRE((ch.h() - CMatrix::Identity(1, 4)).norm() == 0.0);
    const MilacDesign d = optimize_milac_nomc(ch);
    const CMatrix col = d.theta_bar.block(1, 0, 4, 1);
    CHECK(std::abs(std::abs(col(0, 0)) - 1.0) < 1e-15);
    CHECK(col.bottomRows(3).norm() == 0.0);
    CHECK(d.achieved_power == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("optimize_milac_nomc: Theta column follows h", "[beamopt]") {
    std::mt19937_64 rng(52);
    for (Eigen::Index n : {1, 2, 7, 32}) {
        const MisoChannel ch = channel(oracle::random_complex(1, n, rng, 10.0), nullptr);
        const MilacDesign d = optimize_milac_nomc(ch);
        const CMatrix h = ch.h();
        const CMatrix expected = h.adjoint() / h.norm() * std::polar(1.0, d.diagnostics.phase);
        INFO("N_T = " << n);
        CHECK(oracle::rel(d.theta_bar.block(1, 0, n, 1), expected) < 1e-14);
        CHECK(d.achieved_power == Catch::Approx(h.squaredNorm() / 4.0).epsilon(1e-10));
        CHECK(d.achieved_power == Catch::Approx(power_milac_nomc(ch)).epsilon(1e-10));
        CHECK(pipeline_power(d, ch) == Catch::Approx(power_milac_nomc(ch)).epsilon(1e-10));
    }
}

TEST_CASE("optimize: aware and unaware agree when the coupling is Z0 I", "[beamopt]") {
    std::mt19937_64 rng(53);
    for (Eigen::Index n : {1, 4, 16}) {
        const auto c = std::make_shared<const PreparedCoupling>(CMatrix(kZ0 * CMatrix::Identity(n, n)), kZ0);
        const CMatrix zrt = oracle::random_complex(1, n, rng, 10.0);
        const double mc = optimize_milac_mc(channel(zrt, c)).achieved_power;
        const double nomc = optimize_milac_nomc(channel(zrt, nullptr)).achieved_power;
        CHECK(std::abs(mc - nomc) <= 1e-10 * nomc);
        CHECK(power_milac_mc(channel(zrt, c)) == Catch::Approx(power_milac_nomc(channel(zrt, nullptr))).epsilon(1e-14));
    }
}

TEST_CASE("optimize_milac_mc: bound attained on dipole arrays", "[beamopt][property]") {
    std::mt19937_64 rng(54);
    for (double d : {0.25, 1.0 / 3.0, 0.5, 1.0}) {
        const auto c = dipoles(16, d);
        for (int k = 0; k < 5; ++k) {
            const MisoChannel ch = channel(oracle::random_complex(1, 16, rng), c);
            const MilacDesign des = optimize_milac_mc(ch);
            INFO("d = " << d);
            CHECK(relative_difference(des.achieved_power, power_milac_mc(ch)) < 1e-8);
            const auto us = is_unitary_symmetric(des.theta_bar);
            CHECK(us.unitary < 1e-10);
            CHECK(us.symmetric < 1e-10);
            CHECK(des.diagnostics.bbar_imag_residue < 1e-9);
            CHECK((des.b - des.b.transpose()).norm() == 0.0);
            CHECK(des.ports().is_lossless_reciprocal());
        }
    }
}

TEST_CASE("optimize_milac_mc: phase gauge leaves the power unchanged", "[beamopt][property]") {
    std::mt19937_64 rng(55);
    const auto c = dipoles(16, 0.25);
    const MisoChannel ch = channel(oracle::random_complex(1, 16, rng), c);
    const double p0 = optimize_milac_mc(ch).achieved_power;
    for (double phi : {0.3, 1.0, 2.5, -1.7, 3.1}) {
        const MilacDesign d = optimize_milac_mc(ch, phi);
        CHECK(std::abs(d.achieved_power - p0) <= 1e-10 * p0);
    }
}

TEST_CASE("power_milac_mc: single antenna", "[beamopt]") {
    const auto c = std::make_shared<const PreparedCoupling>(CMatrix::Constant(1, 1, kZ0), kZ0);
    for (double phase : {0.0, 1.0, 2.0, -2.5}) {
        CMatrix zrt(1, 1);
        zrt(0, 0) = std::polar(7.0, phase);
        const MisoChannel ch = channel(zrt, c, 3.0);
        // Re{Z}^{-1} = Y0 here, so the power is P_T Y0^2 |z|^2 / 16.
        const double expected = 3.0 * 49.0 / (kZ0 * kZ0) / 16.0;
        CHECK(power_milac_mc(ch) == Catch::Approx(expected).epsilon(1e-14));
        CHECK(power_digital_matching(ch) == Catch::Approx(expected).epsilon(1e-12));
        CHECK(optimize_milac_mc(ch).achieved_power == Catch::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("power_milac_mc: quadratic and admittance routes agree", "[beamopt][property]") {
    std::mt19937_64 rng(56);
    for (Eigen::Index n : {1, 3, 8, 32, 64}) {
        const auto c = random_prepared(n, rng);
        const MisoChannel ch = channel(oracle::random_complex(1, n, rng), c);
        const double p = power_milac_mc(ch);
        INFO("N_T = " << n);
        CHECK(relative_difference(power_milac_mc_quadratic(ch), p) < 1e-12);
        CHECK(relative_difference(power_milac_mc_admittance(ch), p) < 1e-10);
        CHECK(admittance_identity_residual(*c) < 1e-10);
    }
}

TEST_CASE("admittance identity against a direct evaluation", "[beamopt][oracle]") {
    std::mt19937_64 rng(57);
    const CMatrix z = oracle::random_coupling(6, kZ0, rng);
    const CMatrix y = z.inverse();
    const RMatrix re_y = y.real();
    const CMatrix lhs = y * re_y.inverse().cast<cd>() * y.adjoint();
    const RMatrix re_z = z.real();
    CHECK(oracle::rel(lhs, re_z.inverse().cast<cd>()) < 1e-12);
}

TEST_CASE("expected powers: closed forms", "[beamopt]") {
    const auto eye = std::make_shared<const PreparedCoupling>(CMatrix(kZ0 * CMatrix::Identity(8, 8)), kZ0);
    const double ref = 2.0 * 0.5 / (kZ0 * kZ0) / 16.0 * 8.0;
    CHECK(expected_power_milac_nomc(8, kZ0, 2.0, 0.5) == Catch::Approx(ref).epsilon(1e-15));
    CHECK(expected_power_milac_mc(*eye, 2.0, 0.5) == Catch::Approx(ref).epsilon(1e-14));
    CHECK(expected_power_digital_nomatching(*eye, 2.0, 0.5) == Catch::Approx(ref).epsilon(1e-14));

    const auto dense = dipoles(64, 0.25);
    CHECK(expected_power_milac_mc(*dense, 1.0, 1.0) > expected_power_milac_nomc(64, kZ0, 1.0, 1.0));
    const auto mid = dipoles(64, 1.0 / 3.0);
    CHECK(expected_power_digital_nomatching(*mid, 1.0, 1.0) <= expected_power_milac_mc(*mid, 1.0, 1.0));
}

TEST_CASE("matching network: uncoupled and dipole cases", "[beamopt]") {
    const auto eye = std::make_shared<const PreparedCoupling>(CMatrix(kZ0 * CMatrix::Identity(3, 3)), kZ0);
    const CMatrix zf = matching_network_impedance(*eye);
    CMatrix expected = CMatrix::Zero(6, 6);
    expected.topRightCorner(3, 3) = -kJ * kZ0 * CMatrix::Identity(3, 3);
    expected.bottomLeftCorner(3, 3) = -kJ * kZ0 * CMatrix::Identity(3, 3);
    CHECK((zf - expected).norm() < 1e-12);

    const auto c = dipoles(16, 1.0 / 3.0);
    const CMatrix z = matching_network_impedance(*c);
    CHECK((z - z.transpose()).norm() == 0.0);
    CHECK(z.real().norm() == 0.0);

    std::mt19937_64 rng(58);
    const MisoChannel ch = channel(oracle::random_complex(1, 16, rng), c);
    ScenarioSpec s;
    s.architecture = Architecture::MilacTx;
    s.n_s = s.n_t = 16;
    s.n_r = 1;
    s.coupling_tx = c->z();
    s.z_rt = ch.z_rt;
    const TxMatchingForm m = matching_form_tx(z, s);
    CHECK((m.z_t - kZ0 * CMatrix::Identity(16, 16)).norm() / kZ0 < 1e-10);
    const CMatrix j_expected = -kJ * std::sqrt(kZ0) * c->re_z_inv_sqrt().cast<cd>();
    CHECK(oracle::rel(m.j_t, j_expected) < 1e-10);

    // h = z_RT J_T^T (Z_T + Z0 I)^{-1} / 2 = -j z_RT Re{Z}^{-1/2} / (4 sqrt(Z0)).
    const CMatrix h = ch.z_rt * m.j_t.transpose() * (m.z_t + kZ0 * CMatrix::Identity(16, 16)).inverse() / 2.0;
    const CMatrix h_mn = -kJ / (4.0 * std::sqrt(kZ0)) * ch.z_rt * c->re_z_inv_sqrt().cast<cd>();
    CHECK(oracle::rel(h, h_mn) < 1e-10);
}

TEST_CASE("digital baselines: matched digital equals MiLAC, unmatched is below", "[beamopt][property]") {
    std::mt19937_64 rng(59);
    const auto c = dipoles(16, 0.25);
    CHECK(mismatch_gram_min_eigenvalue(*c) >= -1e-9);
    int violations = 0;
    double worst_prop2 = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const MisoChannel ch = channel(oracle::random_complex(1, 16, rng), c);
        const double mc = power_milac_mc(ch);
        worst_prop2 = std::max(worst_prop2, relative_difference(power_digital_matching(ch), mc));
        if (!(power_digital_nomatching(ch) < mc)) ++violations;
    }
    CHECK(worst_prop2 < 1e-12);
    CHECK(violations == 0);

    const auto eye = std::make_shared<const PreparedCoupling>(CMatrix(kZ0 * CMatrix::Identity(16, 16)), kZ0);
    const MisoChannel ch = channel(oracle::random_complex(1, 16, rng), eye);
    CHECK(relative_difference(power_digital_nomatching(ch), power_milac_mc(ch)) < 1e-12);
    CHECK(relative_difference(power_digital_matching(ch), power_milac_mc(ch)) < 1e-12);
    const MisoChannel none = channel(ch.z_rt, nullptr);
    CHECK(relative_difference(power_digital_matching(none), power_milac_nomc(none)) < 1e-12);
}

TEST_CASE("power_report: table invariants", "[beamopt]") {
    std::mt19937_64 rng(60);
    const auto c = dipoles(16, 0.5);
    const PowerReport r = power_report(channel(oracle::random_complex(1, 16, rng), c));
    CHECK(relative_difference(r.digital_matching, r.milac_mc) < 1e-12);
    CHECK(r.milac_mc >= r.digital_nomatching);
    CHECK(r.expected_digital_matching == r.expected_milac_mc);
    CHECK(r.expected_milac_mc >= r.expected_milac_nomc);
}

TEST_CASE("unaware design loses power on a coupled array", "[beamopt]") {
    std::mt19937_64 rng(61);
    const auto c = dipoles(16, 0.25);
    for (int k = 0; k < 5; ++k) {
        const MisoChannel ch = channel(oracle::random_complex(1, 16, rng), c);
        const MilacDesign unaware = optimize_milac_nomc(ch);
        CHECK(pipeline_power(unaware, ch) < power_milac_mc(ch));
    }
}

TEST_CASE("embedding of the RF-chain port", "[beamopt]") {
    std::mt19937_64 rng(62);
    const auto c = random_prepared(5, rng);
    RMatrix re_hat = RMatrix::Zero(6, 6);
    re_hat(0, 0) = 1.0 / kZ0;
    re_hat.bottomRightCorner(5, 5) = c->y_tt().real();
    const RMatrix inv_sqrt = hermitian_power(re_hat, HermitianExponent::MinusHalf);
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(6, 0);
    CHECK((std::sqrt(1.0 / kZ0) * inv_sqrt * e - e).norm() < 1e-12);
    CHECK((c->re_y_sqrt() * c->re_y_inv_sqrt() - RMatrix::Identity(5, 5)).norm() < 1e-10);
}

TEST_CASE("export_design_csv writes the susceptance matrix", "[beamopt]") {
    std::mt19937_64 rng(63);
    const auto c = random_prepared(4, rng);
    const MilacDesign d = optimize_milac_mc(channel(oracle::random_complex(1, 4, rng), c));
    const std::string path = "test_beamopt_design.csv";
    export_design_csv(path, d, "design");
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "# design");
    RMatrix back(5, 5);
    for (Eigen::Index r = 0; r < 5; ++r) {
        std::getline(is, line);
        std::stringstream ss(line);
        std::string cell;
        for (Eigen::Index col = 0; col < 5; ++col) {
            std::getline(ss, cell, ',');
            back(r, col) = std::stod(cell);
        }
    }
    CHECK(back == d.b);
    std::remove(path.c_str());
}

TEST_CASE("beamopt: errors", "[beamopt][errors]") {
    CMatrix asym = kZ0 * CMatrix::Identity(2, 2);
    asym(0, 1) = 3.0;
    CHECK(code_of([&] { PreparedCoupling(asym, kZ0); }) == ErrorCode::InvalidArgument);
    CMatrix notpd = kZ0 * CMatrix::Identity(2, 2);
    notpd(0, 1) = notpd(1, 0) = 80.0;
    CHECK_THROWS_AS(PreparedCoupling(notpd, kZ0), Error);

    const MisoChannel zero = channel(CMatrix::Zero(1, 3), nullptr);
    CHECK(code_of([&] { optimize_milac_nomc(zero); }) == ErrorCode::ZeroVector);
    std::mt19937_64 rng(64);
    const MisoChannel mismatch = channel(CMatrix::Ones(1, 3), random_prepared(4, rng));
    CHECK(code_of([&] { optimize_milac_mc(mismatch); }) == ErrorCode::DimensionMismatch);
    MisoChannel bad_power = channel(CMatrix::Ones(1, 3), nullptr, -1.0);
    CHECK(code_of([&] { power_milac_mc(bad_power); }) == ErrorCode::InvalidArgument);
    const MilacDesign d = optimize_milac_nomc(channel(CMatrix::Ones(1, 3), nullptr));
    CHECK(code_of([&] { pipeline_power(d, channel(CMatrix::Ones(1, 4), nullptr)); }) ==
          ErrorCode::DimensionMismatch);
}
