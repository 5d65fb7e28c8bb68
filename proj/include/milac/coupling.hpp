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

// Mutual-coupling impedance matrix of a uniform planar array of thin wire
// dipoles parallel to the y axis, using the induced-EMF double integral with
// sinusoidal current distributions.

#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "milac/error.hpp"
#include "milac/matrixkit.hpp"
#include "milac/quadrature.hpp"

namespace milac {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr std::size_t kDefaultQuadOrder = 64;

struct PhysicalConstants {
    double eta0 = 377.0; ///< free-space impedance [Ohm]
    double k0 = 0.0;     ///< wavenumber [rad/m]
    double z0 = 50.0;    ///< reference impedance [Ohm]

    double y0() const { return 1.0 / z0; }

    static PhysicalConstants for_wavelength(double wavelength, double z0 = 50.0, double eta0 = 377.0) {
        if (!(wavelength > 0.0) || !(z0 > 0.0) || !(eta0 > 0.0))
            throw Error(ErrorCode::InvalidArgument, "wavelength, z0 and eta0 must be positive");
        return {eta0, 2.0 * std::numbers::pi / wavelength, z0};
    }
};

struct AntennaPosition {
    double x = 0.0;
    double y = 0.0;
    std::size_t ix = 0; ///< column index along x
    std::size_t iy = 0; ///< row index along y
};

struct ArrayGeometry {
    std::size_t n_antennas = 1;
    std::size_t n_x = 1;
    std::size_t n_y = 1;
    double spacing = 0.0;        ///< d [m]
    double dipole_length = 0.0;  ///< ell [m]
    double dipole_radius = 0.0;  ///< r [m], documentation only; the kernel is thin-wire
    double wavelength = 0.0;     ///< lambda [m]
    std::vector<AntennaPosition> positions;

    double spacing_over_lambda() const { return spacing / wavelength; }
};

/// Grid width actually used for n_antennas: arrays shorter than one row are a single row.
inline std::size_t grid_columns(std::size_t n_x, std::size_t n_antennas) { return std::min(n_x, n_antennas); }

/// Uniform planar array of n_antennas = n_x * n_y dipoles at (i d, k d).
///
/// Antennas are numbered row by row: index = k * n_x + i.
inline ArrayGeometry build_geometry(std::size_t n_antennas, std::size_t n_x, double spacing_in_wavelengths,
                                    double frequency_hz, double ell_in_wavelengths = 0.25,
                                    double radius_over_ell = 0.01) {
    if (n_antennas == 0 || n_x == 0 || n_antennas % n_x != 0)
        throw Error(ErrorCode::BadGrid, "n_x = " + std::to_string(n_x) + " does not divide n_antennas = " +
                                            std::to_string(n_antennas));
    if (!(spacing_in_wavelengths > 0.0))
        throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
    if (!(frequency_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "frequency must be positive");
    if (!(ell_in_wavelengths > 0.0))
        throw Error(ErrorCode::InvalidArgument, "dipole length must be positive");
    if (!(radius_over_ell > 0.0) || !(radius_over_ell < 1.0 / 50.0))
        throw Error(ErrorCode::InvalidArgument, "thin-wire model needs 0 < r < ell/50");

    ArrayGeometry g;
    g.n_antennas = n_antennas;
    g.n_x = n_x;
    g.n_y = n_antennas / n_x;
    g.wavelength = kSpeedOfLight / frequency_hz;
    g.spacing = spacing_in_wavelengths * g.wavelength;
    g.dipole_length = ell_in_wavelengths * g.wavelength;
    g.dipole_radius = radius_over_ell * g.dipole_length;
    g.positions.reserve(n_antennas);
    for (std::size_t k = 0; k < g.n_y; ++k)
        for (std::size_t i = 0; i < n_x; ++i)
            g.positions.push_back({static_cast<double>(i) * g.spacing, static_cast<double>(k) * g.spacing, i, k});
    return g;
}

namespace detail {

/// Induced-EMF integrand for two y-directed dipoles.
///
/// `dx` is the x separation, `sep` = y'' - y' the signed y separation of the
/// two integration points, `s` and `t` their offsets from the respective
/// dipole centres.
struct DipoleKernel {
    double k0;
    double half_length;
    cd prefactor;  // j eta0 / (4 pi k0) / sin^2(k0 ell / 2)

    DipoleKernel(const PhysicalConstants &c, double ell)
        : k0(c.k0), half_length(0.5 * ell) {
        const double sn = std::sin(c.k0 * half_length);
        prefactor = kJ * c.eta0 / (4.0 * std::numbers::pi * c.k0) / (sn * sn);
    }

    cd operator()(double dx, double sep, double s, double t) const {
        const double d2 = dx * dx + sep * sep;
        if (!(d2 > 0.0))
            throw Error(ErrorCode::SingularKernel, "quadrature node at zero distance");
        const double d = std::sqrt(d2);
        const double inv_d = 1.0 / d;
        const cd jk{0.0, k0};
        const cd phase = std::exp(-jk * d) * inv_d;
        const cd bracket = (sep * sep / d2) * (3.0 * inv_d * inv_d + 3.0 * jk * inv_d - k0 * k0) -
                           (jk + inv_d) * inv_d + k0 * k0;
        const double current = std::sin(k0 * (half_length - std::abs(s))) *
                               std::sin(k0 * (half_length - std::abs(t)));
        return prefactor * bracket * phase * current;
    }
};

} // namespace detail

/// Mutual impedance between two dipoles whose centres differ by (dx, dy).
///
/// Each dipole axis is split at its feed point, where the sinusoidal current
/// has a kink, and each half is integrated with quad_order/2 Gauss-Legendre
/// nodes. When the dipoles are collinear and touch end to end, the panel pair
/// meeting at the contact point has an integrable 1/r corner singularity and
/// is integrated with a Duffy transform instead.
inline cd mutual_impedance_offset(double dx, double dy, double dipole_length, const PhysicalConstants &consts,
                                  std::size_t quad_order = kDefaultQuadOrder) {
    if (quad_order < 8 || quad_order % 2 != 0)
        throw Error(ErrorCode::InvalidArgument, "quad_order must be even and >= 8");
    const double h = 0.5 * dipole_length;
    const double eps = 1e-9 * dipole_length;
    const bool collinear = std::abs(dx) <= eps;
    if (collinear && std::abs(dy) < dipole_length - eps)
        throw Error(ErrorCode::SingularKernel, "collinear dipoles overlap");
    const bool touching = collinear && std::abs(std::abs(dy) - dipole_length) <= eps;
    if (touching) dx = 0.0;

    const detail::DipoleKernel kernel(consts, dipole_length);
    const std::size_t m = quad_order / 2;
    const GaussLegendreRule unit = gauss_legendre(m, 0.0, 1.0);

    // Panels in offset coordinates: lower half [-h, 0] and upper half [0, h].
    const double lo[2] = {-h, 0.0};
    cd total{0.0, 0.0};
    for (int ps = 0; ps < 2; ++ps) {
        for (int pt = 0; pt < 2; ++pt) {
            // The contact point is (s, t) = (+h, -h) for dy > 0, (-h, +h) for dy < 0.
            const bool corner = touching && ((dy > 0 && ps == 1 && pt == 0) || (dy < 0 && ps == 0 && pt == 1));
            if (!corner) {
                for (std::size_t i = 0; i < m; ++i) {
                    const double s = lo[ps] + h * unit.nodes[i];
                    cd row{0.0, 0.0};
                    for (std::size_t j = 0; j < m; ++j) {
                        const double t = lo[pt] + h * unit.nodes[j];
                        row += unit.weights[j] * kernel(dx, dy + t - s, s, t);
                    }
                    total += unit.weights[i] * row * (h * h);
                }
                continue;
            }
            // Local distances u, v >= 0 from the contact point along each dipole;
            // the y separation there is sign(dy) (u + v).
            const double sgn = dy > 0 ? 1.0 : -1.0;
            auto eval = [&](double u, double v) {
                const double s = sgn * (h - u);
                const double t = -sgn * (h - v);
                return kernel(0.0, sgn * (u + v), s, t);
            };
            for (std::size_t i = 0; i < m; ++i) {
                const double a = unit.nodes[i];
                cd acc{0.0, 0.0};
                for (std::size_t j = 0; j < m; ++j) {
                    const double b = unit.nodes[j];
                    acc += unit.weights[j] * (eval(h * a, h * a * b) + eval(h * a * b, h * a));
                }
                total += unit.weights[i] * acc * (h * h * a);
            }
        }
    }
    return total;
}

/// Mutual impedance between antennas p and q (0-based) of the array.
inline cd mutual_impedance(const ArrayGeometry &geom, const PhysicalConstants &consts, std::size_t p,
                           std::size_t q, std::size_t quad_order = kDefaultQuadOrder) {
    if (p >= geom.n_antennas || q >= geom.n_antennas)
        throw Error(ErrorCode::OutOfRange, "antenna index outside the array");
    if (p == q) throw Error(ErrorCode::SameAntenna, "self-impedance is fixed to z0, not integrated");
    const auto &a = geom.positions[p];
    const auto &b = geom.positions[q];
    return mutual_impedance_offset(b.x - a.x, b.y - a.y, geom.dipole_length, consts, quad_order);
}

/// Symmetric array impedance matrix with diagonal z0 and positive-definite real part.
class CouplingMatrix {
public:
    /// Validates and adopts an impedance matrix. Near-symmetric input is
    /// mirrored from its upper triangle and the diagonal is snapped to z0.
    static CouplingMatrix from_impedance(const CMatrix &z, double z0) {
        require_square(z, "coupling matrix");
        require_finite(z, "coupling matrix");
        if (!(z0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "z0 must be positive");
        const double scale = z.norm();
        if ((z - z.transpose()).norm() > kHermitianTolerance * scale)
            throw Error(ErrorCode::InvalidArgument, "coupling matrix is not symmetric");
        for (Eigen::Index n = 0; n < z.rows(); ++n)
            if (std::abs(z(n, n) - cd{z0, 0.0}) > 1e-12 * z0)
                throw Error(ErrorCode::InvalidArgument, "diagonal entries must equal z0 (perfect matching)");
        CMatrix m = z;
        for (Eigen::Index p = 0; p < m.rows(); ++p) {
            m(p, p) = cd{z0, 0.0};
            for (Eigen::Index q = p + 1; q < m.cols(); ++q) m(q, p) = m(p, q);
        }
        return CouplingMatrix(std::move(m), z0);
    }

    static CouplingMatrix uncoupled(std::size_t n, double z0) {
        return CouplingMatrix(CMatrix::Identity(n, n) * z0, z0);
    }

    const CMatrix &z() const { return z_; }
    Eigen::Index size() const { return z_.rows(); }
    double z0() const { return z0_; }
    double y0() const { return 1.0 / z0_; }
    double min_real_eigenvalue() const { return min_real_eig_; }

    /// Tr(Re{Z}^{-1}) / (Y0 N); >= 1 for any matched PD-real-part array.
    double trace_ratio() const {
        const RMatrix r_inv = hermitian_power(RMatrix(z_.real()), HermitianExponent::MinusOne);
        return r_inv.trace() / (y0() * static_cast<double>(size()));
    }

private:
    CouplingMatrix(CMatrix z, double z0) : z_(std::move(z)), z0_(z0) {
        if (z_.rows() == 0) throw Error(ErrorCode::InvalidArgument, "empty coupling matrix");
        Eigen::SelfAdjointEigenSolver<RMatrix> eig(RMatrix(z_.real()), Eigen::EigenvaluesOnly);
        min_real_eig_ = eig.eigenvalues().minCoeff();
        if (!(min_real_eig_ >= -1e-10 * z0_))
            throw Error(ErrorCode::RealPartNotPD,
                        "minimum eigenvalue of Re{Z} is " + std::to_string(min_real_eig_) + " Ohm");
    }

    CMatrix z_;
    double z0_;
    double min_real_eig_ = 0.0;
};

/// Z_TT of the array: diagonal z0, off-diagonals from the induced-EMF integral.
///
/// Entries depend only on the lattice offset between two antennas, so each
/// distinct offset is integrated once and the upper triangle is filled from
/// that table before mirroring.
inline CouplingMatrix build_coupling_matrix(const ArrayGeometry &geom, const PhysicalConstants &consts,
                                            std::size_t quad_order = kDefaultQuadOrder) {
    const auto n = static_cast<Eigen::Index>(geom.n_antennas);
    CMatrix z = CMatrix::Zero(n, n);
    std::map<std::pair<long, long>, cd> table;
    for (Eigen::Index p = 0; p < n; ++p) {
        z(p, p) = cd{consts.z0, 0.0};
        for (Eigen::Index q = p + 1; q < n; ++q) {
            const auto &a = geom.positions[static_cast<std::size_t>(p)];
            const auto &b = geom.positions[static_cast<std::size_t>(q)];
            const long dix = std::labs(static_cast<long>(b.ix) - static_cast<long>(a.ix));
            const long diy = static_cast<long>(b.iy) - static_cast<long>(a.iy);
            const auto key = std::make_pair(dix, diy);
            auto it = table.find(key);
            if (it == table.end()) {
                const cd value = mutual_impedance_offset(static_cast<double>(dix) * geom.spacing,
                                                         static_cast<double>(diy) * geom.spacing,
                                                         geom.dipole_length, consts, quad_order);
                it = table.emplace(key, value).first;
            }
            z(p, q) = it->second;
            z(q, p) = it->second;
        }
    }
    return CouplingMatrix::from_impedance(z, consts.z0);
}

// ---------------------------------------------------------------------------
// CSV exchange: one matrix row per line, each entry written as "re,im".

inline void write_complex_csv(std::ostream &os, const CMatrix &m, const std::string &comment = {}) {
    if (!comment.empty()) os << "# " << comment << '\n';
    char buf[64];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) os << ',';
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", m(r, c).real(), m(r, c).imag());
            os << buf;
        }
        os << '\n';
    }
}

inline CMatrix read_complex_csv(std::istream &is) {
    std::vector<std::vector<cd>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception &) {
                throw Error(ErrorCode::Io, "malformed number '" + cell + "' in complex CSV");
            }
        }
        if (vals.size() % 2 != 0) throw Error(ErrorCode::Io, "complex CSV row has an odd number of fields");
        std::vector<cd> row;
        for (std::size_t i = 0; i < vals.size(); i += 2) row.emplace_back(vals[i], vals[i + 1]);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return CMatrix(0, 0);
    CMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw Error(ErrorCode::Io, "ragged complex CSV");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

inline void export_coupling_csv(const std::string &path, const CouplingMatrix &cm, const std::string &comment = {}) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
    write_complex_csv(os, cm.z(), comment);
}

inline CouplingMatrix import_coupling_csv(const std::string &path, double z0) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
    return CouplingMatrix::from_impedance(read_complex_csv(is), z0);
}

} // namespace milac
