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

// Dense complex linear algebra shared by every other module: Hermitian
// fractional powers, the rank-1 right singular frame, 1-based block
// selection and a few structural diagnostics.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <string>

#include "milac/error.hpp"

namespace milac {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;

inline constexpr cd kJ{0.0, 1.0};

/// Relative factor applied to ||A||_F when admitting a matrix as Hermitian.
inline constexpr double kHermitianTolerance = 1e-9;
/// Reciprocal condition number below which a factorization is treated as singular.
inline constexpr double kSingularRcond = 1e-14;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived> &a, const std::string &what) {
    if (!a.allFinite()) throw Error(ErrorCode::NotFinite, what + " contains NaN or Inf");
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived> &a, const std::string &what) {
    if (a.rows() != a.cols())
        throw Error(ErrorCode::DimensionMismatch,
                    what + " must be square, got " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()));
}

/// ||A - B||_F / max(||B||_F, tiny). Both operands must have equal shape.
template <typename DA, typename DB>
double relative_difference(const Eigen::MatrixBase<DA> &a, const Eigen::MatrixBase<DB> &b) {
    const double denom = std::max(b.norm(), std::numeric_limits<double>::min());
    return (a - b).norm() / denom;
}

inline double relative_difference(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(b), std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------------------
// Index ranges

/// Inclusive 1-based range [start, end], mirroring the usual "2:N+1" selectors.
struct IndexRange {
    Eigen::Index start = 1;
    Eigen::Index end = 1;

    Eigen::Index size() const { return end - start + 1; }
    Eigen::Index offset() const { return start - 1; }

    /// The range that follows a prefix of `skip` indices, e.g. N_S + (1:N_T).
    static IndexRange after(Eigen::Index skip, Eigen::Index count) {
        return {skip + 1, skip + count};
    }
};

inline void check_range(const IndexRange &r, Eigen::Index dim, const char *axis) {
    if (r.start < 1 || r.start > r.end || r.end > dim)
        throw Error(ErrorCode::OutOfRange, std::string(axis) + " range " + std::to_string(r.start) +
                                               ".." + std::to_string(r.end) +
                                               " outside 1.." + std::to_string(dim));
}

/// Copy of the block of `a` addressed by 1-based inclusive ranges.
template <typename Derived>
typename Derived::PlainObject block(const Eigen::MatrixBase<Derived> &a, const IndexRange &rows,
                                    const IndexRange &cols) {
    check_range(rows, a.rows(), "row");
    check_range(cols, a.cols(), "column");
    return a.block(rows.offset(), cols.offset(), rows.size(), cols.size());
}

// ---------------------------------------------------------------------------
// Hermitian fractional powers

enum class HermitianExponent { Half, MinusHalf, MinusOne };

inline double exponent_value(HermitianExponent e) {
    switch (e) {
        case HermitianExponent::Half: return 0.5;
        case HermitianExponent::MinusHalf: return -0.5;
        case HermitianExponent::MinusOne: return -1.0;
    }
    return 0.0;
}

/// A^p for Hermitian positive-definite A via a full eigendecomposition.
///
/// Works for real symmetric and complex Hermitian inputs alike. The input is
/// admitted when ||A - A^H||_F <= 1e-9 ||A||_F; only its Hermitian part is
/// used. The result is exactly Hermitian (built as V diag(w^p) V^H and then
/// symmetrized).
template <typename Derived>
typename Derived::PlainObject hermitian_power(const Eigen::MatrixBase<Derived> &a,
                                              HermitianExponent exponent) {
    using Plain = typename Derived::PlainObject;
    require_square(a, "hermitian_power input");
    require_finite(a, "hermitian_power input");
    const double scale = a.norm();
    const double asym = (a - a.adjoint()).norm();
    if (asym > kHermitianTolerance * scale)
        throw Error(ErrorCode::NotHermitian, "asymmetry " + std::to_string(asym) +
                                                 " exceeds tolerance for norm " +
                                                 std::to_string(scale));
    if (a.rows() == 0) return Plain(0, 0);

    const Plain herm = (a + a.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Plain> eig(herm);
    if (eig.info() != Eigen::Success)
        throw Error(ErrorCode::NotPositiveDefinite, "eigendecomposition did not converge");
    const auto &w = eig.eigenvalues();
    if (w.minCoeff() <= 0.0)
        throw Error(ErrorCode::NotPositiveDefinite,
                    "minimum eigenvalue " + std::to_string(w.minCoeff()));
    const double p = exponent_value(exponent);
    Eigen::VectorXd wp = w.unaryExpr([p](double x) { return std::pow(x, p); });
    const Plain &v = eig.eigenvectors();
    Plain s = v * wp.asDiagonal() * v.adjoint();
    return (s + s.adjoint()) / 2.0;
}

// ---------------------------------------------------------------------------
// Right singular frame of a row vector

/// Orthonormal frame [lead, rest] of C^n whose first column is g^H / ||g||.
struct SingularFrame {
    CMatrix lead; ///< n x 1
    CMatrix rest; ///< n x (n-1), orthogonal to lead

    CMatrix full() const {
        CMatrix u(lead.rows(), lead.cols() + rest.cols());
        u << lead, rest;
        return u;
    }
};

/// Right singular vectors of a nonzero 1 x n row, partitioned as [v, V].
///
/// The leading vector is g^H/||g|| exactly. The remaining columns come from
/// the Householder reflector that maps the leading vector onto a multiple of
/// e_1, so the frame is deterministic and needs no general SVD.
inline SingularFrame right_singular_frame(const CMatrix &g) {
    if (g.rows() != 1 || g.cols() < 1)
        throw Error(ErrorCode::DimensionMismatch, "right_singular_frame expects a 1 x n row");
    require_finite(g, "right_singular_frame input");
    const double nrm = g.norm();
    if (!(nrm > 0.0)) throw Error(ErrorCode::ZeroVector, "row vector has zero norm");

    const Eigen::Index n = g.cols();
    SingularFrame frame;
    frame.lead = g.adjoint() / nrm;
    if (n == 1) {
        frame.rest = CMatrix(1, 0);
        return frame;
    }

    // Reflector P = I - 2 w w^H / (w^H w) with P x = alpha e_1.
    const Eigen::VectorXcd x = frame.lead.col(0);
    const double ax1 = std::abs(x(0));
    const cd phase = ax1 > 0.0 ? x(0) / ax1 : cd{1.0, 0.0};
    const cd alpha = -phase; // ||x|| = 1
    Eigen::VectorXcd w = x;
    w(0) -= alpha;
    const double wn2 = w.squaredNorm();
    CMatrix p = CMatrix::Identity(n, n) - (2.0 / wn2) * (w * w.adjoint());
    frame.rest = p.rightCols(n - 1);
    return frame;
}

// ---------------------------------------------------------------------------
// Structural diagnostics

struct UnitarySymmetricResiduals {
    double unitary = 0.0;   ///< max |(Theta^H Theta - I)_ij|
    double symmetric = 0.0; ///< max |(Theta - Theta^T)_ij|
};

inline UnitarySymmetricResiduals is_unitary_symmetric(const CMatrix &theta) {
    require_square(theta, "scattering matrix");
    UnitarySymmetricResiduals r;
    if (theta.size() == 0) return r;
    const Eigen::Index n = theta.rows();
    r.unitary = (theta.adjoint() * theta - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
    r.symmetric = (theta - theta.transpose()).cwiseAbs().maxCoeff();
    return r;
}

/// Block-diagonal [a 0; 0 b].
template <typename DA, typename DB>
CMatrix block_diagonal(const Eigen::MatrixBase<DA> &a, const Eigen::MatrixBase<DB> &b) {
    CMatrix out = CMatrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a.template cast<cd>();
    out.bottomRightCorner(b.rows(), b.cols()) = b.template cast<cd>();
    return out;
}

// ---------------------------------------------------------------------------
// Checked factorizations

/// LU factorization that refuses numerically singular input.
class CheckedLu {
public:
    CheckedLu(const CMatrix &a, ErrorCode code, const std::string &what) {
        require_square(a, what);
        require_finite(a, what);
        lu_.compute(a);
        const double rc = a.size() == 0 ? 1.0 : lu_.rcond();
        if (!(rc >= kSingularRcond))
            throw Error(code, what + " is numerically singular (rcond " + std::to_string(rc) + ")");
        rcond_ = rc;
    }

    template <typename Rhs>
    CMatrix solve(const Eigen::MatrixBase<Rhs> &b) const {
        return lu_.solve(b.template cast<cd>());
    }

    /// X with X A = B, i.e. B A^{-1}.
    template <typename Rhs>
    CMatrix solve_right(const Eigen::MatrixBase<Rhs> &b) const {
        const CMatrix bt = b.template cast<cd>().transpose();
        const CMatrix xt = lu_.transpose().solve(bt);
        return xt.transpose();
    }

    CMatrix inverse() const { return lu_.inverse(); }
    double rcond() const { return rcond_; }

private:
    Eigen::PartialPivLU<CMatrix> lu_;
    double rcond_ = 1.0;
};

} // namespace milac
