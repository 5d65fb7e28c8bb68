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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace milac {

enum class ErrorCode {
    InvalidArgument,
    NotFinite,
    NotHermitian,
    NotPositiveDefinite,
    ZeroVector,
    OutOfRange,
    BadGrid,
    SameAntenna,
    SingularKernel,
    RealPartNotPD,
    DimensionMismatch,
    SingularCoupling,
    SingularSystem,
    SingularBlock,
    ThetaPlusIdentitySingular,
    BoundMismatch,
    Config,
    Io,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NotFinite: return "NotFinite";
        case ErrorCode::NotHermitian: return "NotHermitian";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::BadGrid: return "BadGrid";
        case ErrorCode::SameAntenna: return "SameAntenna";
        case ErrorCode::SingularKernel: return "SingularKernel";
        case ErrorCode::RealPartNotPD: return "RealPartNotPD";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::SingularCoupling: return "SingularCoupling";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::SingularBlock: return "SingularBlock";
        case ErrorCode::ThetaPlusIdentitySingular: return "ThetaPlusIdentitySingular";
        case ErrorCode::BoundMismatch: return "BoundMismatch";
        case ErrorCode::Config: return "Config";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace milac
