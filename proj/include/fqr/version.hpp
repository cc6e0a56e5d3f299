#pragma once

namespace fqr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fqr
