#pragma once

namespace ckmr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ckmr
