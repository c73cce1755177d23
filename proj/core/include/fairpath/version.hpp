#pragma once

namespace fairpath {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fairpath
