#pragma once

namespace tp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tp
