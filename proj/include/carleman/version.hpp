#pragma once

namespace carleman {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace carleman
