#pragma once

namespace regmix {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace regmix
