#pragma once

namespace monofix {

inline constexpr const char* version = "0.1.0";

}  // namespace monofix
