#pragma once

namespace synthkt {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace synthkt
