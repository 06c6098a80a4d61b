#pragma once

namespace longwave {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace longwave
