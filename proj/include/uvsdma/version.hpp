#pragma once

namespace uvsdma {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace uvsdma
