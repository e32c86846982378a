#pragma once

namespace finr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace finr
