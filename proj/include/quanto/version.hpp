#pragma once

namespace quanto {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace quanto
