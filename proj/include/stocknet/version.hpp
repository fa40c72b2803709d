#pragma once

namespace stocknet {

inline constexpr const char* kVersion = "0.1.0";

} // namespace stocknet
