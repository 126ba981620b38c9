#pragma once

namespace lenkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lenkit
