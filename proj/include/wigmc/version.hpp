#pragma once

namespace wigmc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wigmc
