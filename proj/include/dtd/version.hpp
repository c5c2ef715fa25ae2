#pragma once

namespace dtd {

inline constexpr const char* kProjectName = "dtdmom";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace dtd
