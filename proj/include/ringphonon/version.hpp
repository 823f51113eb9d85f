#pragma once

namespace ringphonon {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ringphonon
