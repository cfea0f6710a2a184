#pragma once

namespace driftbench {

inline constexpr const char* kDriftbenchVersion = "0.1.0";

}  // namespace driftbench
