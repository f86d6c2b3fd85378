#pragma once

namespace smoothgauge {
inline constexpr const char* version = "0.1.0";
}
