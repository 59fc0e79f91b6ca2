#pragma once

namespace dxmem {
inline constexpr const char* kVersion = "0.1.0";
}
