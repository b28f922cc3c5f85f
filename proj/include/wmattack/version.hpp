#pragma once

namespace wmattack {
inline constexpr const char* kVersion = "0.1.0";
}
