#pragma once

namespace sfwm {

inline constexpr const char* version = "1.0.0";

}
