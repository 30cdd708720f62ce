#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sxr {

// The 8 surface gestures plus Negative (mid-air / no gesture).
enum class GestureClass : std::uint8_t {
    SingleTap = 0,
    DoubleTap = 1,
    SwipeLeft = 2,
    SwipeRight = 3,
    SwipeUp = 4,
    SwipeDown = 5,
    PinchIn = 6,
    PinchOut = 7,
    Negative = 8,
};

inline constexpr int kGestureClassCount = 9;
inline constexpr int kNegativeIndex = 8;

inline constexpr std::array<std::string_view, kGestureClassCount> kGestureNames = {
    "single_tap", "double_tap", "swipe_left", "swipe_right",
    "swipe_up",   "swipe_down", "pinch_in",   "pinch_out",
    "negative",
};

inline std::string_view gesture_name(GestureClass g) {
    return kGestureNames[static_cast<int>(g)];
}

inline GestureClass gesture_from_name(std::string_view name) {
    for (int i = 0; i < kGestureClassCount; ++i)
        if (kGestureNames[i] == name) return static_cast<GestureClass>(i);
    throw std::invalid_argument("unknown gesture class: " + std::string(name));
}

} // namespace sxr
