#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace escaperoom {

/// The six object colors. Integer codes are stable: 0 is reserved for
/// "no color" in serialized grids and observations.
enum class Color : int {
    none = 0,
    red = 1,
    green = 2,
    blue = 3,
    purple = 4,
    yellow = 5,
    grey = 6,
};

inline constexpr int kColorCount = 6;

inline constexpr std::array<Color, kColorCount> all_colors() {
    return {Color::red, Color::green, Color::blue, Color::purple, Color::yellow, Color::grey};
}

inline constexpr int color_code(Color c) { return static_cast<int>(c); }

std::string_view color_name(Color c);
std::optional<Color> color_from_name(std::string_view name);
std::optional<Color> color_from_code(int code);

}  // namespace escaperoom
