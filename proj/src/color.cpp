#include "escaperoom/color.hpp"

namespace escaperoom {

std::string_view color_name(Color c) {
    switch (c) {
        case Color::none: return "none";
        case Color::red: return "red";
        case Color::green: return "green";
        case Color::blue: return "blue";
        case Color::purple: return "purple";
        case Color::yellow: return "yellow";
        case Color::grey: return "grey";
    }
    return "none";
}

std::optional<Color> color_from_name(std::string_view name) {
    for (Color c : all_colors()) {
        if (color_name(c) == name) return c;
    }
    if (name == "none") return Color::none;
    return std::nullopt;
}

std::optional<Color> color_from_code(int code) {
    if (code < 0 || code > kColorCount) return std::nullopt;
    return static_cast<Color>(code);
}

}  // namespace escaperoom
