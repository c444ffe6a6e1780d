#pragma once

#include <string_view>

namespace ctqa::detail {

// Returns the embedded bytes of a prompt asset ("single_turn",
// "multi_turn_1", ...), or an empty view for unknown names.
std::string_view embedded_prompt_asset(std::string_view name);

}  // namespace ctqa::detail
