#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace consol::detail {

std::string_view trim(std::string_view s);

std::vector<std::string_view> split_lines(std::string_view text);

// Body of the first ``` fenced block (any info string), without the fences.
// nullopt when no opening fence exists or it is never closed.
std::optional<std::string_view> first_fenced_block(std::string_view text);

}  // namespace consol::detail
