#pragma once

#include <string_view>
#include <vector>

namespace consol::detail {

struct EmbeddedPrompt {
  std::string_view name;
  int version;
  std::string_view text;
};

const std::vector<EmbeddedPrompt>& embedded_prompts();

}  // namespace consol::detail
