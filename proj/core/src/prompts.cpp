#include "consol/prompts.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "consol/digest.hpp"
#include "consol/error.hpp"
#include "prompt_table.hpp"

namespace consol {

std::string_view prompt_text(std::string_view name) {
  for (const auto& p : detail::embedded_prompts()) {
    if (p.name == name) return p.text;
  }
  throw Error(ErrorKind::kContract, fmt::format("unknown prompt template '{}'", name));
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    std::string key(text.substr(open + 2, close - open - 2));
    auto it = vars.find(key);
    if (it == vars.end()) {
      throw Error(ErrorKind::kContract, fmt::format("template placeholder '{}' has no value", key));
    }
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& vars) {
  return render_template(prompt_text(name), vars);
}

std::vector<PromptInfo> prompt_manifest() {
  std::vector<PromptInfo> out;
  for (const auto& p : detail::embedded_prompts()) {
    out.push_back(PromptInfo{std::string(p.name), p.version, sha256_hex(p.text)});
  }
  std::sort(out.begin(), out.end(),
            [](const PromptInfo& a, const PromptInfo& b) { return a.name < b.name; });
  return out;
}

}  // namespace consol
