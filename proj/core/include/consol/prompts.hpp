#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace consol {

struct PromptInfo {
  std::string name;
  int version = 0;
  std::string sha256;
};

/// Text of the embedded template `name` (file core/prompts/<name>.v<N>.txt).
std::string_view prompt_text(std::string_view name);

/// Substitutes `{{key}}` placeholders in one left-to-right pass; substituted
/// values are not rescanned. A placeholder without a value is a contract error.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);

std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& vars);

/// Name, version and checksum of every embedded template, sorted by name.
std::vector<PromptInfo> prompt_manifest();

}  // namespace consol
