#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lexsum {

using Tokens = std::vector<std::string>;

/// Error raised by any module. `module()` names the component that failed so
/// the CLI can report it in its machine-readable error output.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

enum class Language { en, hi };

std::string_view to_string(Language lang) noexcept;

/// Parses "en" / "hi". Throws Error("corpus", ...) on anything else.
Language parse_language(std::string_view tag);

/// Half-open interval over a token sequence.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  bool operator==(const TokenSpan&) const = default;
};

std::string join(const Tokens& tokens, std::string_view sep = " ");

}  // namespace lexsum
