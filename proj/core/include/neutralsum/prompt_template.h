#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace neutralsum {

// Placeholder names used by the shipped templates.
namespace placeholder {
inline constexpr std::string_view kEventTable = "event table";
inline constexpr std::string_view kRelationTable = "event relation table";
inline constexpr std::string_view kArticles = "articles";  // all articles joined by " /s "
inline constexpr std::string_view kExampleSummary = "example summary";
inline constexpr std::string_view kExampleExplanation = "example explanation";
std::string article(std::size_t k);          // "article <k>", 1-based
std::string example_article(std::size_t k);  // "example article <k>", 1-based
}  // namespace placeholder

using PlaceholderValues = std::map<std::string, std::string, std::less<>>;

// Text with `{name}` placeholders, where name is lowercase letters, digits,
// spaces and underscores. Any other brace is literal. Substitution is a
// single pass, so substituted values are never re-scanned.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text, std::string name = {});

  // Reads a UTF-8 file; CRLF becomes LF and one trailing newline is dropped.
  static PromptTemplate load(const std::filesystem::path& path);

  const std::string& text() const { return text_; }
  const std::string& name() const { return name_; }

  // Distinct placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;
  bool has_placeholder(std::string_view name) const;

  // Throws TemplateError naming the first placeholder without a value.
  std::string render(const PlaceholderValues& values) const;

 private:
  std::string text_;
  std::string name_;
};

// Replaces CRLF and lone CR with LF.
std::string normalize_newlines(std::string_view text);

}  // namespace neutralsum
