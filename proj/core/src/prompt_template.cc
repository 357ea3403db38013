#include "neutralsum/prompt_template.h"

#include <algorithm>

#include "neutralsum/error.h"
#include "neutralsum/json_io.h"

namespace neutralsum {

namespace placeholder {
std::string article(std::size_t k) { return "article " + std::to_string(k); }
std::string example_article(std::size_t k) { return "example article " + std::to_string(k); }
}  // namespace placeholder

namespace {

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ' ' || c == '_';
}

// Calls on_text(literal) and on_name(name) in order of appearance.
template <typename OnText, typename OnName>
void scan(std::string_view text, OnText on_text, OnName on_name) {
  std::size_t pos = 0;
  std::size_t literal_start = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    const std::size_t close = text.find('}', pos + 1);
    if (close == std::string_view::npos) break;
    const std::string_view name = text.substr(pos + 1, close - pos - 1);
    if (name.empty() || !std::all_of(name.begin(), name.end(), is_name_char)) {
      ++pos;
      continue;
    }
    on_text(text.substr(literal_start, pos - literal_start));
    on_name(name);
    pos = close + 1;
    literal_start = pos;
  }
  on_text(text.substr(literal_start));
}

}  // namespace

std::string normalize_newlines(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

PromptTemplate::PromptTemplate(std::string text, std::string name)
    : text_(normalize_newlines(text)), name_(std::move(name)) {}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::string text = normalize_newlines(read_text_file(path));
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return PromptTemplate(std::move(text), path.stem().string());
}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> names;
  scan(
      text_, [](std::string_view) {},
      [&](std::string_view name) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
      });
  return names;
}

bool PromptTemplate::has_placeholder(std::string_view name) const {
  const auto names = placeholders();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string PromptTemplate::render(const PlaceholderValues& values) const {
  std::string out;
  out.reserve(text_.size());
  scan(
      text_, [&](std::string_view literal) { out.append(literal); },
      [&](std::string_view name) {
        auto it = values.find(name);
        if (it == values.end()) {
          throw TemplateError("template '" + name_ + "': no value for {" + std::string(name) + "}");
        }
        out.append(it->second);
      });
  return out;
}

}  // namespace neutralsum
