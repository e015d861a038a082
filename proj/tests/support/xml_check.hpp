#pragma once

// Tiny well-formedness check for the SVG we emit: balanced tags, quoted
// attributes, no stray '<' or unescaped '&' in text. Returns an empty string
// when the document is fine, otherwise a description of the first problem.

#include <string>
#include <vector>

namespace xmlcheck {

inline std::string check(const std::string& doc) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool saw_root = false;
  if (doc.rfind("<?xml", 0) == 0) {
    i = doc.find("?>");
    if (i == std::string::npos) return "unterminated declaration";
    i += 2;
  }
  while (i < doc.size()) {
    const char c = doc[i];
    if (c == '&') {
      const std::size_t semi = doc.find(';', i);
      const std::string ent = semi == std::string::npos ? "" : doc.substr(i, semi - i + 1);
      if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") {
        return "bad entity at " + std::to_string(i);
      }
      i = semi + 1;
      continue;
    }
    if (c != '<') {
      if (c == '>') return "stray '>' at " + std::to_string(i);
      if (stack.empty() && c != '\n' && c != ' ') return "text outside the root element";
      ++i;
      continue;
    }
    const bool closing = i + 1 < doc.size() && doc[i + 1] == '/';
    std::size_t j = i + (closing ? 2 : 1);
    std::size_t name_end = j;
    while (name_end < doc.size() && (std::isalnum(static_cast<unsigned char>(doc[name_end])) ||
                                      doc[name_end] == '-' || doc[name_end] == ':')) {
      ++name_end;
    }
    if (name_end == j) return "empty tag name at " + std::to_string(i);
    const std::string name = doc.substr(j, name_end - j);
    // Scan attributes, honoring quotes.
    std::size_t k = name_end;
    bool in_quote = false;
    while (k < doc.size() && (in_quote || doc[k] != '>')) {
      if (doc[k] == '"') in_quote = !in_quote;
      if (!in_quote && doc[k] == '<') return "'<' inside tag " + name;
      ++k;
    }
    if (k >= doc.size()) return "unterminated tag " + name;
    const bool self_closing = doc[k - 1] == '/';
    if (closing) {
      if (stack.empty() || stack.back() != name) return "mismatched </" + name + ">";
      stack.pop_back();
    } else if (!self_closing) {
      if (stack.empty() && saw_root) return "second root element";
      stack.push_back(name);
      saw_root = true;
    } else if (stack.empty()) {
      return "self-closing root";
    }
    i = k + 1;
  }
  if (!stack.empty()) return "unclosed <" + stack.back() + ">";
  if (!saw_root) return "no root element";
  return "";
}

}  // namespace xmlcheck
