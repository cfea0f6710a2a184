#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace driftbench {

struct AnswerKey {
  std::vector<std::string> aliases;
};

namespace detail {

// Decodes one UTF-8 codepoint starting at pos. On malformed input the single
// byte is passed through as-is so normalization never throws.
inline char32_t decode_utf8(std::string_view s, std::size_t& pos) {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(s[i]);
  };
  const unsigned char b0 = byte(pos);
  if (b0 < 0x80) {
    pos += 1;
    return b0;
  }
  auto cont = [&](std::size_t i) {
    return i < s.size() && (byte(i) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && cont(pos + 1)) {
    char32_t cp = static_cast<char32_t>((b0 & 0x1F) << 6 | (byte(pos + 1) & 0x3F));
    pos += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(pos + 1) && cont(pos + 2)) {
    char32_t cp = static_cast<char32_t>((b0 & 0x0F) << 12 | (byte(pos + 1) & 0x3F) << 6 |
                                        (byte(pos + 2) & 0x3F));
    pos += 3;
    return cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(pos + 1) && cont(pos + 2) && cont(pos + 3)) {
    char32_t cp = static_cast<char32_t>((b0 & 0x07) << 18 | (byte(pos + 1) & 0x3F) << 12 |
                                        (byte(pos + 2) & 0x3F) << 6 | (byte(pos + 3) & 0x3F));
    pos += 4;
    return cp;
  }
  pos += 1;
  return b0;
}

inline void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool is_space_cp(char32_t cp) {
  switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\f':
    case U'\v':
    case 0x00A0:  // no-break space
    case 0x202F:  // narrow no-break space
    case 0x205F:  // medium mathematical space
    case 0x3000:  // ideographic space
      return true;
    default:
      return (cp >= 0x2000 && cp <= 0x200A);
  }
}

// Folds width/punctuation compatibility forms and lowercases ASCII and
// Latin-1 letters. Everything else passes through untouched.
inline void fold_codepoint(char32_t cp, std::string& out) {
  if (cp >= 0xFF01 && cp <= 0xFF5E) {
    cp -= 0xFEE0;  // fullwidth ASCII block
  }
  if (is_space_cp(cp)) {
    out.push_back(' ');
    return;
  }
  if (cp >= 0x2018 && cp <= 0x201B) {
    out.push_back('\'');
    return;
  }
  if (cp >= 0x201C && cp <= 0x201F) {
    out.push_back('"');
    return;
  }
  if (cp >= 0x2010 && cp <= 0x2015) {
    out.push_back('-');
    return;
  }
  if (cp == 0x2026) {
    out.append("...");
    return;
  }
  if (cp >= U'A' && cp <= U'Z') {
    cp += 0x20;
  } else if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) {
    cp += 0x20;  // Latin-1 uppercase range, skipping the multiplication sign
  }
  encode_utf8(cp, out);
}

inline bool is_boundary_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case '!':
    case '?':
    case ';':
    case ':':
    case '\'':
    case '"':
    case '(':
    case ')':
      return true;
    default:
      return false;
  }
}

}  // namespace detail

// Case-folds, collapses whitespace runs to single spaces, and strips
// leading/trailing whitespace and boundary punctuation. Interior
// punctuation is preserved ("2001: A Space Odyssey" keeps its colon).
inline std::string normalize(std::string_view text) {
  std::string folded;
  folded.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    detail::fold_codepoint(detail::decode_utf8(text, pos), folded);
  }

  std::string collapsed;
  collapsed.reserve(folded.size());
  bool in_space = false;
  for (char c : folded) {
    if (c == ' ') {
      in_space = true;
      continue;
    }
    if (in_space && !collapsed.empty()) {
      collapsed.push_back(' ');
    }
    in_space = false;
    collapsed.push_back(c);
  }

  std::size_t begin = 0;
  std::size_t end = collapsed.size();
  while (begin < end &&
         (collapsed[begin] == ' ' || detail::is_boundary_punct(collapsed[begin]))) {
    ++begin;
  }
  while (end > begin &&
         (collapsed[end - 1] == ' ' || detail::is_boundary_punct(collapsed[end - 1]))) {
    --end;
  }
  return collapsed.substr(begin, end - begin);
}

// The containment rule: a response is correct iff any normalized alias is a
// substring of the normalized response. Empty responses are never correct.
inline bool is_correct(const AnswerKey& key, std::string_view response) {
  const std::string norm_response = normalize(response);
  if (norm_response.empty()) {
    return false;
  }
  for (const std::string& alias : key.aliases) {
    const std::string norm_alias = normalize(alias);
    if (!norm_alias.empty() && norm_response.find(norm_alias) != std::string::npos) {
      return true;
    }
  }
  return false;
}

}  // namespace driftbench
