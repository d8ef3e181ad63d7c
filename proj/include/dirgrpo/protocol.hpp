#ifndef DIRGRPO_PROTOCOL_HPP_
#define DIRGRPO_PROTOCOL_HPP_

// Answer-tag output protocol: the first numeral inside the first
// <answer>...</answer> pair is the prediction.

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dirgrpo/io.hpp"

namespace dirgrpo {

inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

enum class ParseFailure { None, MissingTags, NonNumeric, OutOfRange };

inline const char* failure_name(ParseFailure f) {
  switch (f) {
    case ParseFailure::None: return "none";
    case ParseFailure::MissingTags: return "missing_tags";
    case ParseFailure::NonNumeric: return "non_numeric";
    case ParseFailure::OutOfRange: return "out_of_range";
  }
  return "?";
}

struct ParsedAnswer {
  std::string raw;
  std::optional<double> value;  // present iff valid
  ParseFailure failure = ParseFailure::MissingTags;

  bool valid() const { return failure == ParseFailure::None; }
};

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Grammar: [+-]? digits ( '.' digits )?. A numeral immediately followed by an
// exponent marker is scientific notation and rejected.
inline std::optional<double> first_numeral(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t start = i;
    std::size_t j = i;
    if ((s[j] == '+' || s[j] == '-') && j + 1 < s.size() && is_digit(s[j + 1])) ++j;
    if (!is_digit(s[j])) continue;
    while (j < s.size() && is_digit(s[j])) ++j;
    if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
      ++j;
      while (j < s.size() && is_digit(s[j])) ++j;
    }
    if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
      std::size_t k = j + 1;
      if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
      if (k < s.size() && is_digit(s[k])) return std::nullopt;
    }
    return io::parse_double(s.substr(start, j - start));
  }
  return std::nullopt;
}

}  // namespace detail

inline ParsedAnswer parse_answer(std::string_view raw, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("parse_answer: lo > hi");
  ParsedAnswer out;
  out.raw = std::string(raw);
  const auto open = raw.find(kAnswerOpen);
  if (open == std::string_view::npos) return out;
  const auto body_start = open + kAnswerOpen.size();
  const auto close = raw.find(kAnswerClose, body_start);
  if (close == std::string_view::npos) return out;

  auto body = raw.substr(body_start, close - body_start);
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.front()))) body.remove_prefix(1);
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.remove_suffix(1);

  const auto v = detail::first_numeral(body);
  if (!v) {
    out.failure = ParseFailure::NonNumeric;
    return out;
  }
  if (*v < lo || *v > hi) {
    out.failure = ParseFailure::OutOfRange;
    return out;
  }
  out.value = *v;
  out.failure = ParseFailure::None;
  return out;
}

/// Canonical text for a value, parseable by parse_answer.
inline std::string render_answer(double value) {
  std::string s(kAnswerOpen);
  s += io::format_double(value);
  s += kAnswerClose;
  return s;
}

inline double format_reward(const ParsedAnswer& answer, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("format_reward: c must be > 0");
  return answer.valid() ? c : 0.0;
}

}  // namespace dirgrpo

#endif  // DIRGRPO_PROTOCOL_HPP_
