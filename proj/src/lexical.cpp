#include "emreason/lexical.hpp"

#include <algorithm>
#include <set>

#include "emreason/error.hpp"

namespace em {
namespace {

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

std::set<std::string, std::less<>> to_set(const std::vector<std::string>& tokens) {
  return {tokens.begin(), tokens.end()};
}

double jaccard(const std::vector<std::string>& left, const std::vector<std::string>& right) {
  const auto a = to_set(left);
  const auto b = to_set(right);
  if (a.empty() && b.empty()) return 1.0;
  std::size_t shared = 0;
  for (const auto& token : a) shared += b.contains(token) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

// True when `needle` occurs as a contiguous run inside `hay`.
bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

std::string join(std::vector<std::string>::const_iterator first, std::vector<std::string>::const_iterator last) {
  std::string out;
  for (auto it = first; it != last; ++it) {
    if (!out.empty()) out += ' ';
    out += *it;
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TokenBag to_bag(const std::vector<std::string>& tokens) {
  TokenBag bag;
  for (const auto& token : tokens) ++bag[token];
  return bag;
}

std::vector<std::string> value_tokens(const EntityRecord& record, const AttributeSchema& schema) {
  std::vector<std::string> out;
  for (const auto& name : schema.attributes()) {
    if (auto value = record.get(name)) {
      auto tokens = tokenize(*value);
      out.insert(out.end(), tokens.begin(), tokens.end());
    }
  }
  return out;
}

std::vector<std::string> value_tokens(const EntityRecord& record) {
  std::vector<std::string> out;
  for (const auto& [name, value] : record.values) {
    if (!value) continue;
    auto tokens = tokenize(*value);
    out.insert(out.end(), tokens.begin(), tokens.end());
  }
  return out;
}

TokenDiff token_diff(const std::vector<std::string>& left, const std::vector<std::string>& right) {
  const auto a = to_bag(left);
  const auto b = to_bag(right);
  TokenDiff diff;
  for (const auto& [token, count] : a) {
    auto it = b.find(token);
    const std::size_t other = it == b.end() ? 0 : it->second;
    const std::size_t shared = std::min(count, other);
    if (shared > 0) diff.matched.emplace(token, shared);
    if (count > shared) diff.only_left.emplace(token, count - shared);
  }
  for (const auto& [token, count] : b) {
    auto it = a.find(token);
    const std::size_t other = it == a.end() ? 0 : it->second;
    if (count > other) diff.only_right.emplace(token, count - other);
  }
  return diff;
}

TokenDiff token_diff(const EntityRecord& left, const EntityRecord& right) {
  return token_diff(value_tokens(left), value_tokens(right));
}

double token_jaccard(const EntityRecord& left, const EntityRecord& right) {
  return jaccard(value_tokens(left), value_tokens(right));
}

std::vector<std::pair<std::string, double>> attribute_overlap(const EntityRecord& left,
                                                              const EntityRecord& right,
                                                              const AttributeSchema& schema) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& name : schema.attributes()) {
    const auto l = tokenize(left.get(name).value_or(""));
    const auto r = tokenize(right.get(name).value_or(""));
    // Two missing values carry no evidence either way.
    out.emplace_back(name, l.empty() && r.empty() ? 0.0 : jaccard(l, r));
  }
  return out;
}

std::vector<std::string> common_phrases(const std::vector<std::string>& left,
                                        const std::vector<std::string>& right,
                                        std::size_t min_tokens) {
  if (min_tokens == 0) throw Error(Errc::kInvalidArgument, "min_tokens must be at least 1");
  const std::size_t n = left.size();
  const std::size_t m = right.size();

  struct Run {
    std::size_t start;
    std::size_t length;
  };
  std::vector<Run> runs;

  // suffix[j] = length of the common run ending at left[i-1], right[j-1].
  std::vector<std::size_t> prev(m + 1, 0);
  std::vector<std::size_t> curr(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      curr[j] = left[i - 1] == right[j - 1] ? prev[j - 1] + 1 : 0;
      const bool right_maximal = i == n || j == m || left[i] != right[j];
      if (curr[j] >= min_tokens && right_maximal) runs.push_back({i - curr[j], curr[j]});
    }
    std::swap(prev, curr);
    std::fill(curr.begin(), curr.end(), 0);
  }

  std::stable_sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) {
    return a.length != b.length ? a.length > b.length : a.start < b.start;
  });

  std::vector<std::vector<std::string>> kept;
  std::vector<std::string> out;
  for (const auto& run : runs) {
    std::vector<std::string> phrase(left.begin() + static_cast<std::ptrdiff_t>(run.start),
                                    left.begin() + static_cast<std::ptrdiff_t>(run.start + run.length));
    const bool covered = std::any_of(kept.begin(), kept.end(),
                                     [&](const auto& longer) { return contains_run(longer, phrase); });
    if (covered) continue;
    out.push_back(join(phrase.begin(), phrase.end()));
    kept.push_back(std::move(phrase));
  }
  return out;
}

std::vector<std::string> common_phrases(const EntityRecord& left, const EntityRecord& right,
                                        const AttributeSchema& schema, std::size_t min_tokens) {
  return common_phrases(value_tokens(left, schema), value_tokens(right, schema), min_tokens);
}

}  // namespace em
