#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emreason/records.hpp"

namespace em {

/// Multiset of tokens, token -> multiplicity (always > 0).
using TokenBag = std::map<std::string, std::size_t, std::less<>>;

struct TokenDiff {
  TokenBag matched;
  TokenBag only_left;
  TokenBag only_right;

  friend bool operator==(const TokenDiff&, const TokenDiff&) = default;
};

/// Lowercases ASCII and splits on every byte that is not an ASCII letter,
/// digit, or part of a multi-byte UTF-8 sequence.
std::vector<std::string> tokenize(std::string_view text);

TokenBag to_bag(const std::vector<std::string>& tokens);

/// Tokens of every present value, in schema order.
std::vector<std::string> value_tokens(const EntityRecord& record, const AttributeSchema& schema);
/// Tokens of every present value, in attribute-name order.
std::vector<std::string> value_tokens(const EntityRecord& record);

TokenDiff token_diff(const EntityRecord& left, const EntityRecord& right);
TokenDiff token_diff(const std::vector<std::string>& left, const std::vector<std::string>& right);

/// Jaccard similarity of the two token sets; 1.0 when both are empty.
double token_jaccard(const EntityRecord& left, const EntityRecord& right);

/// Jaccard similarity per schema attribute, in schema order.
std::vector<std::pair<std::string, double>> attribute_overlap(const EntityRecord& left,
                                                              const EntityRecord& right,
                                                              const AttributeSchema& schema);

/// Maximal runs of at least `min_tokens` consecutive tokens shared by both
/// sequences. Each phrase is reported once, longest first, ties broken by
/// earliest position in `left`; a phrase contained in a longer reported one
/// is dropped. Phrases are tokens joined by single spaces.
std::vector<std::string> common_phrases(const std::vector<std::string>& left,
                                        const std::vector<std::string>& right,
                                        std::size_t min_tokens);

std::vector<std::string> common_phrases(const EntityRecord& left, const EntityRecord& right,
                                        const AttributeSchema& schema, std::size_t min_tokens);

}  // namespace em
