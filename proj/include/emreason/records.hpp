#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace em {

/// Ordered attribute names shared by every record of a dataset.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  /// Throws Error(kInvalidArgument) on empty or duplicate names.
  AttributeSchema(std::string dataset_id, std::vector<std::string> attributes);

  const std::string& dataset_id() const { return dataset_id_; }
  const std::vector<std::string>& attributes() const { return attributes_; }
  std::size_t size() const { return attributes_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  friend bool operator==(const AttributeSchema&, const AttributeSchema&) = default;

 private:
  std::string dataset_id_;
  std::vector<std::string> attributes_;
};

struct EntityRecord {
  std::string record_id;
  // A missing value and an empty string are the same thing; `set` stores
  // both as nullopt.
  std::map<std::string, std::optional<std::string>, std::less<>> values;

  void set(std::string attribute, std::optional<std::string> value);
  std::optional<std::string_view> get(std::string_view attribute) const;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

struct GoldLabel {
  int value = 0;

  bool is_match() const { return value == 1; }
  bool is_valid() const { return value == 0 || value == 1; }

  friend bool operator==(const GoldLabel&, const GoldLabel&) = default;
};

struct RecordPair {
  std::string pair_id;
  EntityRecord left;
  EntityRecord right;
  std::optional<GoldLabel> gold;

  friend bool operator==(const RecordPair&, const RecordPair&) = default;
};

enum class SerializationStyle {
  kLabeledLines,  // "name: value" per line
  kColVal,        // "COL name VAL value" joined by spaces
};

std::string_view to_string(SerializationStyle style);
/// Accepts "labeled-lines" and "col-val".
SerializationStyle parse_serialization_style(std::string_view text);

/// Renders every schema attribute exactly once, in schema order. Missing
/// values render as an empty string. In labeled-lines style, backslashes and
/// line breaks inside values are escaped so that distinct records never
/// produce the same text. Throws Error(kUnknownAttribute) when the record
/// holds a key outside the schema.
std::string serialize_record(const EntityRecord& record, const AttributeSchema& schema,
                             SerializationStyle style = SerializationStyle::kLabeledLines);

enum class ViolationKind { kUnknownAttribute, kMissingId, kBadLabel };

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

ValidationResult validate_pair(const RecordPair& pair, const AttributeSchema& schema);

}  // namespace em
