#include "emreason/records.hpp"

#include <algorithm>
#include <unordered_set>

#include "emreason/error.hpp"

namespace em {

AttributeSchema::AttributeSchema(std::string dataset_id, std::vector<std::string> attributes)
    : dataset_id_(std::move(dataset_id)), attributes_(std::move(attributes)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& name : attributes_) {
    if (name.empty()) throw Error(Errc::kInvalidArgument, "schema attribute names must be non-empty");
    if (!seen.insert(name).second) {
      throw Error(Errc::kInvalidArgument, "duplicate schema attribute '" + name + "'");
    }
  }
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view name) const {
  auto it = std::find(attributes_.begin(), attributes_.end(), name);
  if (it == attributes_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - attributes_.begin());
}

void EntityRecord::set(std::string attribute, std::optional<std::string> value) {
  if (value && value->empty()) value.reset();
  values.insert_or_assign(std::move(attribute), std::move(value));
}

std::optional<std::string_view> EntityRecord::get(std::string_view attribute) const {
  auto it = values.find(attribute);
  if (it == values.end() || !it->second) return std::nullopt;
  return std::string_view(*it->second);
}

std::string_view to_string(SerializationStyle style) {
  switch (style) {
    case SerializationStyle::kLabeledLines: return "labeled-lines";
    case SerializationStyle::kColVal: return "col-val";
  }
  return "labeled-lines";
}

SerializationStyle parse_serialization_style(std::string_view text) {
  if (text == "labeled-lines") return SerializationStyle::kLabeledLines;
  if (text == "col-val") return SerializationStyle::kColVal;
  throw Error(Errc::kInvalidArgument, "unknown serialization style '" + std::string(text) + "'");
}

namespace {

void append_escaped(std::string& out, std::string_view value) {
  for (char c : value) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
}

}  // namespace

std::string serialize_record(const EntityRecord& record, const AttributeSchema& schema,
                             SerializationStyle style) {
  for (const auto& [name, value] : record.values) {
    if (!schema.contains(name)) {
      throw Error(Errc::kUnknownAttribute,
                  "record '" + record.record_id + "' has attribute '" + name +
                      "' outside schema of '" + schema.dataset_id() + "'");
    }
  }
  std::string out;
  bool first = true;
  for (const auto& name : schema.attributes()) {
    const auto value = record.get(name).value_or(std::string_view{});
    switch (style) {
      case SerializationStyle::kLabeledLines:
        if (!first) out += '\n';
        out += name;
        out += ": ";
        append_escaped(out, value);
        break;
      case SerializationStyle::kColVal:
        if (!first) out += ' ';
        out += "COL ";
        out += name;
        out += " VAL ";
        out += value;
        break;
    }
    first = false;
  }
  return out;
}

ValidationResult validate_pair(const RecordPair& pair, const AttributeSchema& schema) {
  ValidationResult result;
  if (pair.pair_id.empty()) {
    result.violations.push_back({ViolationKind::kMissingId, "missing pair id"});
  }
  const auto check_side = [&](const EntityRecord& record, std::string_view side) {
    if (record.record_id.empty()) {
      result.violations.push_back(
          {ViolationKind::kMissingId, "missing record id on " + std::string(side) + " side"});
    }
    for (const auto& [name, value] : record.values) {
      if (!schema.contains(name)) {
        result.violations.push_back({ViolationKind::kUnknownAttribute,
                                     "unknown attribute '" + name + "' on " +
                                         std::string(side) + " side"});
      }
    }
  };
  check_side(pair.left, "left");
  check_side(pair.right, "right");
  if (pair.gold && !pair.gold->is_valid()) {
    result.violations.push_back({ViolationKind::kBadLabel, "label not in {0,1}"});
  }
  return result;
}

}  // namespace em
