#pragma once

#include <string>

#include "dualsddp/model.hpp"

namespace dualsddp {

/// Parses an instance from its canonical JSON text. Throws ParseError on
/// malformed JSON, SchemaError (message carries a JSON pointer path) on
/// structural problems, ValidationError when the parsed instance fails
/// validate_instance.
Instance parse_instance_json(const std::string& text);

/// Canonical serialization: fixed field order, shortest round-trip numbers,
/// two-space indentation. serialize(parse(s)) is a fixed point.
std::string serialize_instance_json(const Instance& inst);

/// File wrappers around the two functions above.
Instance load_instance_file(const std::string& path);
void save_instance_file(const Instance& inst, const std::string& path);

}  // namespace dualsddp
