#include "mmbattn/data.hpp"

#include "mmbattn/errors.hpp"
#include "mmbattn/keyvalue.hpp"

#include <set>

namespace mmb::data {

void FieldSchema::validate() const {
  if (fields.empty()) throw SchemaError("schema declares no fields");
  std::set<std::string> seen;
  for (const Field& f : fields) {
    if (f.name.empty()) throw SchemaError("schema field with empty name");
    if (!seen.insert(f.name).second) throw SchemaError("duplicate field '" + f.name + "'");
  }
  if (label_column.empty()) throw SchemaError("schema has no label column");
  if (seen.count(label_column)) throw SchemaError("label column '" + label_column + "' is also a feature field");
  if (min_count < 1) throw SchemaError("schema.min_count must be >= 1");
  if (buckets < 1) throw SchemaError("schema.buckets must be >= 1");
}

FieldSchema FieldSchema::from_config(const KeyValueFile& kv) {
  FieldSchema schema;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "schema.fields") {
      for (const std::string& item : split(value, ',')) {
        Field f;
        const auto colon = item.find(':');
        f.name = trim(item.substr(0, colon));
        if (colon != std::string::npos) {
          const std::string kind = trim(item.substr(colon + 1));
          if (kind == "numeric") f.kind = FieldKind::numeric;
          else if (kind != "categorical") throw ConfigError("schema.fields: unknown kind '" + kind + "' for " + f.name);
        }
        schema.fields.push_back(std::move(f));
      }
    } else if (key == "schema.label") {
      schema.label_column = value;
    } else if (key == "schema.delimiter") {
      if (value == "comma") schema.delimiter = ',';
      else if (value == "tab") schema.delimiter = '\t';
      else if (value.size() == 1) schema.delimiter = value[0];
      else throw ConfigError("schema.delimiter: expected one character, 'comma' or 'tab'");
    } else if (key == "schema.min_count") {
      schema.min_count = parse_int(key, value);
    } else if (key == "schema.buckets") {
      schema.buckets = parse_int(key, value);
    } else {
      throw ConfigError("unknown schema key '" + key + "'");
    }
  }
  schema.validate();
  return schema;
}

FieldSchema FieldSchema::load(const std::filesystem::path& path) { return from_config(KeyValueFile::load(path)); }

}  // namespace mmb::data
