#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmb {

/**
 * Flat sectioned key-value text: one `section.key = value` per line, `#`
 * starts a comment. Keys are unique; entries are held sorted, so the
 * canonical text (and its digest) does not depend on key order in the file.
 */
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& source = "<stream>");
  static KeyValueFile parse(std::string_view text, const std::string& source = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value);
  void erase(const std::string& key) { entries_.erase(key); }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  // "key = value\n" lines in key order.
  std::string canonical() const;
  std::string digest() const;

 private:
  std::map<std::string, std::string> entries_;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

bool parse_bool(const std::string& key, const std::string& value);
std::int64_t parse_int(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& value);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

}  // namespace mmb
