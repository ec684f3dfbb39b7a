#ifndef OREOS_KEYVALUE_HPP
#define OREOS_KEYVALUE_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace oreos {

/**
 * Ordered `key = value` store backing manifests and run configs.
 *
 * Text format: one pair per line, `#` starts a comment, blank lines are
 * ignored, whitespace around keys and values is trimmed. Keys may be dotted
 * (`train.epochs`). Serialization is sorted by key, so equal stores produce
 * identical bytes.
 */
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;
  std::string to_string() const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Applies a `key=value` override; throws on a missing '='.
  void set_assignment(const std::string& assignment);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Round-trip exact text form of a double.
std::string format_double(double value);

}  // namespace oreos

#endif  // OREOS_KEYVALUE_HPP
