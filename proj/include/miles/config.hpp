#ifndef MILES_CONFIG_HPP
#define MILES_CONFIG_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace miles {

/// Flat `key = value` settings with dotted section names.
///
/// Lines are trimmed; blank lines and lines starting with '#' are ignored.
/// A later assignment to the same key replaces the earlier one.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<string>");
  static KeyValueConfig from_file(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  /// Parses "key=value" (whitespace around '=' allowed).
  void set_assignment(std::string_view assignment);
  void merge(const KeyValueConfig& overrides);

  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;

  std::string get_string(std::string_view key, std::string fallback) const;
  double get_real(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<double> get_real_list(std::string_view key, std::vector<double> fallback) const;
  std::vector<long long> get_int_list(std::string_view key, std::vector<long long> fallback) const;

  /// Keys that were never read by a getter, for typo diagnostics.
  std::vector<std::string> unused_keys() const;

  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }
  /// Canonical text: sorted `key = value` lines.
  std::string to_string() const;

 private:
  std::map<std::string, std::string, std::less<>> entries_;
  mutable std::map<std::string, bool, std::less<>> used_;
};

}  // namespace miles

#endif  // MILES_CONFIG_HPP
