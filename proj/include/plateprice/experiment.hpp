#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "plateprice/error.hpp"

namespace plateprice {

inline constexpr const char* kToolName = "plateprice";
inline constexpr const char* kToolVersion = "1.0.0";

/// Bad invocation: unknown flags or config keys. CLI maps this to exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value experiment config ('#' starts a comment). Values stay
/// strings until a typed getter pulls them; every getter records the key so
/// unknown leftovers can be rejected.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;

  /// Comma-separated list of numbers, for sweep grids.
  std::vector<double> get_list(const std::string& key) const;

  /// Throws UsageError naming any key outside `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// FNV-1a 64-bit over a file's bytes; the manifest's change detector.
std::uint64_t fnv1a64_file(const std::string& path);

/// Writes manifest.json (tool version, resolved config, seeds, input hashes,
/// timestamp) and resolved.cfg (the same config as diff-friendly key=value
/// lines) into `out_dir`. Everything except the timestamp is deterministic.
void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const std::map<std::string, std::string>& resolved_config,
                    const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& input_paths);

}  // namespace plateprice
