#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace l2t::io {

inline constexpr std::uint32_t kMatrixFormatVersion = 1;

/// Binary matrix file: magic "L2TM", 4-byte version, 8-byte row count,
/// 8-byte column count (little-endian unsigned), then row-major IEEE-754
/// doubles, little-endian. Bit patterns round-trip exactly.
void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text);

/// Order-preserving key/value text file, one `key = value` line per entry,
/// with `[a, b, c]` bracket lists. Values are held verbatim as strings, so
/// save -> load -> save reproduces the file byte for byte.
class Manifest {
 public:
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  void set(const std::string& key, std::string value);
  void set_int(const std::string& key, long long value);
  void set_uint(const std::string& key, std::uint64_t value);
  void set_double(const std::string& key, double value);
  void set_list(const std::string& key, const std::vector<std::string>& values);
  void set_double_list(const std::string& key, const std::vector<double>& values);

  void save(const std::filesystem::path& path) const;
  static Manifest load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace l2t::io
