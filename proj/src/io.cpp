#include "l2t/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <system_error>

namespace l2t::io {

namespace {

constexpr char kMagic[4] = {'L', '2', 'T', 'M'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

std::uint32_t read_u32(const std::string& buf, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + i]))
         << (8 * i);
  }
  return v;
}

std::uint64_t read_u64(const std::string& buf, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[offset + i]))
         << (8 * i);
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(path, "cannot open for reading");
  }
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (in.bad()) {
    fail(path, "read error");
  }
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(path, "cannot open for writing");
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) {
    fail(path, "write error");
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) {
    return "";
  }
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::string buf;
  buf.reserve(kHeaderBytes + static_cast<std::size_t>(m.size()) * 8);
  buf.append(kMagic, 4);
  append_u32(buf, kMatrixFormatVersion);
  append_u64(buf, static_cast<std::uint64_t>(m.rows()));
  append_u64(buf, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      append_u64(buf, std::bit_cast<std::uint64_t>(m(i, j)));
    }
  }
  write_file(path, buf);
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  if (buf.size() < kHeaderBytes) {
    fail(path, "truncated header (file smaller than the fixed header)");
  }
  if (!std::equal(kMagic, kMagic + 4, buf.begin())) {
    fail(path, "bad magic (not an L2TM matrix file)");
  }
  const std::uint32_t version = read_u32(buf, 4);
  if (version != kMatrixFormatVersion) {
    fail(path, "unsupported format version " + std::to_string(version) +
                   " (expected " + std::to_string(kMatrixFormatVersion) + ")");
  }
  const std::uint64_t rows = read_u64(buf, 8);
  const std::uint64_t cols = read_u64(buf, 16);
  if (rows != 0 && cols > std::numeric_limits<std::uint64_t>::max() / 8 / rows) {
    fail(path, "dimension header overflows the addressable payload size");
  }
  const std::uint64_t expected = rows * cols * 8;
  const std::uint64_t available = buf.size() - kHeaderBytes;
  if (available != expected) {
    fail(path, "dimension mismatch: header declares " + std::to_string(rows) +
                   " x " + std::to_string(cols) + " (" + std::to_string(expected) +
                   " payload bytes) but the file holds " +
                   std::to_string(available));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  std::size_t offset = kHeaderBytes;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = std::bit_cast<double>(read_u64(buf, offset));
      offset += 8;
    }
  }
  return m;
}

std::string format_double(double value) {
  char tmp[64];
  const auto res = std::to_chars(tmp, tmp + sizeof(tmp), value);
  if (res.ec != std::errc()) {
    throw std::runtime_error("failed to format a double");
  }
  return std::string(tmp, res.ptr);
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw std::runtime_error("not a floating-point value: '" + text + "'");
  }
  return value;
}

bool Manifest::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

const std::string& Manifest::get(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.first == key) {
      return e.second;
    }
  }
  throw std::runtime_error("manifest is missing key '" + key + "'");
}

long long Manifest::get_int(const std::string& key) const {
  const std::string& v = get(key);
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::runtime_error("manifest key '" + key + "' is not an integer: '" +
                             v + "'");
  }
  return out;
}

std::uint64_t Manifest::get_uint(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::runtime_error("manifest key '" + key +
                             "' is not an unsigned integer: '" + v + "'");
  }
  return out;
}

double Manifest::get_double(const std::string& key) const {
  try {
    return parse_double(get(key));
  } catch (const std::runtime_error&) {
    throw std::runtime_error("manifest key '" + key + "' is not a double: '" +
                             get(key) + "'");
  }
}

std::vector<std::string> Manifest::get_list(const std::string& key) const {
  const std::string& v = get(key);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw std::runtime_error("manifest key '" + key + "' is not a list: '" + v +
                             "'");
  }
  const std::string inner = trim(v.substr(1, v.size() - 2));
  std::vector<std::string> out;
  if (inner.empty()) {
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = inner.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(inner.substr(start)));
      break;
    }
    out.push_back(trim(inner.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::vector<double> Manifest::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& token : get_list(key)) {
    out.push_back(parse_double(token));
  }
  return out;
}

void Manifest::set(const std::string& key, std::string value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos) {
    throw std::invalid_argument("manifest key must be nonempty without '=' or newline");
  }
  if (value.find('\n') != std::string::npos) {
    throw std::invalid_argument("manifest value must not contain a newline");
  }
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

void Manifest::set_int(const std::string& key, long long value) {
  set(key, std::to_string(value));
}

void Manifest::set_uint(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

void Manifest::set_double(const std::string& key, double value) {
  set(key, format_double(value));
}

void Manifest::set_list(const std::string& key,
                        const std::vector<std::string>& values) {
  std::string joined = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].find_first_of(",[]\n") != std::string::npos) {
      throw std::invalid_argument("list element must not contain ',', brackets or newline");
    }
    if (i > 0) {
      joined += ", ";
    }
    joined += values[i];
  }
  joined += "]";
  set(key, std::move(joined));
}

void Manifest::set_double_list(const std::string& key,
                               const std::vector<double>& values) {
  std::vector<std::string> tokens;
  tokens.reserve(values.size());
  for (double v : values) {
    tokens.push_back(format_double(v));
  }
  set_list(key, tokens);
}

void Manifest::save(const std::filesystem::path& path) const {
  std::string buf;
  for (const auto& e : entries_) {
    buf += e.first;
    buf += " = ";
    buf += e.second;
    buf += '\n';
  }
  write_file(path, buf);
}

Manifest Manifest::load(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  Manifest m;
  std::size_t line_start = 0;
  std::size_t line_no = 0;
  while (line_start < buf.size()) {
    std::size_t line_end = buf.find('\n', line_start);
    if (line_end == std::string::npos) {
      line_end = buf.size();
    }
    ++line_no;
    const std::string line = buf.substr(line_start, line_end - line_start);
    line_start = line_end + 1;
    if (trim(line).empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(path, "malformed manifest line " + std::to_string(line_no) +
                     " (expected 'key = value')");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      fail(path, "empty key on manifest line " + std::to_string(line_no));
    }
    m.entries_.emplace_back(key, value);
  }
  return m;
}

}  // namespace l2t::io
