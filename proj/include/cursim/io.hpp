#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace cursim {

// Append-style JSONL writer: one compact JSON object per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  void write(const nlohmann::json& record);
  void flush();

 private:
  std::ofstream out_;
  std::string path_;
};

// Reads every line of a JSONL file into parsed objects. Blank lines are skipped.
std::vector<nlohmann::json> read_jsonl(const std::string& path);

// Writes a CSV file with a fixed header; every row must match the header width.
// Doubles are rendered with max_digits10 so files are stable across runs.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

// Incremental FNV-1a (64-bit) over arbitrary bytes; used to fingerprint streams
// of doubles/ints for determinism checks.
class StreamHash {
 public:
  void add_bytes(const void* data, std::size_t n);
  void add_double(double v);
  void add_int(std::int64_t v);
  void add_string(const std::string& s);
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 1469598103934665603ull;
};

std::uint64_t hash_doubles(const std::vector<double>& values);

}  // namespace cursim
