#include "cursim/io.hpp"

#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cursim {

JsonlWriter::JsonlWriter(const std::string& path) : out_(path, std::ios::trunc), path_(path) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
}

void JsonlWriter::write(const nlohmann::json& record) {
  out_ << record.dump() << '\n';
  if (!out_) throw std::runtime_error("write failed: " + path_);
}

void JsonlWriter::flush() { out_.flush(); }

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<nlohmann::json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(nlohmann::json::parse(line));
  }
  return records;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  auto emit_row = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      const std::string& c = cells[i];
      if (c.find_first_of(",\"\n") != std::string::npos) {
        out << '"';
        for (char ch : c) {
          if (ch == '"') out << "\"\"";
          else out << ch;
        }
        out << '"';
      } else {
        out << c;
      }
    }
    out << '\n';
  };
  emit_row(header);
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw std::invalid_argument("csv row width does not match header");
    emit_row(row);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void StreamHash::add_bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    state_ ^= p[i];
    state_ *= 1099511628211ull;
  }
}

void StreamHash::add_double(double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  add_bytes(&bits, sizeof(bits));
}

void StreamHash::add_int(std::int64_t v) { add_bytes(&v, sizeof(v)); }

void StreamHash::add_string(const std::string& s) { add_bytes(s.data(), s.size()); }

std::uint64_t hash_doubles(const std::vector<double>& values) {
  StreamHash h;
  for (double v : values) h.add_double(v);
  return h.value();
}

}  // namespace cursim
