#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lemur/error.hpp"

namespace lemur {

// Ordered plain-text key=value record, one pair per line. Insertion order is
// preserved so that identical runs write identical bytes.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  void set(const std::string& key, T value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    set(key, os.str());
  }

  bool contains(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return true;
    }
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    throw FormatError("manifest has no key '" + key + "'");
  }

  template <class T>
  T get_as(const std::string& key) const {
    const std::string& text = get(key);
    T value{};
    if constexpr (std::is_floating_point_v<T>) {
      try {
        value = static_cast<T>(std::stod(text));
      } catch (const std::exception&) {
        throw FormatError("manifest key '" + key + "' is not a number: " + text);
      }
    } else {
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw FormatError("manifest key '" + key + "' is not an integer: " + text);
      }
    }
    return value;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
    if (!out) throw IoError("write failed on '" + path + "'");
  }

  static Manifest read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("'" + path + "' has a line without '=': " + line);
      m.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace lemur
