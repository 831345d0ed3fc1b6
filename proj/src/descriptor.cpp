#include "plls/descriptor.hpp"

#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace plls::inline PLLS_ABI {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find(sep, start);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    parts.emplace_back(text.substr(start, stop - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

std::string join_sizes(const std::vector<std::size_t>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(std::string_view text, char sep) {
  std::vector<std::size_t> values;
  if (text.empty()) return values;
  for (const auto& part : split(text, sep)) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(part, &used);
    if (used != part.size()) throw std::invalid_argument("not an integer list: '" + std::string(text) + "'");
    values.push_back(static_cast<std::size_t>(v));
  }
  return values;
}

Descriptor Descriptor::parse(std::string_view text) {
  Descriptor d;
  for (const auto& line : split(text, '\n')) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("descriptor line without '=': " + line);
    d.entries_[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return d;
}

Descriptor& Descriptor::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
  return *this;
}

Descriptor& Descriptor::set(const std::string& key, double value) {
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return set(key, out.str());
}

Descriptor& Descriptor::set_list(const std::string& key, const std::vector<std::size_t>& values) {
  return set(key, join_sizes(values));
}

Descriptor& Descriptor::set_reals(const std::string& key, const std::vector<double>& values) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return set(key, out.str());
}

std::vector<double> Descriptor::get_reals(const std::string& key) const {
  std::vector<double> values;
  const std::string& text = get(key);
  if (text.empty()) return values;
  for (const auto& part : split(text, ',')) values.push_back(std::stod(part));
  return values;
}

const std::string& Descriptor::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw std::invalid_argument("descriptor lacks key '" + key + "'");
  return it->second;
}

std::size_t Descriptor::get_size(const std::string& key) const {
  return static_cast<std::size_t>(std::stoull(get(key)));
}

double Descriptor::get_double(const std::string& key) const { return std::stod(get(key)); }

std::vector<std::size_t> Descriptor::get_list(const std::string& key) const { return parse_sizes(get(key)); }

std::string Descriptor::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace plls::inline PLLS_ABI
