#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "plls/config.hpp"

namespace plls::inline PLLS_ABI {

// Architecture / environment descriptor text: one `key=value` per line,
// written in key order. Used inside checkpoint and dataset headers.
class Descriptor {
 public:
  Descriptor() = default;
  static Descriptor parse(std::string_view text);

  Descriptor& set(const std::string& key, const std::string& value);
  Descriptor& set(const std::string& key, std::size_t value) { return set(key, std::to_string(value)); }
  Descriptor& set(const std::string& key, double value);
  Descriptor& set_list(const std::string& key, const std::vector<std::size_t>& values);
  Descriptor& set_reals(const std::string& key, const std::vector<double>& values);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<std::size_t> get_list(const std::string& key) const;
  std::vector<double> get_reals(const std::string& key) const;

  std::string str() const;

 private:
  std::map<std::string, std::string> entries_;
};

std::vector<std::string> split(std::string_view text, char sep);
std::string join_sizes(const std::vector<std::size_t>& values, char sep = ',');
std::vector<std::size_t> parse_sizes(std::string_view text, char sep = ',');

}  // namespace plls::inline PLLS_ABI
