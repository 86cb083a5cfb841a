#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "conelab/csv.hpp"

namespace conelab {

/// Sectioned key = value text, parsed with the Boost INI reader. Remembers the
/// line of every key so semantic errors can point at it.
class IniConfig {
 public:
  static IniConfig parse(const std::string& text) {
    IniConfig c;
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(e.message(), static_cast<int>(e.line()));
    }
    std::istringstream scan(text);
    std::string line, section;
    for (int n = 1; std::getline(scan, line); ++n) {
      boost::algorithm::trim(line);
      if (line.empty() || line[0] == ';' || line[0] == '#') continue;
      if (line.front() == '[' && line.back() == ']') {
        section = line.substr(1, line.size() - 2);
        boost::algorithm::trim(section);
        c.lines_[{section, ""}] = n;
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq);
      boost::algorithm::trim(key);
      c.lines_[{section, key}] = n;
    }
    for (const auto& [name, sec] : c.tree_)
      if (sec.empty() && !sec.data().empty())
        throw ConfigError("key '" + name + "' outside any section", c.line_of("", name));
    return c;
  }

  static IniConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has_section(const std::string& s) const { return tree_.get_child_optional(path(s)).has_value(); }
  bool has(const std::string& s, const std::string& k) const {
    auto sec = tree_.get_child_optional(path(s));
    return sec && sec->get_child_optional(path(k)).has_value();
  }

  void require_section(const std::string& s) const {
    if (!has_section(s)) throw ConfigError("missing [" + s + "] section");
  }

  int line_of(const std::string& s, const std::string& k) const {
    auto it = lines_.find({s, k});
    return it == lines_.end() ? 0 : it->second;
  }

  template <class T>
  T get(const std::string& s, const std::string& k, const T& fallback) const {
    return has(s, k) ? require<T>(s, k) : fallback;
  }

  template <class T>
  T require(const std::string& s, const std::string& k) const {
    if (!has(s, k)) throw ConfigError("missing key '" + k + "' in [" + s + "]", line_of(s, ""));
    const std::string raw = raw_value(s, k);
    if constexpr (std::is_same_v<T, std::string>) {
      return raw;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
      if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
      throw ConfigError("key '" + k + "' in [" + s + "] is not a boolean: " + raw, line_of(s, k));
    } else if constexpr (std::is_same_v<T, Vec3>) {
      std::istringstream in(raw);
      Vec3 v;
      std::string rest;
      if (!(in >> v[0] >> v[1] >> v[2]) || (in >> rest))
        throw ConfigError("key '" + k + "' in [" + s + "] needs three numbers: " + raw, line_of(s, k));
      return v;
    } else {
      std::istringstream in(raw);
      T v{};
      std::string rest;
      if (!(in >> v) || (in >> rest))
        throw ConfigError("key '" + k + "' in [" + s + "] has a malformed value: " + raw, line_of(s, k));
      return v;
    }
  }

  /// Rejects keys outside `allowed` (section -> key names).
  void check_keys(const std::map<std::string, std::set<std::string>>& allowed) const {
    for (const auto& [sname, sec] : tree_) {
      auto it = allowed.find(sname);
      if (it == allowed.end()) throw ConfigError("unknown section [" + sname + "]", line_of(sname, ""));
      for (const auto& [kname, v] : sec)
        if (!it->second.count(kname))
          throw ConfigError("unknown key '" + kname + "' in [" + sname + "]", line_of(sname, kname));
    }
  }

  /// Sorted section.key=value lines: independent of comments, order and spacing.
  std::string canonical() const {
    std::map<std::string, std::string> flat;
    for (const auto& [sname, sec] : tree_)
      for (const auto& [kname, v] : sec) flat[sname + "." + kname] = v.data();
    std::string out;
    for (const auto& [k, v] : flat) out += k + "=" + v + "\n";
    return out;
  }

  std::string hash() const { return hex64(fnv1a(canonical())); }

 private:
  static boost::property_tree::ptree::path_type path(const std::string& s) { return {s, '\0'}; }
  std::string raw_value(const std::string& s, const std::string& k) const {
    std::string v = tree_.get_child(path(s)).get_child(path(k)).data();
    boost::algorithm::trim(v);
    return v;
  }

  boost::property_tree::ptree tree_;
  std::map<std::pair<std::string, std::string>, int> lines_;
};

}  // namespace conelab
