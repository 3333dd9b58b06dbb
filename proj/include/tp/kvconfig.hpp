#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tp {

/// Flat `key = value` text format used for run configs, metadata sidecars and
/// verification reports. Lines starting with `#` are comments. Keys keep
/// their first-seen order when serialized, so emitted files are byte-stable.
class KvMap {
  public:
    static KvMap parse(const std::string& text);
    static KvMap parse_file(const std::string& path);

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);
    void set(const std::string& key, bool value);

    const std::string& get(const std::string& key) const;  // throws ConfigError if absent
    std::string get_or(const std::string& key, const std::string& dflt) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double dflt) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int_or(const std::string& key, std::int64_t dflt) const;
    bool get_bool_or(const std::string& key, bool dflt) const;
    std::vector<double> get_doubles(const std::string& key) const;        // comma-separated
    std::vector<std::uint64_t> get_u64s(const std::string& key) const;

    /// Keys present in the map but not in `allowed`; used to reject typos.
    std::vector<std::string> unknown_keys(const std::vector<std::string>& allowed) const;

    std::string serialize() const;
    const std::vector<std::string>& order() const { return order_; }

  private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace tp
