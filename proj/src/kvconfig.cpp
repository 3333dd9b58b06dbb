#include "tp/kvconfig.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tp/errors.hpp"

namespace tp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(trim(item));
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

double parse_double(const std::string& s, const std::string& key) {
    // from_chars handles "inf"/"nan" spellings too
    double v;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("key '" + key + "': cannot parse '" + s + "' as a number");
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

KvMap KvMap::parse(const std::string& text) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        kv.set(key, trim(t.substr(eq + 1)));
    }
    return kv;
}

KvMap KvMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool KvMap::has(const std::string& key) const { return values_.count(key) > 0; }

void KvMap::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
}

void KvMap::set(const std::string& key, double value) { set(key, format_double(value)); }

void KvMap::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }

void KvMap::set(const std::string& key, bool value) {
    set(key, std::string(value ? "true" : "false"));
}

const std::string& KvMap::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
    return it->second;
}

std::string KvMap::get_or(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
}

double KvMap::get_double(const std::string& key) const { return parse_double(get(key), key); }

double KvMap::get_double_or(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
}

std::int64_t KvMap::get_int(const std::string& key) const {
    const std::string& s = get(key);
    std::int64_t v;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("key '" + key + "': cannot parse '" + s + "' as an integer");
    return v;
}

std::int64_t KvMap::get_int_or(const std::string& key, std::int64_t dflt) const {
    return has(key) ? get_int(key) : dflt;
}

bool KvMap::get_bool_or(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const std::string& s = get(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("key '" + key + "': cannot parse '" + s + "' as a bool");
}

std::vector<double> KvMap::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_csv(get(key))) out.push_back(parse_double(item, key));
    return out;
}

std::vector<std::uint64_t> KvMap::get_u64s(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& item : split_csv(get(key))) {
        std::uint64_t v;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc() || res.ptr != item.data() + item.size())
            throw ConfigError("key '" + key + "': cannot parse '" + item + "' as an integer");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> KvMap::unknown_keys(const std::vector<std::string>& allowed) const {
    std::vector<std::string> out;
    for (const auto& key : order_)
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) out.push_back(key);
    return out;
}

std::string KvMap::serialize() const {
    std::string out;
    for (const auto& key : order_) {
        out += key;
        out += " = ";
        out += values_.at(key);
        out += '\n';
    }
    return out;
}

}  // namespace tp
