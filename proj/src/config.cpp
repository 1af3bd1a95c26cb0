#include "hwlab/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hwlab {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double to_num(const std::string& tok, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number '" + tok + "' in " + where);
    }
}

}  // namespace

ConfigDoc ConfigDoc::parse(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            doc.sections_[section];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        doc.sections_[section][key] = split_tokens(trim(line.substr(eq + 1)));
    }
    return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool ConfigDoc::has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::vector<std::string> ConfigDoc::tokens(const std::string& section,
                                           const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key))
        throw std::invalid_argument("config: missing [" + section + "] " + key);
    return s->second.at(key);
}

std::string ConfigDoc::str(const std::string& section, const std::string& key) const {
    const auto t = tokens(section, key);
    if (t.size() != 1)
        throw std::invalid_argument("config: [" + section + "] " + key + " wants one value");
    return t.front();
}

std::string ConfigDoc::str_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const {
    return has(section, key) ? str(section, key) : fallback;
}

double ConfigDoc::num(const std::string& section, const std::string& key) const {
    return to_num(str(section, key), "[" + section + "] " + key);
}

double ConfigDoc::num_or(const std::string& section, const std::string& key,
                         double fallback) const {
    return has(section, key) ? num(section, key) : fallback;
}

long long ConfigDoc::integer_or(const std::string& section, const std::string& key,
                                long long fallback) const {
    if (!has(section, key)) return fallback;
    const double v = num(section, key);
    const long long n = static_cast<long long>(v);
    if (static_cast<double>(n) != v)
        throw std::invalid_argument("config: [" + section + "] " + key + " must be an integer");
    return n;
}

bool ConfigDoc::flag_or(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = str(section, key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: [" + section + "] " + key + " must be a boolean");
}

std::vector<double> ConfigDoc::nums(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& t : tokens(section, key)) out.push_back(to_num(t, "[" + section + "] " + key));
    return out;
}

std::vector<double> ConfigDoc::nums_or(const std::string& section, const std::string& key,
                                       const std::vector<double>& fallback) const {
    return has(section, key) ? nums(section, key) : fallback;
}

void ConfigDoc::set(const std::string& section, const std::string& key,
                    const std::vector<std::string>& values) {
    sections_[section][key] = values;
}

std::string ConfigDoc::canonical() const {
    std::ostringstream out;
    for (const auto& [section, kv] : sections_) {
        if (!section.empty()) out << "[" << section << "]\n";
        for (const auto& [key, values] : kv) {
            out << key << " =";
            for (const auto& v : values) out << " " << v;
            out << "\n";
        }
    }
    return out.str();
}

std::uint64_t ConfigDoc::hash() const {
    const std::string text = canonical();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

DistributionSpec distribution_from_config(const ConfigDoc& doc, const std::string& section) {
    DistributionSpec spec;
    spec.family = family_from_name(doc.str(section, "family"));
    spec.normalize_mean = doc.flag_or(section, "normalize_mean", false);
    const auto s = doc.sections().find(section);
    for (const auto& [key, values] : s->second) {
        if (key == "family" || key == "normalize_mean" || key == "sample_file") continue;
        std::vector<double> nums;
        for (const auto& t : values) nums.push_back(to_num(t, "[" + section + "] " + key));
        spec.params[key] = std::move(nums);
    }
    if (doc.has(section, "sample_file")) {
        std::ifstream in(doc.str(section, "sample_file"));
        if (!in)
            throw std::runtime_error("cannot read sample file: " + doc.str(section, "sample_file"));
        std::vector<double> sample;
        double v;
        while (in >> v) sample.push_back(v);
        spec.params["sample"] = std::move(sample);
    }
    return spec;
}

void distribution_to_config(const DistributionSpec& spec, ConfigDoc& doc,
                            const std::string& section) {
    doc.set(section, "family", {family_name(spec.family)});
    doc.set(section, "normalize_mean", {spec.normalize_mean ? "1" : "0"});
    for (const auto& [key, values] : spec.params) {
        std::vector<std::string> toks;
        for (double v : values) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            toks.emplace_back(buf);
        }
        doc.set(section, key, toks);
    }
}

RGrid rgrid_from_config(const ConfigDoc& doc, const std::string& section) {
    if (doc.has(section, "nodes_explicit")) return RGrid::from_nodes(doc.nums(section, "nodes_explicit"));
    const double r_max = doc.num_or(section, "r_max", 40.0);
    const int n = static_cast<int>(doc.integer_or(section, "nodes", 48));
    const double first = doc.num_or(section, "first_step", 0.05);
    return RGrid::geometric(r_max, n, first);
}

}  // namespace hwlab
