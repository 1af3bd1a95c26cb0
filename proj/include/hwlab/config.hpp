#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hwlab/distributions.hpp"
#include "hwlab/kernels.hpp"

namespace hwlab {

// Plain-text experiment format: `key = value...` lines grouped under
// `[section]` headers; '#' starts a comment. Values are whitespace- or
// comma-separated tokens.
class ConfigDoc {
public:
    static ConfigDoc parse(const std::string& text);
    static ConfigDoc parse_file(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    std::string str(const std::string& section, const std::string& key) const;
    std::string str_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double num(const std::string& section, const std::string& key) const;
    double num_or(const std::string& section, const std::string& key, double fallback) const;
    long long integer_or(const std::string& section, const std::string& key,
                         long long fallback) const;
    bool flag_or(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> nums(const std::string& section, const std::string& key) const;
    std::vector<double> nums_or(const std::string& section, const std::string& key,
                                const std::vector<double>& fallback) const;
    std::vector<std::string> tokens(const std::string& section, const std::string& key) const;

    void set(const std::string& section, const std::string& key,
             const std::vector<std::string>& values);

    // canonical text: sorted sections and keys, one space between tokens
    std::string canonical() const;
    std::uint64_t hash() const;  // FNV-1a over the canonical text

    const std::map<std::string, std::map<std::string, std::vector<std::string>>>& sections()
        const {
        return sections_;
    }

private:
    std::map<std::string, std::map<std::string, std::vector<std::string>>> sections_;
};

// distribution spec from a config section (family name + key=value parameters)
DistributionSpec distribution_from_config(const ConfigDoc& doc, const std::string& section);
void distribution_to_config(const DistributionSpec& spec, ConfigDoc& doc,
                            const std::string& section);

RGrid rgrid_from_config(const ConfigDoc& doc, const std::string& section = "rgrid");

}  // namespace hwlab
