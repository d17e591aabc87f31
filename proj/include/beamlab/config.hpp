#pragma once

// INI-style run files. Every key has a type and a documented default; unknown
// sections and keys are errors, and all problems are reported together.

#include <map>
#include <string>
#include <vector>

#include "beamlab/expression.hpp"

namespace beamlab {

enum class KeyKind { Number, Integer, Expr, ExprList, NumberList, VectorList, Enum, Text };

struct ConfigKey {
    std::string section, key;
    KeyKind kind;
    std::string default_value;
    std::string doc;
    std::vector<std::string> allowed;  // Enum only
};

// All keys in echo order.
const std::vector<ConfigKey>& config_schema();

class RunConfig {
  public:
    std::string text(const std::string& section, const std::string& key) const;
    double number(const std::string& section, const std::string& key) const;
    int integer(const std::string& section, const std::string& key) const;
    Expression expr(const std::string& section, const std::string& key) const;
    std::vector<Expression> exprs(const std::string& section, const std::string& key) const;
    // Raw items of an ExprList, for labels.
    std::vector<std::string> items(const std::string& section, const std::string& key) const;
    std::vector<double> numbers(const std::string& section, const std::string& key) const;
    // "a,b; c,d" -> {{a, b}, {c, d}}
    std::vector<std::vector<double>> vectors(const std::string& section, const std::string& key) const;
    bool is_default(const std::string& section, const std::string& key) const;

    // Validates the new value; throws ConfigError.
    void set(const std::string& section, const std::string& key, const std::string& value);

    // Canonical "[section]\nkey = value" text of every key; parse_config(echo()) reproduces it.
    std::string echo() const;

  private:
    friend RunConfig parse_config(const std::string& text);
    friend RunConfig default_config();
    const std::string& raw(const std::string& section, const std::string& key) const;
    std::map<std::string, std::map<std::string, std::string>> values_;
    std::map<std::string, std::map<std::string, bool>> explicit_;
};

RunConfig default_config();
// Throws ConfigError listing every unknown key, malformed value and violated constraint.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Cutoff exponent alpha for the [cylinder] section ("auto" picks the default).
double cylinder_alpha(const RunConfig& cfg);

}  // namespace beamlab
