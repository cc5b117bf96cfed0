#pragma once

// Reader for the TOML subset used by sensor and placement files: tables,
// arrays of tables, dotted keys, strings, integers, floats, booleans,
// (nested) arrays and inline tables. Dates/times are not supported.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace meshray::toml {

struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

struct Value {
    std::variant<bool, std::int64_t, double, std::string, Array, Table> data;

    bool is_number() const { return std::holds_alternative<std::int64_t>(data) || std::holds_alternative<double>(data); }
    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_array() const { return std::holds_alternative<Array>(data); }
    bool is_table() const { return std::holds_alternative<Table>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }

    // The accessors throw Error(ParseError) naming `what` on a type mismatch.
    double as_number(std::string_view what) const;
    std::int64_t as_integer(std::string_view what) const;
    const std::string& as_string(std::string_view what) const;
    const Array& as_array(std::string_view what) const;
    const Table& as_table(std::string_view what) const;
    bool as_bool(std::string_view what) const;
};

/// Throws Error(ParseError) with "<source>:<line>: ..." on malformed input.
Table parse(std::string_view text, std::string_view source = "<string>");
Table parse_file(const std::string& path);

const Value* find(const Table& t, const std::string& key);
/// Throws Error(ParseError) when the key is absent.
const Value& require(const Table& t, const std::string& key, std::string_view context);

}  // namespace meshray::toml
