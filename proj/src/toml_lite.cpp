#include "meshray/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "meshray/error.hpp"

namespace meshray::toml {

namespace {

class Parser {
public:
    Parser(std::string_view text, std::string_view source) : text_(text), source_(source) {}

    Table run()
    {
        Table root;
        Table* current = &root;
        while (true) {
            skip_ws_comments_newlines();
            if (eof()) break;
            if (peek() == '[') {
                current = header(root);
            } else {
                key_value(*current);
            }
            expect_line_end();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const
    {
        throw Error(ErrorCode::ParseError, std::string(source_) + ":" + std::to_string(line_) + ": " + msg);
    }

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }
    char get()
    {
        const char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    void skip_ws()
    {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment()
    {
        if (peek() == '#') {
            while (!eof() && peek() != '\n') ++pos_;
        }
    }

    void skip_ws_comments_newlines()
    {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n' || peek() == '\r') {
                get();
            } else {
                break;
            }
        }
    }

    void expect_line_end()
    {
        skip_ws();
        skip_comment();
        if (eof()) return;
        if (peek() == '\r') get();
        if (peek() != '\n') fail(std::string("unexpected '") + peek() + "' after value");
        get();
    }

    std::string bare_or_quoted_key()
    {
        skip_ws();
        if (peek() == '"' || peek() == '\'') return string_value();
        std::string key;
        while (!eof()) {
            const char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
                key.push_back(get());
            } else {
                break;
            }
        }
        if (key.empty()) fail("expected a key");
        return key;
    }

    std::vector<std::string> dotted_key()
    {
        std::vector<std::string> parts{bare_or_quoted_key()};
        skip_ws();
        while (peek() == '.') {
            get();
            parts.push_back(bare_or_quoted_key());
            skip_ws();
        }
        return parts;
    }

    Table& descend(Table& t, const std::string& key)
    {
        auto [it, inserted] = t.try_emplace(key, Value{Table{}});
        Value& v = it->second;
        if (v.is_table()) return std::get<Table>(v.data);
        if (v.is_array()) {
            auto& arr = std::get<Array>(v.data);
            if (!arr.empty() && arr.back().is_table()) return std::get<Table>(arr.back().data);
        }
        fail("key '" + key + "' is not a table");
    }

    Table* header(Table& root)
    {
        get();  // '['
        const bool array_of_tables = peek() == '[';
        if (array_of_tables) get();
        const auto parts = dotted_key();
        if (get() != ']') fail("expected ']'");
        if (array_of_tables && get() != ']') fail("expected ']]'");

        Table* t = &root;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) t = &descend(*t, parts[i]);
        const std::string& last = parts.back();
        if (array_of_tables) {
            auto [it, inserted] = t->try_emplace(last, Value{Array{}});
            if (!it->second.is_array()) fail("key '" + last + "' is not an array of tables");
            auto& arr = std::get<Array>(it->second.data);
            arr.push_back(Value{Table{}});
            return &std::get<Table>(arr.back().data);
        }
        return &descend(*t, last);
    }

    void key_value(Table& t)
    {
        const auto parts = dotted_key();
        skip_ws();
        if (get() != '=') fail("expected '=' after key");
        skip_ws();
        Value v = value();
        Table* target = &t;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) target = &descend(*target, parts[i]);
        if (!target->emplace(parts.back(), std::move(v)).second) fail("duplicate key '" + parts.back() + "'");
    }

    Value value()
    {
        const char c = peek();
        if (c == '"' || c == '\'') return Value{string_value()};
        if (c == '[') return array_value();
        if (c == '{') return inline_table();
        if (text_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return Value{true};
        }
        if (text_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return Value{false};
        }
        return number_value();
    }

    std::string string_value()
    {
        const char quote = get();
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = get();
            if (c == quote) break;
            if (c == '\\' && quote == '"') {
                const char e = get();
                switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: fail(std::string("unsupported escape \\") + e);
                }
            } else {
                out.push_back(c);
            }
        }
        return out;
    }

    Value array_value()
    {
        get();  // '['
        Array arr;
        while (true) {
            skip_ws_comments_newlines();
            if (peek() == ']') {
                get();
                break;
            }
            arr.push_back(value());
            skip_ws_comments_newlines();
            if (peek() == ',') {
                get();
            } else if (peek() != ']') {
                fail("expected ',' or ']' in array");
            }
        }
        return Value{std::move(arr)};
    }

    Value inline_table()
    {
        get();  // '{'
        Table t;
        skip_ws();
        if (peek() == '}') {
            get();
            return Value{std::move(t)};
        }
        while (true) {
            key_value(t);
            skip_ws();
            const char c = get();
            if (c == '}') break;
            if (c != ',') fail("expected ',' or '}' in inline table");
        }
        return Value{std::move(t)};
    }

    Value number_value()
    {
        std::string token;
        while (!eof()) {
            const char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' || c == '_') {
                if (c != '_') token.push_back(c);
                ++pos_;
            } else {
                break;
            }
        }
        if (token.empty()) fail("expected a value");
        std::string_view body = token;
        bool negative = false;
        if (body[0] == '+' || body[0] == '-') {
            negative = body[0] == '-';
            body.remove_prefix(1);
        }
        if (body == "inf") return Value{negative ? -std::numeric_limits<double>::infinity()
                                                 : std::numeric_limits<double>::infinity()};
        if (body == "nan") return Value{std::numeric_limits<double>::quiet_NaN()};
        const bool is_float = token.find_first_of(".eE") != std::string::npos;
        if (!is_float) {
            std::int64_t i = 0;
            auto [p, ec] = std::from_chars(token.data() + (token[0] == '+' ? 1 : 0), token.data() + token.size(), i);
            if (ec != std::errc{} || p != token.data() + token.size()) fail("invalid integer '" + token + "'");
            return Value{i};
        }
        double d = 0.0;
        auto [p, ec] = std::from_chars(token.data() + (token[0] == '+' ? 1 : 0), token.data() + token.size(), d);
        if (ec != std::errc{} || p != token.data() + token.size()) fail("invalid number '" + token + "'");
        return Value{d};
    }

    std::string_view text_;
    std::string_view source_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

[[noreturn]] void type_error(std::string_view what, std::string_view expected)
{
    throw Error(ErrorCode::ParseError, std::string(what) + " must be " + std::string(expected));
}

}  // namespace

double Value::as_number(std::string_view what) const
{
    if (const auto* i = std::get_if<std::int64_t>(&data)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&data)) return *d;
    type_error(what, "a number");
}

std::int64_t Value::as_integer(std::string_view what) const
{
    if (const auto* i = std::get_if<std::int64_t>(&data)) return *i;
    type_error(what, "an integer");
}

const std::string& Value::as_string(std::string_view what) const
{
    if (const auto* s = std::get_if<std::string>(&data)) return *s;
    type_error(what, "a string");
}

const Array& Value::as_array(std::string_view what) const
{
    if (const auto* a = std::get_if<Array>(&data)) return *a;
    type_error(what, "an array");
}

const Table& Value::as_table(std::string_view what) const
{
    if (const auto* t = std::get_if<Table>(&data)) return *t;
    type_error(what, "a table");
}

bool Value::as_bool(std::string_view what) const
{
    if (const auto* b = std::get_if<bool>(&data)) return *b;
    type_error(what, "a boolean");
}

Table parse(std::string_view text, std::string_view source) { return Parser(text, source).run(); }

Table parse_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

const Value* find(const Table& t, const std::string& key)
{
    auto it = t.find(key);
    return it == t.end() ? nullptr : &it->second;
}

const Value& require(const Table& t, const std::string& key, std::string_view context)
{
    const Value* v = find(t, key);
    if (!v) throw Error(ErrorCode::ParseError, std::string(context) + ": missing key '" + key + "'");
    return *v;
}

}  // namespace meshray::toml
