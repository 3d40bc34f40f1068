#pragma once

#include <stdexcept>
#include <string>

namespace verifix {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax or semantic error in one of the text formats. Line and column are 1-based, 0 if unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line = 0, int column = 0);

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

class PatchError : public Error {
public:
    using Error::Error;
};

} // namespace verifix
