#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nst {

// Parse failure in an external file format. `offset` is the byte offset
// (or line number, for line-oriented formats) where parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class UnsupportedFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A stored blob failed its CRC or magic check.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nst
