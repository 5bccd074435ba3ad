#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace draglab {

#ifdef DRAGLAB_DOUBLE
using real = double;
#else
using real = float;
#endif

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad shapes, ranges or mismatched sizes passed to an operation.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// An entity whose mask has no foreground pixels.
class InvalidEntityError : public Error {
public:
    using Error::Error;
};

class SpecError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `offset` is the byte offset where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class UnsupportedVersionError : public Error {
public:
    UnsupportedVersionError(const std::string& kind, std::uint32_t found, std::uint32_t expected)
        : Error("unsupported " + kind + " version " + std::to_string(found) + " (expected " +
                std::to_string(expected) + ")"),
          found_(found) {}
    std::uint32_t found() const noexcept { return found_; }

private:
    std::uint32_t found_;
};

class LoadError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace draglab
