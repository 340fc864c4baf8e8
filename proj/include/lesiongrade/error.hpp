#pragma once

#include <stdexcept>
#include <string>

namespace lesiongrade {

// Raised for malformed or out-of-contract input (files, CSV rows, arguments).
// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// PGM decoding failure. The message names the file and the byte offset.
class MaskFormatError : public InputError {
public:
    enum class Kind { MalformedHeader, TruncatedPayload, MaxvalTooLarge, ZeroDimension, BadSample, Io };

    MaskFormatError(Kind kind, const std::string& path, std::size_t offset, const std::string& detail);

    Kind kind() const noexcept { return kind_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::size_t offset_;
};

// Model file or in-memory model whose layer shapes do not chain.
class ShapeError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

}  // namespace lesiongrade
