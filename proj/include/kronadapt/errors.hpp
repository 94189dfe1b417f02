#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kronadapt {

// Shape/conformance violations (incompatible dimensions, overflowing sizes).
class dimension_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Invalid argument values (out-of-range ranks, bad policies, non-finite data).
class argument_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Spectrum with no energy; callers typically fall back to a minimum rank.
class degenerate_spectrum_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Iterative routine failed to converge; carries the iteration count reached.
class numerical_error : public std::runtime_error {
public:
    numerical_error(const std::string& what, std::size_t iterations)
        : std::runtime_error(what), iterations_(iterations) {}

    std::size_t iterations() const { return iterations_; }

private:
    std::size_t iterations_ = 0;
};

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unrecognized magic bytes.
class format_error : public io_error {
public:
    using io_error::io_error;
};

// Recognized container, unsupported format version.
class version_error : public io_error {
public:
    using io_error::io_error;
};

// Truncated payload, trailing bytes, or missing referenced file.
class corrupt_file_error : public io_error {
public:
    using io_error::io_error;
};

// Manifest and payload disagree (shape, count, or value mismatch).
class consistency_error : public io_error {
public:
    using io_error::io_error;
};

} // namespace kronadapt
