#pragma once

#include <stdexcept>
#include <string>

namespace taskvid {

// Exit-code mapping used by the CLI: validation 2, numeric 3, io 4.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& m) : std::runtime_error(m) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace taskvid
