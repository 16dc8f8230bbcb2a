#pragma once

#include <stdexcept>
#include <string>

namespace dcqa {

// Bad user input: shapes, configs, malformed files, violated preconditions.
// The CLI maps this to exit code 1; any other exception lands on exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dcqa
