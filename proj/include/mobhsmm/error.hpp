#pragma once

#include <stdexcept>
#include <string>

namespace mobhsmm {

// Raised for anything caused by user input: bad files, schema violations,
// out-of-range flags. The CLI maps this to exit code 1; every other
// exception is treated as an internal failure (exit code 2).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mobhsmm
