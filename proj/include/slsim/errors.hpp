#pragma once

#include <stdexcept>
#include <string>

namespace slsim {

// Error taxonomy mirrored by the CLI exit codes: configuration, contract and
// io errors are usage-class failures (exit 1); numeric errors are runtime
// numerical failures (exit 2).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct contract_error : std::runtime_error {
    explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace slsim
