#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace apiseq {

// Parse/contract failures carry a short stable error name (what the CLI
// surfaces) plus a human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& message)
        : std::runtime_error(name + ": " + message), name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

[[noreturn]] inline void fail(std::string name, const std::string& message) {
    throw Error(std::move(name), message);
}

} // namespace apiseq
