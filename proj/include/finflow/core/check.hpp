#pragma once

#include <stdexcept>
#include <string>

namespace finflow {

// all hard errors in the engine surface as SimError; message carries context
// (op name, element index, step index) so failures are actionable.
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw SimError(msg);
}

} // namespace finflow
