#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vst3 {

// All library failures surface as Error. `code` is a stable kebab-case
// identifier ("malformed-magic", "truncated-payload", ...) suitable for
// machine parsing; `what()` combines code and detail text.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(detail.empty() ? code : code + ": " + detail),
          code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& detail = "") {
    throw Error(std::move(code), detail);
}

inline void require(bool condition, const std::string& code, const std::string& detail = "") {
    if (!condition)
        fail(code, detail);
}

} // namespace vst3
