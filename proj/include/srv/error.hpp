#pragma once

#include <stdexcept>
#include <string>

namespace srv {

enum class Errc {
    Type,
    Evaluation,
    Registration,
    InstantMismatch,
    NoVerdict,
    VersionMismatch,
    Integrity,
    InstallIntegrity,
    Filter,
    Adapter,
    Io,
    Parse,
    Validation,
    Usage,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace srv
