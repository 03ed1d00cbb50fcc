#pragma once

#include <stdexcept>
#include <string>

namespace imbfc {

/// Coarse failure class, used by the CLI to pick an exit code.
enum class ErrorKind { data, model };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define IMBFC_DEFINE_ERROR(Name, Kind)                                       \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
    };

// ingestion and data validation
IMBFC_DEFINE_ERROR(GapError, data)
IMBFC_DEFINE_ERROR(AlignmentError, data)
IMBFC_DEFINE_ERROR(SchemaError, data)
IMBFC_DEFINE_ERROR(ValueError, data)
IMBFC_DEFINE_ERROR(RangeError, data)
IMBFC_DEFINE_ERROR(CoverageError, data)
IMBFC_DEFINE_ERROR(IOError, data)
IMBFC_DEFINE_ERROR(SpecError, data)
IMBFC_DEFINE_ERROR(EmptyInput, data)

// model fitting
IMBFC_DEFINE_ERROR(InsufficientDataError, model)
IMBFC_DEFINE_ERROR(CholeskyError, model)

#undef IMBFC_DEFINE_ERROR

} // namespace imbfc
