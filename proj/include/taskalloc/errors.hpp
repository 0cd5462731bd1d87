#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taskalloc {

enum class ErrorCode {
    Io,
    InvalidArgument,
    InvalidEncoding,
    MalformedCsv,
    MissingHeader,
    EmptyTitle,
    UnknownRole,
    MissingMeta,
    EmptyCorpus,
    UnknownProject,
    MalformedHeader,
    DimensionMismatch,
    EmptyTrainingSet,
    LengthMismatch,
    EmptyBatch,
    SingleClassBatch,
    Divergence,
    FeatureKindMismatch,
    EmptyInput,
    KTooLarge,
    EmptyValidation,
    NoHistory,
    EmptyTitleAfterCleaning,
    EmptyProjectRoles,
    VersionMismatch,
    CorruptContainer,
    NoActiveModel,
    UnknownModel,
    DuplicateModel,
    TrainingBusy,
    UnknownJob,
    MalformedRequest,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every recoverable failure raised by the library carries one of the codes
/// above so callers (CLI, HTTP service) can map it without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace taskalloc
