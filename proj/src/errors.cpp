#include "taskalloc/errors.hpp"

namespace taskalloc {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Io: return "Io";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvalidEncoding: return "InvalidEncoding";
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::MissingHeader: return "MissingHeader";
        case ErrorCode::EmptyTitle: return "EmptyTitle";
        case ErrorCode::UnknownRole: return "UnknownRole";
        case ErrorCode::MissingMeta: return "MissingMeta";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::UnknownProject: return "UnknownProject";
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::SingleClassBatch: return "SingleClassBatch";
        case ErrorCode::Divergence: return "Divergence";
        case ErrorCode::FeatureKindMismatch: return "FeatureKindMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::KTooLarge: return "KTooLarge";
        case ErrorCode::EmptyValidation: return "EmptyValidation";
        case ErrorCode::NoHistory: return "NoHistory";
        case ErrorCode::EmptyTitleAfterCleaning: return "EmptyTitleAfterCleaning";
        case ErrorCode::EmptyProjectRoles: return "EmptyProjectRoles";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::CorruptContainer: return "CorruptContainer";
        case ErrorCode::NoActiveModel: return "NoActiveModel";
        case ErrorCode::UnknownModel: return "UnknownModel";
        case ErrorCode::DuplicateModel: return "DuplicateModel";
        case ErrorCode::TrainingBusy: return "TrainingBusy";
        case ErrorCode::UnknownJob: return "UnknownJob";
        case ErrorCode::MalformedRequest: return "MalformedRequest";
    }
    return "Unknown";
}

}  // namespace taskalloc
