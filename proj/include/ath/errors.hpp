#pragma once

#include <stdexcept>
#include <string>

namespace ath {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ATH_DEFINE_ERROR(NAME)                    \
    class NAME : public Error {                   \
    public:                                       \
        using Error::Error;                       \
    }

// Distribution / vocabulary errors.
ATH_DEFINE_ERROR(DegenerateDistribution);
ATH_DEFINE_ERROR(UnknownVocabularyTerm);

// Operation-sequence errors.
ATH_DEFINE_ERROR(ParseError);
ATH_DEFINE_ERROR(UnknownOperation);
ATH_DEFINE_ERROR(UntokenizableArgument);
ATH_DEFINE_ERROR(DetokenizeError);
ATH_DEFINE_ERROR(UnsupportedStructure);

// Execution errors.
ATH_DEFINE_ERROR(UnsupportedOperation);
ATH_DEFINE_ERROR(NoViablePath);
ATH_DEFINE_ERROR(AnswerFailure);
ATH_DEFINE_ERROR(EmptyPath);
ATH_DEFINE_ERROR(CalibrationError);
ATH_DEFINE_ERROR(OracleTooLarge);

// IO / configuration errors.
ATH_DEFINE_ERROR(IngestError);
ATH_DEFINE_ERROR(ConfigError);

#undef ATH_DEFINE_ERROR

} // namespace ath
