#pragma once

#include <stdexcept>
#include <string>

namespace lpcure {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CSV ingestion failure; message carries the 1-based line number.
struct CsvError : Error {
    CsvError(std::size_t line, const std::string& what)
        : Error("csv line " + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};

// Local window holds fewer usable design points than the polynomial needs.
struct RankDeficientWindow : Error {
    using Error::Error;
};

// An iterative solver exhausted its iteration budget.
struct NonConvergence : Error {
    using Error::Error;
};

// Dataset has no cured subjects, so log(-log p_bar) cannot initialize the fit.
struct NoCuredSubjects : Error {
    using Error::Error;
};

// Every subject is cured (p_bar = 1): the initializer log(-log 1) is undefined.
struct UndefinedInitializer : Error {
    using Error::Error;
};

// All subjects are cured; the conditional likelihood carries no information.
struct NoInformative : Error {
    using Error::Error;
};

// exp(-theta*F) - exp(-theta) <= 0 for a finite observation under a degenerate
// parameter value; message carries the offending subject index.
struct LogOfNonpositive : Error {
    LogOfNonpositive(std::size_t subject, const std::string& what)
        : Error("subject " + std::to_string(subject) + ": " + what), subject(subject) {}
    std::size_t subject;
};

}  // namespace lpcure
