#pragma once

#include <stdexcept>
#include <string>

namespace fhevec {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SyntaxError : Error {
    using Error::Error;
};
struct TypeError : Error {
    using Error::Error;
};
struct ArityError : Error {
    using Error::Error;
};
struct UnboundVariable : Error {
    using Error::Error;
};
struct IncompatibleInputs : Error {
    using Error::Error;
};
struct InvalidSite : Error {
    using Error::Error;
};
struct IllegalAction : Error {
    using Error::Error;
};
struct EpisodeDone : Error {
    using Error::Error;
};
struct NonPositiveStep : Error {
    using Error::Error;
};
struct UnknownStep : Error {
    using Error::Error;
};
struct BudgetInfeasible : Error {
    using Error::Error;
};
struct EmptyCorpus : Error {
    using Error::Error;
};
struct FileUnreadable : Error {
    using Error::Error;
};
struct UnsupportedSpec : Error {
    using Error::Error;
};
struct KeyMismatch : Error {
    using Error::Error;
};

}  // namespace fhevec
