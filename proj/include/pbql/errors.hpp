#pragma once

#include <stdexcept>
#include <string>

namespace pbql {

/** Base class for all library errors. */
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** A probability row does not sum to one. */
struct NormalizationError : Error {
    using Error::Error;
};

/** A structural precondition is violated (negative probability, empty domain,
    bad batch size, out-of-range id, ...). */
struct DomainError : Error {
    using Error::Error;
};

/** A conditional quantity is undefined because its conditioning event has
    probability zero (e.g. p(s'|s,x) when p(x|s) = 0). */
struct DegenerateError : Error {
    using Error::Error;
};

/** Training was requested on a dataset with no records. */
struct EmptyDataset : Error {
    using Error::Error;
};

/** Two tables (or a table and an environment) disagree on |S| or |X|. */
struct DimensionMismatch : Error {
    using Error::Error;
};

/** Two rollout reports were produced under different configurations and
    cannot be compared. */
struct ConfigMismatch : Error {
    using Error::Error;
};

/** Fixed-point iteration hit its iteration cap before reaching tolerance. */
struct NonConvergence : Error {
    using Error::Error;
};

/** No model in the searched family reproduces the observed distribution;
    indicates corrupt input rather than genuine non-identifiability. */
struct InfeasibleObservation : Error {
    using Error::Error;
};

/** A required input file for this step has not been produced yet. */
struct MissingArtifact : Error {
    using Error::Error;
};

/** Reading or writing a file failed. */
struct IoError : Error {
    using Error::Error;
};

/** Process exit code for an exception, mirroring the CLI contract:
    1 for validation/usage errors, 2 for I/O problems. */
inline int exit_code_for(const Error& e) {
    if (dynamic_cast<const IoError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const MissingArtifact*>(&e) != nullptr) return 2;
    return 1;
}

} // namespace pbql
