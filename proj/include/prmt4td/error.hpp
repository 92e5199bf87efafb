#pragma once

#include <stdexcept>
#include <string>

namespace prmt4td {

/// Process exit codes shared by every CLI command.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    data = 2,
    backend = 3,
};

/// Malformed or inconsistent input data (corpus records, model files, fixtures).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model container written by an incompatible format version.
class VersionError : public DataError {
public:
    using DataError::DataError;
};

/// Model container that cannot be decoded.
class CorruptFileError : public DataError {
public:
    using DataError::DataError;
};

/// A precondition on arguments was violated (empty training set, bad fractions, ...).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Completion backend failure (transport, auth, replay miss).
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AuthenticationError : public BackendError {
public:
    using BackendError::BackendError;
};

class RetriesExhaustedError : public BackendError {
public:
    using BackendError::BackendError;
};

class ReplayMissError : public BackendError {
public:
    ReplayMissError(std::string hash)
        : BackendError("replay fixture missing for request hash " + hash), hash_(std::move(hash)) {}

    const std::string& hash() const noexcept { return hash_; }

private:
    std::string hash_;
};

}  // namespace prmt4td
