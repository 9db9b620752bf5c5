#pragma once

#include <stdexcept>
#include <string>

namespace mrp {

/// Base for every library error. Catching mrp::Error catches them all.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- reasoning pool ---------------------------------------------------------

class DuplicateId : public Error {
public:
    using Error::Error;
};

class InvalidDescriptor : public Error {
public:
    using Error::Error;
};

class MissingPromptFile : public Error {
public:
    using Error::Error;
};

class EmptySegment : public Error {
public:
    using Error::Error;
};

// --- selection --------------------------------------------------------------

class ScoreUnparseable : public Error {
public:
    using Error::Error;
};

class ScoreOutOfRange : public Error {
public:
    using Error::Error;
};

class EmptyScoreList : public Error {
public:
    using Error::Error;
};

class KOutOfRange : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

// --- backend ----------------------------------------------------------------

/// Any failure of the completion layer. A benchmark run aborts on these.
class BackendError : public Error {
public:
    using Error::Error;
};

class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

class ApiError : public BackendError {
public:
    ApiError(int status, std::string body, const std::string& what)
        : BackendError(what), status_(status), body_(std::move(body)) {}

    int status() const { return status_; }
    const std::string& body() const { return body_; }

private:
    int status_;
    std::string body_;
};

class ScriptExhausted : public BackendError {
public:
    using BackendError::BackendError;
};

class ReplayMiss : public BackendError {
public:
    using BackendError::BackendError;
};

class CacheIoError : public BackendError {
public:
    using BackendError::BackendError;
};

// --- task suite -------------------------------------------------------------

class DatasetError : public Error {
public:
    using Error::Error;
};

class MalformedLine : public DatasetError {
public:
    using DatasetError::DatasetError;
};

class GoldShapeMismatch : public DatasetError {
public:
    using DatasetError::DatasetError;
};

class EmptyAnswerSets : public Error {
public:
    using Error::Error;
};

class JudgeUnparseable : public Error {
public:
    using Error::Error;
};

// --- metrics / reports ------------------------------------------------------

class EmptyList : public Error {
public:
    using Error::Error;
};

class ColumnMismatch : public Error {
public:
    using Error::Error;
};

// --- configuration / CLI ----------------------------------------------------

class ConfigError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace mrp
