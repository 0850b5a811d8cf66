// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace linkforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Ingestion / data-model errors.
class SchemaError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DuplicateIdError : public Error {
public:
    using Error::Error;
};

// Name handling.
class UnparseableName : public Error {
public:
    using Error::Error;
};

// Model training / prediction.
class NonFiniteLoss : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class LayoutMismatch : public Error {
public:
    using Error::Error;
};

// Geo resolution.
class ClientUnavailable : public Error {
public:
    using Error::Error;
};

class MalformedResponse : public Error {
public:
    using Error::Error;
};

// Analytics.
class InsufficientOverlap : public Error {
public:
    using Error::Error;
};

class ZeroVariance : public Error {
public:
    using Error::Error;
};

class EmptyGroup : public Error {
public:
    using Error::Error;
};

// Pipeline orchestration.
class MissingUpstream : public Error {
public:
    using Error::Error;
};

class StaleUpstream : public Error {
public:
    using Error::Error;
};

}  // namespace linkforge
