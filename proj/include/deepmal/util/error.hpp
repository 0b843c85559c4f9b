#pragma once

#include <stdexcept>
#include <string>

namespace deepmal {

/// Base of every error the toolkit raises. The CLI maps each subclass to a
/// distinct exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable capture or manifest.
class IngestError : public Error {
public:
    using Error::Error;
};

/// Bytes that do not follow the expected on-disk layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Frame shorter than the headers it declares. Raised per packet and
/// swallowed by the capture reader, which counts it as skipped.
class MalformedPacket : public Error {
public:
    using Error::Error;
};

/// Invalid parameters or model configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor extents that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

class DatasetError : public Error {
public:
    using Error::Error;
};

/// Divergence or non-finite gradients while fitting.
class TrainingError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

}  // namespace deepmal
