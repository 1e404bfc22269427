#pragma once

#include <stdexcept>
#include <string>

namespace vaec {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Input file exists but is not a format/layout we accept (e.g. grayscale slide).
class UnsupportedFormatError : public Error {
public:
    using Error::Error;
};

/// Bad magic, unsupported version, or otherwise unparseable container.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Archive header parsed but payload is inconsistent with it.
class MalformedArchiveError : public Error {
public:
    using Error::Error;
};

class MalformedGridError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class DegenerateStatsError : public Error {
public:
    using Error::Error;
};

/// Model and archive/stats disagree on patch size, latent dim or channels.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class EmptyPlotError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class IntegrityError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

/// Rejection sampling ran out of attempts; reports how many patches were placed.
class SamplingExhaustedError : public Error {
public:
    SamplingExhaustedError(int placed, int requested)
        : Error("sampling exhausted: placed " + std::to_string(placed) + " of " +
                std::to_string(requested) + " requested patches"),
          placed(placed),
          requested(requested) {}
    int placed;
    int requested;
};

/// Training loss became non-finite; reports the offending epoch (1-based).
class DivergedError : public Error {
public:
    explicit DivergedError(int epoch)
        : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
          epoch(epoch) {}
    int epoch;
};

} // namespace vaec
