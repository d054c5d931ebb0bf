#pragma once

#include <stdexcept>
#include <string>

namespace securekl {

// ===== error hierarchy =====
//
// Every condition the engine can reject is a distinct type so callers (and
// the CLI exit-code mapping) can dispatch on it instead of parsing strings.

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- numeric / encoding ---

/// Value falls outside the representable fixed-point range.
class OverflowError : public Error {
public:
    explicit OverflowError(const std::string& msg) : Error(msg) {}
};

// --- protocol engine ---

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

class SessionMismatch : public Error {
public:
    explicit SessionMismatch(const std::string& msg) : Error(msg) {}
};

/// A Beaver triple was consumed twice.
class TripleReuse : public Error {
public:
    explicit TripleReuse(const std::string& msg) : Error(msg) {}
};

/// The two parties disagree about what happens next (tensor ids, opcodes,
/// session headers). Always fatal.
class ProtocolDesync : public Error {
public:
    explicit ProtocolDesync(const std::string& msg) : Error(msg) {}
};

/// Socket / channel level failure (connect, short read, peer gone).
class TransportError : public Error {
public:
    explicit TransportError(const std::string& msg) : Error(msg) {}
};

// --- training ---

/// Training labels contain a single class.
class DegenerateLabels : public Error {
public:
    explicit DegenerateLabels(const std::string& msg) : Error(msg) {}
};

/// An opened training statistic is out of any plausible range (fixed-point
/// wrap / divergence sentinel; the ring has no NaN).
class NonFinite : public Error {
public:
    explicit NonFinite(const std::string& msg) : Error(msg) {}
};

class EmptySource : public Error {
public:
    explicit EmptySource(const std::string& msg) : Error(msg) {}
};

// --- divergence scoring ---

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

class SingularCovariance : public Error {
public:
    explicit SingularCovariance(const std::string& msg) : Error(msg) {}
};

class TooFewSamples : public Error {
public:
    explicit TooFewSamples(const std::string& msg) : Error(msg) {}
};

// --- acquisition strategies ---

class NotEnoughCandidates : public Error {
public:
    explicit NotEnoughCandidates(const std::string& msg) : Error(msg) {}
};

class MissingAttribute : public Error {
public:
    explicit MissingAttribute(const std::string& msg) : Error(msg) {}
};

class CategoryMismatch : public Error {
public:
    explicit CategoryMismatch(const std::string& msg) : Error(msg) {}
};

class IncompleteScores : public Error {
public:
    explicit IncompleteScores(const std::string& msg) : Error(msg) {}
};

// --- statistics ---

class SingleClass : public Error {
public:
    explicit SingleClass(const std::string& msg) : Error(msg) {}
};

class LengthMismatch : public Error {
public:
    explicit LengthMismatch(const std::string& msg) : Error(msg) {}
};

class TooShort : public Error {
public:
    explicit TooShort(const std::string& msg) : Error(msg) {}
};

class ZeroVariance : public Error {
public:
    explicit ZeroVariance(const std::string& msg) : Error(msg) {}
};

class MissingPairs : public Error {
public:
    explicit MissingPairs(const std::string& msg) : Error(msg) {}
};

// --- configuration / data files ---

class ConfigInvalid : public Error {
public:
    explicit ConfigInvalid(const std::string& msg) : Error(msg) {}
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& msg) : Error(msg) {}
};

} // namespace securekl
