#pragma once

#include <stdexcept>
#include <string>

namespace carm {

/// Base for every error the library throws. Callers that only need a message
/// can catch this; the derived types carry the structured part.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No lattice point of a section passed the validity filter.
class EmptyTable : public Error {
public:
    using Error::Error;
};

/// A workspace point fell outside the bounding box.
class OutOfBounds : public Error {
public:
    using Error::Error;
};

/// The target cube cannot be reached in the cubes graph.
class NoCubePath : public Error {
public:
    using Error::Error;
};

/// The start configuration is off-grid, invalid, or collides with an obstacle.
class InvalidStart : public Error {
public:
    using Error::Error;
};

/// Query is malformed in a way not covered by InvalidStart (target outside
/// the box, target config off-grid, ...).
class InvalidQuery : public Error {
public:
    using Error::Error;
};

/// An explicit graph would exceed the test-scale vertex cap.
class TooLarge : public Error {
public:
    using Error::Error;
};

enum class CacheErrorKind { io, bad_magic, version_mismatch, truncated, corrupt };

class CacheError : public Error {
public:
    CacheError(CacheErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    CacheErrorKind kind() const noexcept { return kind_; }

private:
    CacheErrorKind kind_;
};

/// Scene text does not match the schema; `path` names the offending field
/// (for example `query.start[1]`).
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Scene parsed but violates a domain invariant; `rule` is the rule text,
/// for example "radius > 0".
class InvariantError : public Error {
public:
    InvariantError(std::string path, std::string rule)
        : Error(path + ": violates " + rule), path_(std::move(path)), rule_(std::move(rule)) {}
    const std::string& path() const noexcept { return path_; }
    const std::string& rule() const noexcept { return rule_; }

private:
    std::string path_;
    std::string rule_;
};

}  // namespace carm
