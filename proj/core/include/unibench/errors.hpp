#pragma once

#include <stdexcept>
#include <string>

namespace unibench {

// Invalid user-supplied configuration (flags, config files, plans).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A structured file did not match its documented schema.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Arithmetic precondition violated (non-positive denominators and the like).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

} // namespace unibench
