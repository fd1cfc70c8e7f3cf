#pragma once

#include <stdexcept>
#include <string>

namespace cutwalk {

// Invalid family grammar, malformed table file, bad parameter.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Arguments outside an operation's domain (b not in [a, c], L < 1, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A numeric procedure could not meet its requested tolerance.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The chain is recurrent, so D is infinite and nothing can be censored.
class RecurrentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Empty census or empty sample.
class NoDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cutwalk
