#pragma once
#include <stdexcept>
#include <string>

namespace rulestream {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rule text does not have the required "If ..., then ..." shape.
struct ShapeError : Error {
    using Error::Error;
};

// A rule with the same normalized text already exists in the collection.
struct DuplicateRuleError : Error {
    DuplicateRuleError(const std::string& msg, int existing)
        : Error(msg), existing_id(existing) {}
    int existing_id;
};

struct NotFoundError : Error {
    using Error::Error;
};

// A renderer was asked for a placeholder the sample does not carry.
struct TemplateError : Error {
    using Error::Error;
};

// Backend failure: exhausted retries, bad response shape, unreachable host.
struct GatewayError : Error {
    using Error::Error;
};

// Strict scripted backend received a request it has no mapping for.
struct UnscriptedRequestError : GatewayError {
    using GatewayError::GatewayError;
};

// Dataset / snapshot / config file could not be loaded or failed validation.
struct LoadError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace rulestream
