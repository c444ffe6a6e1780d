#pragma once

#include <stdexcept>
#include <string>

namespace ctqa {

/// Input document does not match the expected schema.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structurally parseable input that violates table invariants.
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PromptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingSlotError : PromptError {
    explicit MissingSlotError(const std::string& slot_name)
        : PromptError("missing slot binding: " + slot_name), slot(slot_name) {}
    std::string slot;
};

struct ExtraSlotError : PromptError {
    explicit ExtraSlotError(const std::string& slot_name)
        : PromptError("binding does not match any slot: " + slot_name), slot(slot_name) {}
    std::string slot;
};

struct GatewayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContextLengthExceeded : GatewayError {
    using GatewayError::GatewayError;
};
struct RateLimited : GatewayError {
    using GatewayError::GatewayError;
};
struct NetworkError : GatewayError {
    using GatewayError::GatewayError;
};
struct StorageError : GatewayError {
    using GatewayError::GatewayError;
};

struct ReplayMiss : GatewayError {
    explicit ReplayMiss(const std::string& request_digest)
        : GatewayError("no recorded completion for digest " + request_digest),
          digest(request_digest) {}
    std::string digest;
};

struct MissingPairError : std::runtime_error {
    explicit MissingPairError(const std::string& qa_id)
        : std::runtime_error("no prediction for qa pair " + qa_id), qa_id(qa_id) {}
    std::string qa_id;
};

}  // namespace ctqa
