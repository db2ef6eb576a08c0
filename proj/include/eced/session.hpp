#pragma once

// Live elicitation sessions. The store is transport-agnostic; service.hpp
// binds it to HTTP.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <string>

#include "eced/gains.hpp"
#include "eced/policy.hpp"
#include "eced/scenarios.hpp"
#include "json.hpp"

namespace eced {

enum class ErrorCode { Validation, Conflict, NotFound };

std::string to_string(ErrorCode code);
int http_status(ErrorCode code);

class ServiceError : public std::runtime_error {
public:
    ServiceError(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

/// Scenario config plus "policy" (default eced), "delta" (default 0.01) and
/// "budget" (default min(m, 100)).
struct SessionConfig {
    nlohmann::json scenario;
    Objective policy = Objective::ECED;
    std::optional<double> delta;
    std::optional<std::size_t> budget;

    /// Throws ServiceError(Validation) on malformed input.
    static SessionConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

class Session {
public:
    Session(std::string id, const SessionConfig& config);

    const std::string& id() const { return id_; }
    const Instance& instance() const { return scenario_.instance; }
    const PolicyState& state() const { return state_; }
    const Decision& pending() const { return pending_; }
    const StoppingRule& rule() const { return rule_; }
    const SessionConfig& config() const { return config_; }

    nlohmann::json question() const;
    /// Throws ServiceError: Conflict for a stopped session or a test id other
    /// than the pending one, Validation for a bad outcome.
    nlohmann::json answer(const std::string& test_id, std::size_t outcome);
    nlohmann::json posterior(std::size_t top_k = 5) const;
    nlohmann::json snapshot() const;

    std::mutex& mutex() { return mutex_; }

private:
    void decide();

    std::string id_;
    SessionConfig config_;
    Scenario scenario_;
    StoppingRule rule_;
    PolicyState state_;
    Decision pending_;
    std::mt19937_64 rng_;
    std::string created_at_;
    std::mutex mutex_;
};

class SessionStore {
public:
    /// snapshot_dir empty disables persistence.
    explicit SessionStore(std::string snapshot_dir = {});

    std::string create(const nlohmann::json& config);
    nlohmann::json question(const std::string& id);
    nlohmann::json answer(const std::string& id, const nlohmann::json& body);
    nlohmann::json posterior(const std::string& id, std::size_t top_k = 5);
    std::size_t size() const;

    /// Replays every snapshot in the snapshot directory; returns the count.
    std::size_t restore();

private:
    std::shared_ptr<Session> find(const std::string& id) const;
    void persist(const Session& session) const;
    std::string fresh_id();

    std::string snapshot_dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t counter_ = 0;
    std::uint64_t salt_ = 0;
};

}  // namespace eced
