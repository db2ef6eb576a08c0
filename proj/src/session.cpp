#include "eced/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "eced/harness.hpp"

namespace eced {

namespace {

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xfU];
    return out;
}

Scenario build_or_reject(const nlohmann::json& scenario) {
    try {
        return build_scenario(scenario);
    } catch (const std::exception& e) {
        throw ServiceError(ErrorCode::Validation, e.what());
    }
}

}  // namespace

std::string to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Validation: return "validation";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::NotFound: return "not_found";
    }
    return "validation";
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::Validation: return 400;
        case ErrorCode::Conflict: return 409;
        case ErrorCode::NotFound: return 404;
    }
    return 400;
}

SessionConfig SessionConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ServiceError(ErrorCode::Validation, "session config must be a JSON object");
    SessionConfig cfg;
    cfg.scenario = nlohmann::json::object();
    for (const auto& [key, value] : j.items()) {
        if (key == "scenario" || key == "params" || key == "seed") {
            cfg.scenario[key] = value;
        } else if (key == "policy") {
            if (!value.is_string()) throw ServiceError(ErrorCode::Validation, "'policy' must be a string");
            const auto obj = parse_objective(value.get<std::string>());
            if (!obj) throw ServiceError(ErrorCode::Validation, "unknown policy '" + value.get<std::string>() + "'");
            cfg.policy = *obj;
        } else if (key == "delta") {
            if (!value.is_number()) throw ServiceError(ErrorCode::Validation, "'delta' must be a number");
            cfg.delta = value.get<double>();
        } else if (key == "budget") {
            if (!value.is_number_integer() || value.get<long long>() < 1) {
                throw ServiceError(ErrorCode::Validation, "'budget' must be a positive integer");
            }
            cfg.budget = value.get<std::size_t>();
        } else {
            throw ServiceError(ErrorCode::Validation, "unknown config key '" + key + "'");
        }
    }
    if (!cfg.scenario.contains("scenario")) throw ServiceError(ErrorCode::Validation, "config needs 'scenario'");
    return cfg;
}

nlohmann::json SessionConfig::to_json() const {
    nlohmann::json j = scenario;
    j["policy"] = eced::to_string(policy);
    if (delta) j["delta"] = *delta;
    if (budget) j["budget"] = *budget;
    return j;
}

Session::Session(std::string id, const SessionConfig& config)
    : id_(std::move(id)),
      config_(config),
      scenario_(build_or_reject(config.scenario)),
      state_(scenario_.instance),
      rng_(trial_rng(config.scenario.value("seed", std::uint64_t{0}), 0, 1)),
      created_at_(utc_now()) {
    rule_.delta = config.delta.value_or(0.01);
    rule_.budget = config.budget.value_or(std::min<std::size_t>(scenario_.instance.num_tests(), 100));
    try {
        rule_.validate();
    } catch (const std::exception& e) {
        throw ServiceError(ErrorCode::Validation, e.what());
    }
    decide();
}

void Session::decide() { pending_ = next_test(config_.policy, scenario_.instance, state_, rule_, &rng_); }

nlohmann::json Session::question() const {
    const Instance& inst = scenario_.instance;
    nlohmann::json j{{"session", id_},
                     {"step", state_.num_performed()},
                     {"map_error", map_error(inst, state_.belief())}};
    if (pending_.stopped()) {
        j["status"] = "stopped";
        j["stop_reason"] = to_string(pending_.stop);
        j["predicted_target"] = inst.target_ids()[predict(inst, state_)];
    } else {
        const Test& test = inst.test(pending_.test);
        j["status"] = "active";
        j["test_id"] = test.id;
        j["arity"] = test.arity;
        j["rendering"] = scenario_.renderings.at(pending_.test);
    }
    return j;
}

nlohmann::json Session::answer(const std::string& test_id, std::size_t outcome) {
    const Instance& inst = scenario_.instance;
    if (pending_.stopped()) throw ServiceError(ErrorCode::Conflict, "session is stopped");
    const Test& test = inst.test(pending_.test);
    if (test_id != test.id) {
        throw ServiceError(ErrorCode::Conflict, "test '" + test_id + "' is not the pending question");
    }
    if (outcome >= test.arity) {
        throw ServiceError(ErrorCode::Validation, "outcome " + std::to_string(outcome) + " out of range for arity " +
                                                      std::to_string(test.arity));
    }
    try {
        state_ = state_.advance(inst, pending_.test, outcome);
    } catch (const InconsistentObservation& e) {
        throw ServiceError(ErrorCode::Validation, e.what());
    }
    decide();
    return {{"question", question()}, {"posterior", posterior()}};
}

nlohmann::json Session::posterior(std::size_t top_k) const {
    const Instance& inst = scenario_.instance;
    const auto& post = state_.belief().posterior;
    const auto marginal = target_marginal(inst, state_.belief());
    nlohmann::json targets = nlohmann::json::array();
    for (std::size_t y = 0; y < marginal.size(); ++y) {
        targets.push_back({{"id", inst.target_ids()[y]}, {"prob", marginal[y]}});
    }
    std::vector<std::size_t> order(post.size());
    std::iota(order.begin(), order.end(), 0);
    top_k = std::min(top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_k), order.end(),
                      [&](std::size_t a, std::size_t b) { return post[a] > post[b] || (post[a] == post[b] && a < b); });
    nlohmann::json top = nlohmann::json::array();
    for (std::size_t i = 0; i < top_k; ++i) {
        top.push_back({{"id", inst.root_cause_ids()[order[i]]},
                       {"target", inst.target_ids()[inst.target_of(order[i])]},
                       {"prob", post[order[i]]}});
    }
    return {{"session", id_},
            {"step", state_.num_performed()},
            {"map_error", map_error(marginal)},
            {"targets", targets},
            {"top_root_causes", top}};
}

nlohmann::json Session::snapshot() const {
    nlohmann::json answers = nlohmann::json::array();
    for (const Step& s : state_.steps()) {
        answers.push_back({{"test_id", scenario_.instance.test(s.test).id}, {"outcome", s.outcome}});
    }
    return {{"id", id_},
            {"created_at", created_at_},
            {"config", config_.to_json()},
            {"answers", answers},
            {"status", pending_.stopped() ? "stopped" : "active"}};
}

SessionStore::SessionStore(std::string snapshot_dir) : snapshot_dir_(std::move(snapshot_dir)) {
    std::random_device rd;
    salt_ = (std::uint64_t{rd()} << 32) ^ rd();
    if (!snapshot_dir_.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(snapshot_dir_, ec);
        if (ec) throw std::runtime_error("cannot create snapshot dir '" + snapshot_dir_ + "': " + ec.message());
    }
}

std::string SessionStore::fresh_id() {
    std::uint64_t x = salt_ + 0x9e3779b97f4a7c15ULL * ++counter_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return hex64(x ^ (x >> 31));
}

std::string SessionStore::create(const nlohmann::json& config) {
    const SessionConfig cfg = SessionConfig::from_json(config);
    std::string id;
    {
        std::unique_lock lock(mutex_);
        do {
            id = fresh_id();
        } while (sessions_.count(id));
    }
    auto session = std::make_shared<Session>(id, cfg);  // built outside the store lock
    {
        std::unique_lock lock(mutex_);
        sessions_.emplace(id, session);
    }
    std::lock_guard guard(session->mutex());
    persist(*session);
    return id;
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(ErrorCode::NotFound, "unknown session '" + id + "'");
    return it->second;
}

nlohmann::json SessionStore::question(const std::string& id) {
    auto s = find(id);
    std::lock_guard guard(s->mutex());
    return s->question();
}

nlohmann::json SessionStore::answer(const std::string& id, const nlohmann::json& body) {
    auto s = find(id);
    if (!body.is_object() || !body.contains("test_id") || !body["test_id"].is_string()) {
        throw ServiceError(ErrorCode::Validation, "answer needs a string 'test_id'");
    }
    if (!body.contains("outcome") || !body["outcome"].is_number_integer() || body["outcome"].get<long long>() < 0) {
        throw ServiceError(ErrorCode::Validation, "answer needs a nonnegative integer 'outcome'");
    }
    std::lock_guard guard(s->mutex());
    auto result = s->answer(body["test_id"].get<std::string>(), body["outcome"].get<std::size_t>());
    persist(*s);
    return result;
}

nlohmann::json SessionStore::posterior(const std::string& id, std::size_t top_k) {
    auto s = find(id);
    std::lock_guard guard(s->mutex());
    return s->posterior(top_k);
}

std::size_t SessionStore::size() const {
    std::shared_lock lock(mutex_);
    return sessions_.size();
}

void SessionStore::persist(const Session& session) const {
    if (snapshot_dir_.empty()) return;
    const auto path = std::filesystem::path(snapshot_dir_) / (session.id() + ".json");
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << session.snapshot().dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write snapshot '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::size_t SessionStore::restore() {
    if (snapshot_dir_.empty()) return 0;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(snapshot_dir_)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::size_t restored = 0;
    for (const auto& path : files) {
        std::ifstream in(path);
        const auto snap = nlohmann::json::parse(in);
        const std::string id = snap.at("id").get<std::string>();
        auto session = std::make_shared<Session>(id, SessionConfig::from_json(snap.at("config")));
        for (const auto& a : snap.at("answers")) {
            session->answer(a.at("test_id").get<std::string>(), a.at("outcome").get<std::size_t>());
        }
        std::unique_lock lock(mutex_);
        sessions_[id] = session;
        ++restored;
    }
    return restored;
}

}  // namespace eced
