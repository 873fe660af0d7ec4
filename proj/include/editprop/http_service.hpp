#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "editprop/error.hpp"
#include "editprop/session.hpp"

namespace editprop {

inline int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::StaleEdit:
    case ErrorCode::RevisionMismatch: return 409;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::PreconditionFailed: return 412;
    case ErrorCode::BackendUnavailable: return 503;
    case ErrorCode::WindowTooLarge:
    case ErrorCode::RegionTooLarge: return 413;
    default: return 400;
    }
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, {{"v", 1}, {"error", {{"code", code}, {"message", message}}}});
}

inline json parse_body(const httplib::Request& req) {
    json body = req.body.empty() ? json::object() : json::parse(req.body);
    if (!body.is_object()) throw Error(ErrorCode::InvalidEdit, "request body must be a JSON object");
    if (body.contains("v") && body["v"] != 1) throw Error(ErrorCode::ConfigError, "unsupported request schema version");
    return body;
}

/// Runs a handler, turning library errors into their status codes.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, "BadRequest", e.what());
    }
}

} // namespace detail

/// Registers the session API on `server`. The manager must outlive it.
///   POST /sessions                                   {"snapshot", "config"?} -> {"session_id", "revision"}
///   POST /sessions/{id}/events                       {"edit", "prompt"?}     -> {"revision"}
///   GET  /sessions/{id}/locations                                             -> LocationReport
///   POST /sessions/{id}/regions/{ref}/candidates?k=N                          -> {"candidates", "message"?}
///   POST /sessions/{id}/regions/{ref}/feedback       {"outcome", "content"?}  -> {"revision"}
///   GET  /healthz
inline void register_routes(httplib::Server& server, SessionManager& sessions) {
    using detail::guarded;
    using detail::send_json;

    server.Get("/healthz", [&sessions](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"v", 1}, {"status", "ok"}, {"sessions", sessions.size()}});
    });

    server.Post("/sessions", [&sessions](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = detail::parse_body(req);
            auto snap = body.value("snapshot", json{{"files", json::object()}}).get<ProjectSnapshot>();
            SessionConfig cfg = body.contains("config") ? body["config"].get<SessionConfig>() : SessionConfig{};
            auto id = sessions.create(std::move(snap), cfg);
            send_json(res, 201, {{"v", 1}, {"session_id", id}, {"revision", 0}});
        });
    });

    server.Post(R"(/sessions/([^/]+)/events)", [&sessions](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = detail::parse_body(req);
            std::optional<Prompt> prompt;
            if (body.contains("prompt")) prompt = Prompt{body["prompt"].get<std::string>()};
            int rev = sessions.record_edit(req.matches[1].str(), body.at("edit").get<Edit>(), prompt);
            send_json(res, 200, {{"v", 1}, {"session_id", req.matches[1].str()}, {"revision", rev}});
        });
    });

    server.Get(R"(/sessions/([^/]+)/locations)", [&sessions](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, sessions.recommend_locations(req.matches[1].str())); });
    });

    server.Post(R"(/sessions/([^/]+)/regions/([^/]+)/candidates)",
                [&sessions](const httplib::Request& req, httplib::Response& res) {
                    guarded(res, [&] {
                        int k = 1;
                        if (req.has_param("k") && (!detail::parse_int(req.get_param_value("k"), k) || k < 1))
                            throw Error(ErrorCode::ConfigError, "k must be a positive integer");
                        const std::string id = req.matches[1].str(), ref = req.matches[2].str();
                        try {
                            send_json(res, 200, sessions.recommend_edits(id, ref, k));
                        } catch (const Error& e) {
                            if (e.code() != ErrorCode::NoCandidate) throw;
                            int rev = 0;
                            sessions.with_session(id, [&](EditSession& s) { rev = s.revision(); });
                            send_json(res, 200, CandidateList{id, rev, ref, {}, "no suggestion"});
                        }
                    });
                });

    server.Post(R"(/sessions/([^/]+)/regions/([^/]+)/feedback)",
                [&sessions](const httplib::Request& req, httplib::Response& res) {
                    guarded(res, [&] {
                        auto body = detail::parse_body(req);
                        const auto outcome = body.at("outcome").get<std::string>();
                        Feedback fb;
                        if (outcome == "accepted") {
                            fb.accepted = true;
                            fb.content = body.at("content").get<Lines>();
                        } else if (outcome != "ignored") {
                            throw Error(ErrorCode::InvalidEdit, "outcome must be 'accepted' or 'ignored'");
                        }
                        int rev = sessions.apply_feedback(req.matches[1].str(), req.matches[2].str(), fb);
                        send_json(res, 200, {{"v", 1}, {"session_id", req.matches[1].str()}, {"revision", rev}});
                    });
                });
}

} // namespace editprop
