#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "editprop/edit_generator.hpp"
#include "editprop/edit_model.hpp"
#include "editprop/error.hpp"
#include "editprop/line_locator.hpp"
#include "editprop/relevance.hpp"

namespace editprop {

struct SessionConfig {
    ScoringConfig scoring;
    LocatorConfig locator;
    int context_lines = 3;
    std::size_t generator_budget = 4096;

    void validate() const {
        scoring.validate();
        if (context_lines < 0) throw Error(ErrorCode::ConfigError, "context_lines must be >= 0");
        if (locator.window_size < 1 || locator.stride < 1 || locator.stride > locator.window_size)
            throw Error(ErrorCode::ConfigError, "window needs s >= 1 and 1 <= stride <= s");
    }
};

inline void to_json(json& j, const SessionConfig& c) {
    j = json{{"scoring", c.scoring},
             {"window_size", c.locator.window_size},
             {"stride", c.locator.stride},
             {"theta_replace", c.locator.theta_replace},
             {"theta_insert", c.locator.theta_insert},
             {"token_budget", c.locator.token_budget},
             {"context_lines", c.context_lines},
             {"generator_budget", c.generator_budget}};
}

inline void from_json(const json& j, SessionConfig& c) {
    SessionConfig d;
    c.scoring = j.contains("scoring") ? j.at("scoring").get<ScoringConfig>() : d.scoring;
    c.locator.window_size = j.value("window_size", d.locator.window_size);
    c.locator.stride = j.value("stride", d.locator.stride);
    c.locator.theta_replace = j.value("theta_replace", d.locator.theta_replace);
    c.locator.theta_insert = j.value("theta_insert", d.locator.theta_insert);
    c.locator.token_budget = j.value("token_budget", d.locator.token_budget);
    c.context_lines = j.value("context_lines", d.context_lines);
    c.generator_budget = j.value("generator_budget", d.generator_budget);
    c.validate();
}

/// Scorers, labeller and generator shared by every session.
struct EngineBackends {
    ScoringBackends scoring;
    std::shared_ptr<LineLabeler> labeler;
    std::shared_ptr<EditGenerator> generator;

    static EngineBackends lexical(const LocatorConfig& cfg = {}) {
        return {ScoringBackends::lexical(), std::make_shared<HeuristicLineLabeler>(cfg),
                std::make_shared<PatternTransferGenerator>()};
    }
};

struct ReportLine {
    int line = 0;
    EditType edit_type = EditType::Keep;
    double confidence = 0.0;
};

struct ReportFile {
    std::string path;
    double score = 0.0;
    std::optional<std::string> error;
    std::vector<ReportLine> lines;
};

struct ReportRegion {
    std::string ref;
    HunkRegion region;
};

struct LocationReport {
    std::string session_id;
    int revision = 0;
    std::vector<ReportFile> files;
    std::vector<ReportRegion> regions;
};

inline void to_json(json& j, const LocationReport& r) {
    json files = json::array();
    for (const auto& f : r.files) {
        json lines = json::array();
        for (const auto& l : f.lines)
            lines.push_back({{"line", l.line}, {"edit_type", l.edit_type}, {"confidence", l.confidence}});
        json jf{{"path", f.path}, {"score", f.score}, {"lines", lines}};
        if (f.error) jf["error"] = *f.error;
        files.push_back(std::move(jf));
    }
    json regions = json::array();
    for (const auto& rr : r.regions) {
        const auto& g = rr.region;
        regions.push_back({{"ref", rr.ref},
                           {"path", g.file_path},
                           {"edit_type", g.edit_type},
                           {"start_line", g.start_line},
                           {"target_lines", g.target_lines},
                           {"context_before", g.context_before},
                           {"context_after", g.context_after}});
    }
    j = json{{"v", 1}, {"session_id", r.session_id}, {"revision", r.revision}, {"files", files}, {"regions", regions}};
}

struct CandidateList {
    std::string session_id;
    int revision = 0;
    std::string ref;
    std::vector<EditCandidate> candidates;
    std::string message;
};

inline void to_json(json& j, const CandidateList& c) {
    j = json{{"v", 1},           {"session_id", c.session_id}, {"revision", c.revision},
             {"ref", c.ref},     {"candidates", c.candidates}};
    if (!c.message.empty()) j["message"] = c.message;
}

struct Feedback {
    bool accepted = false;
    Lines content; // for accepted; may differ from every candidate
};

struct RegionRef {
    int revision = 0;
    std::size_t index = 0;
};

inline std::string format_ref(int revision, std::size_t index) {
    return std::to_string(revision) + "-" + std::to_string(index);
}

inline RegionRef parse_ref(std::string_view ref) {
    auto dash = ref.find('-');
    RegionRef r;
    if (dash == std::string_view::npos || !detail::parse_int(ref.substr(0, dash), r.revision))
        throw Error(ErrorCode::NotFound, "malformed region ref '" + std::string(ref) + "'");
    int idx = 0;
    if (!detail::parse_int(ref.substr(dash + 1), idx) || idx < 0)
        throw Error(ErrorCode::NotFound, "malformed region ref '" + std::string(ref) + "'");
    r.index = static_cast<std::size_t>(idx);
    return r;
}

/// One interactive session. Not synchronised; SessionManager serialises
/// writers and guards the report cache.
class EditSession {
public:
    EditSession(std::string id, ProjectSnapshot snapshot, SessionConfig cfg, EngineBackends backends)
        : id_(std::move(id)), initial_(snapshot), snapshot_(std::move(snapshot)), cfg_(std::move(cfg)),
          backends_(std::move(backends)) {
        cfg_.validate();
        for (const auto& [path, lines] : snapshot_.files) coverage_[path].assign(lines.size(), false);
    }

    const std::string& id() const { return id_; }
    int revision() const { return revision_; }
    const ProjectSnapshot& snapshot() const { return snapshot_; }
    const ProjectSnapshot& initial_snapshot() const { return initial_; }
    const std::vector<Edit>& prior_edits() const { return edits_; }
    const Prompt& prompt() const { return prompt_; }
    const SessionConfig& config() const { return cfg_; }

    int record_edit(const Edit& e, const std::optional<Prompt>& prompt = std::nullopt) {
        e.validate();
        auto next = apply_edit(snapshot_, e); // StaleEdit leaves the session untouched
        const Lines* before = snapshot_.find(e.file_path);
        priors_.push_back(make_prior(e, before ? *before : Lines{}, cfg_.context_lines));
        update_coverage(e);
        snapshot_ = std::move(next);
        edits_.push_back(e);
        if (prompt) prompt_ = *prompt;
        ++revision_;
        ignored_.clear();
        report_.reset();
        return revision_;
    }

    LocationReport recommend_locations() {
        if (!report_) report_ = compute_report();
        LocationReport r = *report_;
        std::erase_if(r.regions, [&](const ReportRegion& rr) { return ignored_.count(rr.ref) > 0; });
        std::set<std::pair<std::string, int>> hidden;
        for (const auto& rr : report_->regions) {
            if (!ignored_.count(rr.ref)) continue;
            const auto& g = rr.region;
            if (g.edit_type == EditType::Insert)
                hidden.insert({g.file_path, g.start_line});
            else
                for (int l = g.start_line; l <= g.end_line(); ++l) hidden.insert({g.file_path, l});
        }
        for (auto& f : r.files)
            std::erase_if(f.lines, [&](const ReportLine& l) { return hidden.count({f.path, l.line}) > 0; });
        return r;
    }

    CandidateList recommend_edits(const std::string& ref, int k) {
        const HunkRegion& region = resolve(ref);
        CandidateList out{id_, revision_, ref, {}, {}};
        auto target = target_of(region);
        auto selected = select_prior_edits(edits_, target, cfg_.scoring, backends_.scoring);
        std::vector<PriorEdit> priors;
        for (const auto& s : selected) {
            PriorEdit p = priors_[s.index];
            p.relevance = s.relevance;
            priors.push_back(std::move(p));
        }
        if (priors.empty()) throw Error(ErrorCode::NoCandidate, "no prior edit is relevant to region " + ref);
        auto input = make_generator_input(region, prompt_, std::move(priors), cfg_.generator_budget);
        out.candidates = generate_candidates(input, *backends_.generator, k);
        if (out.candidates.empty()) throw Error(ErrorCode::NoCandidate, "no candidate for region " + ref);
        return out;
    }

    /// Returns the revision after the feedback and, for an acceptance, the
    /// edit that was recorded.
    std::pair<int, std::optional<Edit>> apply_feedback(const std::string& ref, const Feedback& fb) {
        const HunkRegion& region = resolve(ref);
        if (!fb.accepted) {
            ignored_.insert(ref);
            return {revision_, std::nullopt};
        }
        Edit e = edit_from_region(region, fb.content);
        record_edit(e);
        return {revision_, e};
    }

    void ignore(const std::string& ref) {
        resolve(ref);
        ignored_.insert(ref);
    }

    /// Lines of `path` already changed by prior edits, 1-based.
    std::vector<int> covered_lines(const std::string& path) const {
        std::vector<int> out;
        auto it = coverage_.find(path);
        if (it == coverage_.end()) return out;
        for (std::size_t i = 0; i < it->second.size(); ++i)
            if (it->second[i]) out.push_back(static_cast<int>(i) + 1);
        return out;
    }

private:
    const HunkRegion& resolve(const std::string& ref) {
        auto r = parse_ref(ref);
        if (r.revision != revision_)
            throw Error(ErrorCode::RevisionMismatch,
                        "region " + ref + " is from revision " + std::to_string(r.revision) + ", session is at " +
                            std::to_string(revision_));
        if (!report_) report_ = compute_report();
        if (r.index >= report_->regions.size()) throw Error(ErrorCode::NotFound, "no region " + ref);
        return report_->regions[r.index].region;
    }

    void update_coverage(const Edit& e) {
        auto& cov = coverage_[e.file_path];
        const auto at = static_cast<std::ptrdiff_t>(e.anchor_line - 1);
        if (e.edit_type == EditType::Replace)
            cov.erase(cov.begin() + at, cov.begin() + at + static_cast<std::ptrdiff_t>(e.before_code.size()));
        cov.insert(cov.begin() + at, e.after_code.size(), true);
    }

    LocationReport compute_report() const {
        if (edits_.empty()) throw Error(ErrorCode::PreconditionFailed, "no edit has been recorded yet");
        const Edit& last = edits_.back();
        LocationReport rep;
        rep.session_id = id_;
        rep.revision = revision_;

        std::vector<ReportFile> files;
        for (const auto& rf : locate_files(last, snapshot_, cfg_.scoring, backends_.scoring, prompt_))
            files.push_back({rf.path, rf.score, std::nullopt, {}});
        if (const Lines* edited = snapshot_.find(last.file_path)) {
            double s = file_propagation_score(last, last.file_path, *edited, cfg_.scoring, backends_.scoring, prompt_);
            files.push_back({last.file_path, s, std::nullopt, {}});
        }
        std::stable_sort(files.begin(), files.end(), [](const ReportFile& a, const ReportFile& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.path < b.path;
        });

        // Most recent prior first, as the relevance ordering would put ties.
        std::vector<PriorEdit> priors(priors_.rbegin(), priors_.rend());
        for (auto& f : files) {
            const Lines& content = snapshot_.at(f.path);
            std::vector<LinePrediction> labels;
            try {
                labels = label_file(f.path, content, prompt_, priors, *backends_.labeler, cfg_.locator);
            } catch (const Error& e) {
                f.error = std::string(to_string(e.code())) + ": " + e.what();
                continue;
            }
            auto cov = coverage_.find(f.path);
            for (auto& l : labels) {
                const auto idx = static_cast<std::size_t>(l.line_index - 1);
                bool covered = cov != coverage_.end() && idx < cov->second.size() && cov->second[idx];
                if (covered) {
                    l.predicted = EditType::Keep;
                    l.confidence = {1.0, 0.0, 0.0};
                }
                if (l.predicted != EditType::Keep)
                    f.lines.push_back({l.line_index, l.predicted, l.predicted_confidence()});
            }
            for (auto& g : group_regions(f.path, content, labels, cfg_.context_lines))
                rep.regions.push_back({format_ref(revision_, rep.regions.size()), std::move(g)});
        }
        rep.files = std::move(files);
        return rep;
    }

    std::string id_;
    ProjectSnapshot initial_;
    ProjectSnapshot snapshot_;
    SessionConfig cfg_;
    EngineBackends backends_;
    Prompt prompt_;
    std::vector<Edit> edits_;
    std::vector<PriorEdit> priors_; // context captured when each edit was applied
    std::map<std::string, std::vector<bool>> coverage_;
    int revision_ = 0;
    std::set<std::string> ignored_;
    std::optional<LocationReport> report_;
};

// ---------------------------------------------------------------------------
// Event log
// ---------------------------------------------------------------------------

/// Session events as JSONL records: create, edit, ignore. State is never
/// stored directly; it is rebuilt by replaying these records.
namespace events {

inline json create(const std::string& id, const ProjectSnapshot& snap, const SessionConfig& cfg) {
    return {{"v", 1}, {"type", "create"}, {"session_id", id}, {"snapshot", snap}, {"config", cfg}};
}

inline json edit(const Edit& e, const std::optional<Prompt>& prompt) {
    json j{{"v", 1}, {"type", "edit"}, {"edit", e}};
    if (prompt) j["prompt"] = prompt->text;
    return j;
}

inline json ignore(const std::string& ref) { return {{"v", 1}, {"type", "ignore"}, {"ref", ref}}; }

} // namespace events

/// Rebuilds a session from its event records.
inline std::unique_ptr<EditSession> replay_session(const std::vector<json>& log, const EngineBackends& backends) {
    if (log.empty() || log.front().value("type", "") != "create")
        throw Error(ErrorCode::PreconditionFailed, "event log must start with a create record");
    std::unique_ptr<EditSession> s;
    for (const auto& ev : log) {
        if (ev.value("v", 0) != 1) throw Error(ErrorCode::ConfigError, "unsupported event schema version");
        const auto type = ev.value("type", "");
        if (type == "create") {
            if (s) throw Error(ErrorCode::PreconditionFailed, "duplicate create record");
            s = std::make_unique<EditSession>(ev.at("session_id").get<std::string>(),
                                              ev.at("snapshot").get<ProjectSnapshot>(),
                                              ev.value("config", json::object()).get<SessionConfig>(), backends);
        } else if (type == "edit") {
            std::optional<Prompt> p;
            if (ev.contains("prompt")) p = Prompt{ev["prompt"].get<std::string>()};
            s->record_edit(ev.at("edit").get<Edit>(), p);
        } else if (type == "ignore") {
            s->ignore(ev.at("ref").get<std::string>());
        } else {
            throw Error(ErrorCode::ConfigError, "unknown event type '" + type + "'");
        }
    }
    return s;
}

inline std::vector<json> read_event_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::NotFound, "cannot open event log '" + path.string() + "'");
    std::vector<json> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

/// Ground-truth check: initial snapshot plus every prior edit, in order.
inline bool snapshot_consistent(const EditSession& s) {
    ProjectSnapshot snap = s.initial_snapshot();
    for (const auto& e : s.prior_edits()) snap = apply_edit(std::move(snap), e);
    return snap == s.snapshot();
}

// ---------------------------------------------------------------------------
// Manager
// ---------------------------------------------------------------------------

/// Owns sessions and their logs. Mutations of one session are serialised by
/// its own lock; different sessions never contend beyond the map lookup.
class SessionManager {
public:
    explicit SessionManager(EngineBackends backends, std::optional<std::filesystem::path> store = std::nullopt)
        : backends_(std::move(backends)), store_(std::move(store)) {
        if (store_) {
            std::filesystem::create_directories(*store_);
            std::vector<std::filesystem::path> logs;
            for (const auto& e : std::filesystem::directory_iterator(*store_))
                if (e.path().extension() == ".jsonl") logs.push_back(e.path());
            std::sort(logs.begin(), logs.end());
            for (const auto& p : logs) {
                auto s = replay_session(read_event_log(p), backends_);
                next_id_ = std::max(next_id_, id_number(s->id()) + 1);
                auto slot = std::make_shared<Slot>();
                slot->session = std::move(s);
                sessions_[slot->session->id()] = slot;
            }
        }
    }

    std::string create(ProjectSnapshot snapshot, SessionConfig cfg = {}) {
        cfg.validate();
        std::string id;
        {
            std::lock_guard lk(map_mu_);
            id = format_id(next_id_++);
        }
        auto slot = std::make_shared<Slot>();
        slot->session = std::make_unique<EditSession>(id, snapshot, cfg, backends_);
        append(id, events::create(id, snapshot, cfg));
        std::lock_guard lk(map_mu_);
        sessions_[id] = slot;
        return id;
    }

    int record_edit(const std::string& id, const Edit& e, const std::optional<Prompt>& prompt = std::nullopt) {
        auto slot = find(id);
        std::unique_lock lk(slot->mu);
        int rev = slot->session->record_edit(e, prompt);
        append(id, events::edit(e, prompt));
        return rev;
    }

    LocationReport recommend_locations(const std::string& id) {
        auto slot = find(id);
        std::shared_lock lk(slot->mu);
        std::lock_guard cache(slot->cache_mu);
        return slot->session->recommend_locations();
    }

    CandidateList recommend_edits(const std::string& id, const std::string& ref, int k) {
        auto slot = find(id);
        std::shared_lock lk(slot->mu);
        {
            // resolves and caches the report
            std::lock_guard cache(slot->cache_mu);
            slot->session->recommend_locations();
        }
        return slot->session->recommend_edits(ref, k);
    }

    int apply_feedback(const std::string& id, const std::string& ref, const Feedback& fb) {
        auto slot = find(id);
        std::unique_lock lk(slot->mu);
        auto [rev, edit] = slot->session->apply_feedback(ref, fb);
        append(id, edit ? events::edit(*edit, std::nullopt) : events::ignore(ref));
        return rev;
    }

    /// Runs `fn` on the session under its exclusive lock.
    void with_session(const std::string& id, const std::function<void(EditSession&)>& fn) {
        auto slot = find(id);
        std::unique_lock lk(slot->mu);
        fn(*slot->session);
    }

    std::size_t size() const {
        std::lock_guard lk(map_mu_);
        return sessions_.size();
    }

private:
    struct Slot {
        std::shared_mutex mu;
        std::mutex cache_mu;
        std::unique_ptr<EditSession> session;
    };

    static std::string format_id(std::uint64_t n) {
        std::string digits = std::to_string(n);
        if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
        return "s-" + digits;
    }

    static std::uint64_t id_number(const std::string& id) {
        int n = 0;
        if (id.size() > 2 && detail::parse_int(std::string_view(id).substr(2), n) && n >= 0)
            return static_cast<std::uint64_t>(n);
        return 0;
    }

    std::shared_ptr<Slot> find(const std::string& id) const {
        std::lock_guard lk(map_mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
        return it->second;
    }

    void append(const std::string& id, const json& ev) {
        if (!store_) return;
        std::ofstream out(*store_ / (id + ".jsonl"), std::ios::app | std::ios::binary);
        out << ev.dump() << "\n";
        out.flush();
        if (!out) throw Error(ErrorCode::BackendUnavailable, "cannot append to the event log of " + id);
    }

    EngineBackends backends_;
    std::optional<std::filesystem::path> store_;
    mutable std::mutex map_mu_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::uint64_t next_id_ = 1;
};

} // namespace editprop
