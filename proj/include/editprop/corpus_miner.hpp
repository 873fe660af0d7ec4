#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "editprop/edit_model.hpp"
#include "editprop/error.hpp"
#include "editprop/hashing.hpp"
#include "editprop/tokenizer.hpp"

namespace editprop {

struct CommitRecord {
    std::string commit_id;
    std::string message;
    std::vector<Hunk> hunks;
    std::vector<std::string> files_touched;
    ProjectSnapshot snapshot_before;
    // Files the diff touched but that carry no hunks (binary, rename).
    std::vector<std::string> skipped_files;
};

/// Distinct hunk paths in first-appearance order.
inline std::vector<std::string> touched_paths(const std::vector<Hunk>& hunks) {
    std::vector<std::string> out;
    for (const auto& h : hunks)
        if (std::find(out.begin(), out.end(), h.file_path) == out.end()) out.push_back(h.file_path);
    return out;
}

namespace reason {
inline constexpr const char* min_hunks = "min_hunks";
inline constexpr const char* hunk_size = "hunk_size";
inline constexpr const char* message = "message";
inline constexpr const char* generated = "generated_or_nonsource";
} // namespace reason

struct FilterConfig {
    std::size_t min_hunks = 3;
    std::size_t max_hunk_lines = 15; // exclusive
    std::size_t min_message_tokens = 6;
    double min_ascii_ratio = 0.9;
    std::vector<std::string> denied_extensions{".bak", ".log", ".pyc"};
    std::vector<std::string> generated_markers{"@generated", "auto-generated", "autogenerated", "do not edit"};
};

struct FilterDecision {
    bool kept = true;
    std::vector<std::string> reasons;
};

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline bool english_message(std::string_view msg, const FilterConfig& cfg) {
    if (msg.empty()) return false;
    std::size_t ascii = 0;
    for (unsigned char c : msg)
        if (c < 0x80) ++ascii;
    if (static_cast<double>(ascii) < cfg.min_ascii_ratio * static_cast<double>(msg.size())) return false;
    std::size_t words = 0;
    bool alpha = false;
    for (const auto& t : tokenize(msg)) {
        if (!is_word_byte(static_cast<unsigned char>(t[0]))) continue;
        ++words;
        for (unsigned char c : t) alpha = alpha || std::isalpha(c);
    }
    return alpha && words >= cfg.min_message_tokens;
}

inline bool has_marker(std::span<const std::string> lines, const FilterConfig& cfg) {
    for (const auto& l : lines) {
        auto low = lower(l);
        for (const auto& m : cfg.generated_markers)
            if (low.find(m) != std::string::npos) return true;
    }
    return false;
}

} // namespace detail

/// Total: every commit gets a decision, with reasons in a fixed order.
inline FilterDecision filter_commit(const CommitRecord& c, const FilterConfig& cfg = {}) {
    FilterDecision d;
    if (c.hunks.size() < cfg.min_hunks) d.reasons.emplace_back(reason::min_hunks);
    if (std::any_of(c.hunks.begin(), c.hunks.end(),
                    [&](const Hunk& h) { return h.changed_lines() >= cfg.max_hunk_lines; }))
        d.reasons.emplace_back(reason::hunk_size);
    if (!detail::english_message(c.message, cfg)) d.reasons.emplace_back(reason::message);

    bool generated = !c.skipped_files.empty();
    for (const auto& path : c.files_touched) {
        for (const auto& ext : cfg.denied_extensions) generated = generated || detail::ends_with(path, ext);
        if (const Lines* f = c.snapshot_before.find(path)) generated = generated || detail::has_marker(*f, cfg);
    }
    for (const auto& h : c.hunks) generated = generated || detail::has_marker(h.after_lines, cfg);
    if (generated) d.reasons.emplace_back(reason::generated);
    d.kept = d.reasons.empty();
    return d;
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

enum class Task { FileLoc, LineLoc, Gen };

inline const char* to_string(Task t) {
    switch (t) {
    case Task::FileLoc: return "file_loc";
    case Task::LineLoc: return "line_loc";
    case Task::Gen: return "gen";
    }
    return "gen";
}

inline Task task_from_string(std::string_view s) {
    if (s == "file_loc") return Task::FileLoc;
    if (s == "line_loc") return Task::LineLoc;
    if (s == "gen") return Task::Gen;
    throw Error(ErrorCode::ConfigError, "unknown task '" + std::string(s) + "'");
}

enum class Split { Train, Valid, Test };

inline const char* to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
    }
    return "train";
}

inline Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "valid") return Split::Valid;
    if (s == "test") return Split::Test;
    throw Error(ErrorCode::ConfigError, "unknown split '" + std::string(s) + "'");
}

struct SplitRatios {
    double train = 0.7;
    double valid = 0.1;
    double test = 0.2;
};

/// Pure function of the commit id, so one commit never straddles splits.
inline Split split_for(std::string_view commit_id, const SplitRatios& r = {}) {
    const double total = r.train + r.valid + r.test;
    if (!(r.train >= 0 && r.valid >= 0 && r.test >= 0 && total > 0))
        throw Error(ErrorCode::ConfigError, "split ratios must be non-negative with a positive sum");
    const double u = static_cast<double>(fnv1a64(commit_id) % 1'000'000) / 1'000'000.0;
    if (u < r.train / total) return Split::Train;
    if (u < (r.train + r.valid) / total) return Split::Valid;
    return Split::Test;
}

/// One target hunk of a commit with the other hunks as priors. Before-commit
/// contents of the touched files (and, for file location, of the negatives)
/// travel with the sample so evaluation needs no repository access.
struct Sample {
    Task task = Task::Gen;
    std::string commit_id;
    int sample_index = 0;
    Split split = Split::Train;
    Prompt prompt;
    Hunk target_hunk;
    std::vector<Hunk> prior_hunks;
    std::vector<std::string> negatives;
    std::map<std::string, Lines> files;
};

inline void to_json(json& j, const Sample& s) {
    j = json{{"v", 1},
             {"task", to_string(s.task)},
             {"commit_id", s.commit_id},
             {"sample_index", s.sample_index},
             {"split", to_string(s.split)},
             {"prompt", s.prompt.text},
             {"target_hunk", s.target_hunk},
             {"prior_hunks", s.prior_hunks},
             {"negatives", s.negatives},
             {"files", s.files}};
}

inline void from_json(const json& j, Sample& s) {
    if (j.value("v", 0) != 1) throw Error(ErrorCode::ConfigError, "unsupported sample schema version");
    s.task = task_from_string(j.at("task").get<std::string>());
    s.commit_id = j.at("commit_id").get<std::string>();
    s.sample_index = j.at("sample_index").get<int>();
    s.split = split_from_string(j.at("split").get<std::string>());
    s.prompt.text = j.value("prompt", std::string{});
    s.target_hunk = j.at("target_hunk").get<Hunk>();
    s.prior_hunks = j.value("prior_hunks", std::vector<Hunk>{});
    s.negatives = j.value("negatives", std::vector<std::string>{});
    s.files = j.value("files", std::map<std::string, Lines>{});
}

struct SampleConfig {
    std::size_t negatives = 10;
    std::uint64_t seed = 42;
    SplitRatios split;
};

/// Exactly one sample per hunk. File-location samples draw `negatives`
/// untouched files without replacement from an rng keyed on (seed, commit, index).
inline std::vector<Sample> build_samples(const CommitRecord& c, Task task, const SampleConfig& cfg) {
    std::vector<Sample> out;
    std::vector<std::string> pool;
    if (task == Task::FileLoc) {
        for (const auto& [path, _] : c.snapshot_before.files)
            if (std::find(c.files_touched.begin(), c.files_touched.end(), path) == c.files_touched.end())
                pool.push_back(path);
        if (pool.size() < cfg.negatives) throw InsufficientNegatives(cfg.negatives, pool.size());
    }
    const Split split = split_for(c.commit_id, cfg.split);
    for (std::size_t i = 0; i < c.hunks.size(); ++i) {
        Sample s;
        s.task = task;
        s.commit_id = c.commit_id;
        s.sample_index = static_cast<int>(i);
        s.split = split;
        s.prompt.text = c.message;
        s.target_hunk = c.hunks[i];
        for (std::size_t j = 0; j < c.hunks.size(); ++j)
            if (j != i) s.prior_hunks.push_back(c.hunks[j]);
        for (const auto& path : c.files_touched) {
            const Lines* f = c.snapshot_before.find(path);
            s.files[path] = f ? *f : Lines{};
        }
        if (task == Task::FileLoc) {
            std::mt19937_64 rng(cfg.seed ^ fnv1a64(c.commit_id + "#" + std::to_string(i)));
            for (auto idx : sample_without_replacement(rng, pool.size(), cfg.negatives)) {
                s.negatives.push_back(pool[idx]);
                s.files[pool[idx]] = c.snapshot_before.files.at(pool[idx]);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commit sources
// ---------------------------------------------------------------------------

namespace detail {

struct CommandResult {
    int status = -1;
    std::string out;
};

/// Runs argv without a shell; stdout captured, stderr discarded.
inline CommandResult run_command(const std::vector<std::string>& argv) {
    int pipefd[2];
    if (::pipe2(pipefd, O_CLOEXEC) != 0) throw Error(ErrorCode::BackendUnavailable, "pipe failed");
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::BackendUnavailable, "fork failed");
    if (pid == 0) {
        ::dup2(pipefd[1], STDOUT_FILENO);
        int devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(pipefd[1]);
    CommandResult r;
    char buf[65536];
    for (;;) {
        ssize_t n = ::read(pipefd[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        r.out.append(buf, static_cast<std::size_t>(n));
    }
    ::close(pipefd[0]);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

inline std::string git(const std::string& repo, std::vector<std::string> args) {
    std::vector<std::string> argv{"git", "-C", repo};
    argv.insert(argv.end(), args.begin(), args.end());
    auto r = run_command(argv);
    if (r.status != 0) {
        std::string cmd;
        for (const auto& a : args) cmd += " " + a;
        throw Error(ErrorCode::BackendUnavailable, "git" + cmd + " failed with status " + std::to_string(r.status));
    }
    return r.out;
}

inline bool looks_binary(std::string_view content) { return content.find('\0') != std::string_view::npos; }

inline std::string trim_message(std::string msg) {
    while (!msg.empty() && (msg.back() == '\n' || msg.back() == '\r' || msg.back() == ' ')) msg.pop_back();
    return msg;
}

inline void fill_record(CommitRecord& c, const std::vector<DiffFile>& diff) {
    for (const auto& f : diff) {
        if (f.skipped) {
            c.skipped_files.push_back(f.path);
            continue;
        }
        c.hunks.insert(c.hunks.end(), f.hunks.begin(), f.hunks.end());
    }
    c.files_touched = touched_paths(c.hunks);
}

} // namespace detail

/// Reads commits from git history, oldest first, skipping merges.
class GitCommitSource {
public:
    explicit GitCommitSource(std::string repo) : repo_(std::move(repo)) {}

    std::vector<std::string> commit_ids() const {
        std::vector<std::string> out;
        std::istringstream in(detail::git(repo_, {"rev-list", "--reverse", "--no-merges", "HEAD"}));
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) out.push_back(line);
        return out;
    }

    /// Message, hunks and the before-state of touched files only.
    CommitRecord load(const std::string& id) const {
        CommitRecord c;
        c.commit_id = id;
        c.message = detail::trim_message(detail::git(repo_, {"log", "-1", "--format=%B", id}));
        auto diff = parse_unified_diff(detail::git(repo_, {"show", "--format=", "-U0", "--no-color", "-M", id}));
        detail::fill_record(c, diff);
        c.snapshot_before.root_id = parent_of(id);
        for (const auto& path : c.files_touched) add_file(c.snapshot_before, path);
        return c;
    }

    /// Full before-commit snapshot, needed for negatives.
    void load_snapshot(CommitRecord& c) const {
        const auto& parent = c.snapshot_before.root_id;
        if (parent.empty()) return;
        std::istringstream in(detail::git(repo_, {"ls-tree", "-r", "--name-only", parent}));
        for (std::string path; std::getline(in, path);)
            if (!path.empty() && !c.snapshot_before.find(path)) add_file(c.snapshot_before, path);
    }

private:
    std::string parent_of(const std::string& id) const {
        std::istringstream in(detail::git(repo_, {"rev-list", "--parents", "-n", "1", id}));
        std::string self, parent;
        in >> self >> parent;
        return parent;
    }

    // root_id holds the parent commit; a root commit has an empty before-state
    void add_file(ProjectSnapshot& snap, const std::string& path) const {
        if (snap.root_id.empty()) return;
        auto r = detail::run_command({"git", "-C", repo_, "show", snap.root_id + ":" + path});
        if (r.status != 0 || detail::looks_binary(r.out)) return;
        snap.add_file(path, split_lines(r.out));
    }

    std::string repo_;
};

/// Reads `*.json` commit files from a directory, in file-name order. Each
/// file: {"commit_id", "message", "diff": unified diff, "files": {path: text}}
/// where "files" is the before-commit project.
class JsonCommitSource {
public:
    explicit JsonCommitSource(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!std::filesystem::is_directory(dir_))
            throw Error(ErrorCode::NotFound, "commit directory '" + dir_.string() + "' not found");
        for (const auto& e : std::filesystem::directory_iterator(dir_))
            if (e.path().extension() == ".json") files_.push_back(e.path());
        std::sort(files_.begin(), files_.end());
    }

    std::size_t size() const { return files_.size(); }

    CommitRecord load(std::size_t i) const {
        std::ifstream in(files_.at(i));
        json j = json::parse(in);
        CommitRecord c;
        c.commit_id = j.at("commit_id").get<std::string>();
        c.message = j.value("message", std::string{});
        detail::fill_record(c, parse_unified_diff(j.value("diff", std::string{})));
        if (j.contains("files"))
            for (const auto& [path, text] : j["files"].items()) c.snapshot_before.add_file(path, split_lines(text.get<std::string>()));
        return c;
    }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> files_;
};

// ---------------------------------------------------------------------------
// Mining pipeline
// ---------------------------------------------------------------------------

struct MineConfig {
    std::vector<Task> tasks{Task::FileLoc, Task::LineLoc, Task::Gen};
    FilterConfig filter;
    SampleConfig samples;
    unsigned workers = 0; // 0: hardware concurrency
};

struct MineSummary {
    std::size_t commits = 0;
    std::size_t kept = 0;
    std::size_t kept_hunks = 0;
    std::map<std::string, std::size_t> rejections; // reason -> commits
    std::map<std::string, std::size_t> samples;    // task -> samples written
    std::map<std::string, std::size_t> errors;     // error code -> commits (or commit-task pairs)
};

inline void to_json(json& j, const MineSummary& s) {
    j = json{{"v", 1},
             {"commits", s.commits},
             {"kept", s.kept},
             {"kept_hunks", s.kept_hunks},
             {"rejections", s.rejections},
             {"samples", s.samples},
             {"errors", s.errors}};
}

namespace detail {

struct CommitOutput {
    std::string filter_line;
    std::map<Task, std::string> lines;
    std::map<Task, std::size_t> counts;
    FilterDecision decision;
    std::size_t hunks = 0;
    std::vector<std::string> errors;
};

template <class Load>
CommitOutput process_commit(Load&& load, const MineConfig& cfg) {
    CommitOutput out;
    std::string id;
    try {
        CommitRecord c = load(false);
        id = c.commit_id;
        out.decision = filter_commit(c, cfg.filter);
        out.hunks = c.hunks.size();
        if (out.decision.kept) {
            if (std::find(cfg.tasks.begin(), cfg.tasks.end(), Task::FileLoc) != cfg.tasks.end()) c = load(true);
            for (Task t : cfg.tasks) {
                try {
                    for (const auto& s : build_samples(c, t, cfg.samples)) {
                        out.lines[t] += json(s).dump() + "\n";
                        ++out.counts[t];
                    }
                } catch (const Error& e) {
                    out.errors.emplace_back(editprop::to_string(e.code()));
                }
            }
        }
    } catch (const Error& e) {
        out.decision = {false, {editprop::to_string(e.code())}};
        out.errors.emplace_back(editprop::to_string(e.code()));
    }
    out.filter_line = json{{"v", 1}, {"commit_id", id}, {"kept", out.decision.kept}, {"reasons", out.decision.reasons}}.dump() + "\n";
    return out;
}

} // namespace detail

/// Filters and expands every commit, writing `<task>.jsonl` per task plus
/// `filter.jsonl` and `summary.json` into `out_dir`. Commits are processed
/// by a worker pool; output order is commit order regardless of scheduling.
template <class LoadFn>
MineSummary mine_commits(std::size_t count, LoadFn&& load, const std::filesystem::path& out_dir, const MineConfig& cfg) {
    std::filesystem::create_directories(out_dir);
    std::vector<detail::CommitOutput> results(count);
    std::atomic<std::size_t> next{0};
    unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++)
                    results[i] = detail::process_commit([&](bool full) { return load(i, full); }, cfg);
            });
    }

    MineSummary summary;
    summary.commits = count;
    std::ofstream filter_out(out_dir / "filter.jsonl", std::ios::binary);
    std::map<Task, std::ofstream> task_out;
    for (Task t : cfg.tasks) task_out[t].open(out_dir / (std::string(to_string(t)) + ".jsonl"), std::ios::binary);
    for (auto& r : results) {
        filter_out << r.filter_line;
        if (r.decision.kept) {
            ++summary.kept;
            summary.kept_hunks += r.hunks;
        }
        for (const auto& reason_code : r.decision.reasons) ++summary.rejections[reason_code];
        for (const auto& e : r.errors) ++summary.errors[e];
        for (Task t : cfg.tasks) {
            task_out[t] << r.lines[t];
            summary.samples[to_string(t)] += r.counts[t];
        }
    }
    std::ofstream(out_dir / "summary.json", std::ios::binary) << json(summary).dump(2) << "\n";
    return summary;
}

inline MineSummary mine_git(const std::string& repo, const std::filesystem::path& out_dir, const MineConfig& cfg) {
    GitCommitSource src(repo);
    auto ids = src.commit_ids();
    return mine_commits(
        ids.size(),
        [&](std::size_t i, bool full) {
            auto c = src.load(ids[i]);
            if (full) src.load_snapshot(c);
            return c;
        },
        out_dir, cfg);
}

inline MineSummary mine_json_dir(const std::filesystem::path& dir, const std::filesystem::path& out_dir,
                                 const MineConfig& cfg) {
    JsonCommitSource src(dir);
    return mine_commits(
        src.size(), [&](std::size_t i, bool) { return src.load(i); }, out_dir, cfg);
}

/// Reads one JSONL sample file.
inline std::vector<Sample> read_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::NotFound, "cannot open '" + path.string() + "'");
    std::vector<Sample> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(json::parse(line).get<Sample>());
    return out;
}

} // namespace editprop
