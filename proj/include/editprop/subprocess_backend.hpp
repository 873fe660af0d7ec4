#pragma once

#include <chrono>
#include <condition_variable>
#include <cerrno>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "editprop/edit_generator.hpp"
#include "editprop/error.hpp"
#include "editprop/line_locator.hpp"
#include "editprop/relevance.hpp"

namespace editprop {

struct BackendOptions {
    std::vector<std::string> argv; // program and arguments
    int timeout_ms = 5000;
    int max_in_flight = 1;
};

/// One child process speaking newline-delimited JSON on stdin/stdout.
/// Not thread-safe; BackendClient hands each process to one caller at a time.
class BackendProcess {
public:
    explicit BackendProcess(const std::vector<std::string>& argv) { spawn(argv); }
    BackendProcess(const BackendProcess&) = delete;
    BackendProcess& operator=(const BackendProcess&) = delete;
    ~BackendProcess() { shutdown(); }

    bool alive() const { return pid_ > 0; }

    json round_trip(const json& request, int timeout_ms) {
        if (!alive()) throw Error(ErrorCode::BackendUnavailable, "backend process is not running");
        std::string line = request.dump() + "\n";
        write_all(line);
        return json_or_throw(read_line(timeout_ms));
    }

    void shutdown() {
        if (in_ >= 0) ::close(in_);
        if (out_ >= 0) ::close(out_);
        in_ = out_ = -1;
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, nullptr, 0);
        }
        pid_ = -1;
    }

private:
    void spawn(const std::vector<std::string>& argv) {
        if (argv.empty()) throw Error(ErrorCode::ConfigError, "backend command is empty");
        int to_child[2], from_child[2];
        if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(ErrorCode::BackendUnavailable, "pipe failed");
        if (::pipe2(from_child, O_CLOEXEC) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw Error(ErrorCode::BackendUnavailable, "pipe failed");
        }
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        pid_t pid = ::fork();
        if (pid < 0) throw Error(ErrorCode::BackendUnavailable, "fork failed");
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::execvp(args[0], args.data());
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        pid_ = pid;
        in_ = to_child[1];
        out_ = from_child[0];
    }

    void write_all(const std::string& s) {
        std::size_t off = 0;
        while (off < s.size()) {
            ssize_t n = ::write(in_, s.data() + off, s.size() - off);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                shutdown();
                throw Error(ErrorCode::BackendUnavailable, "backend closed its input");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(int timeout_ms) {
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
        for (;;) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                shutdown();
                throw Error(ErrorCode::BackendUnavailable, "backend timed out after " + std::to_string(timeout_ms) + " ms");
            }
            pollfd p{out_, POLLIN, 0};
            int r = ::poll(&p, 1, static_cast<int>(left.count()));
            if (r < 0 && errno == EINTR) continue;
            if (r == 0) continue;
            char chunk[4096];
            ssize_t n = ::read(out_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                shutdown();
                throw Error(ErrorCode::BackendUnavailable, "backend exited");
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    json json_or_throw(const std::string& line) {
        try {
            return json::parse(line);
        } catch (const json::exception&) {
            shutdown();
            throw Error(ErrorCode::BackendUnavailable, "backend sent malformed JSON");
        }
    }

    pid_t pid_ = -1;
    int in_ = -1;
    int out_ = -1;
    std::string buffer_;
};

/// Pool of up to max_in_flight backend processes, spawned on demand. A
/// process that times out or breaks protocol is killed and replaced on the
/// next request.
class BackendClient {
public:
    explicit BackendClient(BackendOptions opts) : opts_(std::move(opts)) {
        if (opts_.argv.empty()) throw Error(ErrorCode::ConfigError, "backend command is empty");
        if (opts_.max_in_flight < 1 || opts_.timeout_ms < 1)
            throw Error(ErrorCode::ConfigError, "backend needs max_in_flight >= 1 and timeout_ms >= 1");
        // a dead child must surface as EPIPE, not kill the server
        ::signal(SIGPIPE, SIG_IGN);
    }

    json call(json request) {
        auto proc = acquire();
        struct Release {
            BackendClient* self;
            std::unique_ptr<BackendProcess>* p;
            ~Release() { self->release(std::move(*p)); }
        } guard{this, &proc};
        std::uint64_t id;
        {
            std::lock_guard lk(mu_);
            id = next_id_++;
        }
        request["id"] = id;
        if (!proc || !proc->alive()) proc = std::make_unique<BackendProcess>(opts_.argv);
        json resp = proc->round_trip(request, opts_.timeout_ms);
        if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_unsigned() ||
            resp["id"].get<std::uint64_t>() != id) {
            proc->shutdown();
            throw Error(ErrorCode::BackendUnavailable, "backend response id mismatch");
        }
        if (resp.contains("error"))
            throw Error(ErrorCode::BackendUnavailable, "backend error: " + resp["error"].dump());
        return resp;
    }

private:
    std::unique_ptr<BackendProcess> acquire() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return !idle_.empty() || spawned_ < opts_.max_in_flight; });
        if (!idle_.empty()) {
            auto p = std::move(idle_.back());
            idle_.pop_back();
            return p;
        }
        ++spawned_;
        return nullptr; // spawned by the caller outside the lock
    }

    void release(std::unique_ptr<BackendProcess> p) {
        {
            std::lock_guard lk(mu_);
            if (p && p->alive())
                idle_.push_back(std::move(p));
            else
                --spawned_;
        }
        cv_.notify_one();
    }

    BackendOptions opts_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::vector<std::unique_ptr<BackendProcess>> idle_;
    int spawned_ = 0;
    std::uint64_t next_id_ = 1;
};

namespace detail {
inline double unit_or_throw(const json& v, const char* what) {
    if (!v.is_number()) throw Error(ErrorCode::BackendUnavailable, std::string("backend field ") + what + " is not a number");
    double d = v.get<double>();
    if (!(d >= 0.0 && d <= 1.0)) throw Error(ErrorCode::BackendUnavailable, std::string("backend field ") + what + " outside [0,1]");
    return d;
}
} // namespace detail

class ExternalDependencyBackend final : public DependencyBackend {
public:
    explicit ExternalDependencyBackend(std::shared_ptr<BackendClient> client) : client_(std::move(client)) {}

    DependencyScore score(std::span<const std::string> former, std::span<const std::string> latter) override {
        if (former.empty() || latter.empty())
            throw Error(ErrorCode::PreconditionFailed, "dep_pair needs two non-empty token sequences");
        json req{{"task", "dep_pair"},
                 {"former", std::vector<std::string>(former.begin(), former.end())},
                 {"latter", std::vector<std::string>(latter.begin(), latter.end())}};
        auto resp = client_->call(std::move(req));
        return {detail::unit_or_throw(resp.value("y1", json()), "y1"), detail::unit_or_throw(resp.value("y2", json()), "y2")};
    }

private:
    std::shared_ptr<BackendClient> client_;
};

class ExternalLineLabeler final : public LineLabeler {
public:
    explicit ExternalLineLabeler(std::shared_ptr<BackendClient> client) : client_(std::move(client)) {}

    std::vector<LinePrediction> label(const LocatorInput& input) override {
        json req{{"task", "line_label"}, {"tokens", input.serialized}, {"line_count", input.window.lines.size()}};
        auto resp = client_->call(std::move(req));
        const auto& probs = resp.value("probs", json());
        if (!probs.is_array() || probs.size() != input.window.lines.size())
            throw Error(ErrorCode::BackendUnavailable, "line_label response has wrong line count");
        std::vector<LinePrediction> out;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const auto& p = probs[i];
            if (!p.is_array() || p.size() != 3) throw Error(ErrorCode::BackendUnavailable, "line_label needs 3 probabilities");
            LinePrediction lp;
            lp.line_index = input.window.start_line + static_cast<int>(i);
            for (std::size_t c = 0; c < 3; ++c) lp.confidence[c] = detail::unit_or_throw(p[c], "probs");
            std::size_t best = 0;
            for (std::size_t c = 1; c < 3; ++c)
                if (lp.confidence[c] > lp.confidence[best]) best = c;
            lp.predicted = static_cast<EditType>(best);
            out.push_back(lp);
        }
        return out;
    }

private:
    std::shared_ptr<BackendClient> client_;
};

class ExternalGenerator final : public EditGenerator {
public:
    explicit ExternalGenerator(std::shared_ptr<BackendClient> client) : client_(std::move(client)) {}

    std::vector<EditCandidate> generate(const GeneratorInput& input, int k) override {
        json req{{"task", "generate"}, {"tokens", input.serialized}, {"k", k}};
        auto resp = client_->call(std::move(req));
        const auto& cands = resp.value("candidates", json());
        if (!cands.is_array()) throw Error(ErrorCode::BackendUnavailable, "generate response lacks candidates");
        std::vector<EditCandidate> out;
        for (const auto& c : cands) {
            if (!c.is_object() || !c.contains("lines") || !c["lines"].is_array())
                throw Error(ErrorCode::BackendUnavailable, "generate candidate lacks lines");
            EditCandidate ec;
            ec.content = c["lines"].get<Lines>();
            ec.confidence = detail::unit_or_throw(c.value("confidence", json()), "confidence");
            out.push_back(std::move(ec));
        }
        return out;
    }

private:
    std::shared_ptr<BackendClient> client_;
};

} // namespace editprop
