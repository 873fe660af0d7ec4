// editprop: mine commit datasets, evaluate, and serve edit recommendations.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "editprop/editprop.hpp"
#include "editprop/http_service.hpp"

namespace fs = std::filesystem;
using namespace editprop;

namespace {

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::vector<int> parse_k_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream in(s);
    for (std::string part; std::getline(in, part, ',');) {
        int k = 0;
        if (!detail::parse_int(part, k) || k < 1) throw Error(ErrorCode::ConfigError, "bad k value '" + part + "'");
        out.push_back(k);
    }
    if (out.empty()) throw Error(ErrorCode::ConfigError, "empty k list");
    return out;
}

EngineBackends make_backends(const std::string& backend_cmd, int timeout_ms, const LocatorConfig& loc) {
    auto b = EngineBackends::lexical(loc);
    if (backend_cmd.empty()) return b;
    auto client = std::make_shared<BackendClient>(BackendOptions{split_words(backend_cmd), timeout_ms, 1});
    b.scoring.dependency = std::make_shared<ExternalDependencyBackend>(client);
    b.labeler = std::make_shared<ExternalLineLabeler>(client);
    b.generator = std::make_shared<ExternalGenerator>(client);
    return b;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::NotFound, "cannot write '" + path.string() + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"edit propagation recommender"};
    app.require_subcommand(1);

    // mine
    auto* mine = app.add_subcommand("mine", "build JSONL datasets from git history or a commit directory");
    std::string repo, commits_dir, out_dir, task = "all";
    std::uint64_t seed = 42;
    std::size_t negatives = 10;
    unsigned workers = 0;
    auto* repo_opt = mine->add_option("--repo", repo, "git repository");
    auto* commits_opt = mine->add_option("--commits", commits_dir, "directory of per-commit JSON files");
    repo_opt->excludes(commits_opt);
    mine->add_option("--out", out_dir, "output directory")->required();
    mine->add_option("--task", task, "file_loc | line_loc | gen | all")->check(
        CLI::IsMember({"file_loc", "line_loc", "gen", "all"}));
    mine->add_option("--seed", seed);
    mine->add_option("--negatives", negatives);
    mine->add_option("--workers", workers);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a mined dataset");
    std::string dataset, eval_task = "gen", k_arg = "1,3,5,10", priors = "selective", report_out, csv_out, backend;
    int timeout_ms = 5000;
    eval->add_option("--dataset", dataset, "directory written by mine")->required();
    eval->add_option("--task", eval_task)->check(CLI::IsMember({"file_loc", "line_loc", "gen", "all"}));
    eval->add_option("--k", k_arg, "comma-separated k values");
    eval->add_option("--priors", priors, "selective | random | both")->check(
        CLI::IsMember({"selective", "random", "both"}));
    eval->add_option("--seed", seed);
    eval->add_option("--split", "restrict to train | valid | test");
    eval->add_option("--out", report_out, "report JSON path");
    eval->add_option("--csv", csv_out, "CSV table path");
    eval->add_option("--backend", backend, "external backend command");
    eval->add_option("--backend-timeout", timeout_ms);
    eval->add_option("--workers", workers);

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP session service");
    std::string host = "127.0.0.1", store;
    int port = 8080;
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--store", store, "event log directory");
    serve->add_option("--backend", backend, "external backend command");
    serve->add_option("--backend-timeout", timeout_ms);

    // replay / recommend
    auto* replay = app.add_subcommand("replay", "rebuild a session from its event log and print its report");
    std::string log_path;
    replay->add_option("--log", log_path)->required();
    auto* recommend = app.add_subcommand("recommend", "locations, or candidates for one region, of a logged session");
    std::string region;
    int k = 5;
    recommend->add_option("--log", log_path)->required();
    recommend->add_option("--region", region, "region ref from the location report");
    recommend->add_option("--k", k);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*mine) {
            if (repo.empty() == commits_dir.empty()) throw Error(ErrorCode::ConfigError, "give exactly one of --repo, --commits");
            MineConfig cfg;
            if (task != "all") cfg.tasks = {task_from_string(task)};
            cfg.samples.seed = seed;
            cfg.samples.negatives = negatives;
            cfg.workers = workers;
            auto summary = repo.empty() ? mine_json_dir(commits_dir, out_dir, cfg) : mine_git(repo, out_dir, cfg);
            std::cout << json(summary).dump(2) << "\n";
            return 0;
        }
        if (*eval) {
            EvalConfig cfg;
            cfg.k_list = parse_k_list(k_arg);
            cfg.seed = seed;
            cfg.workers = workers;
            auto backends = make_backends(backend, timeout_ms, cfg.locator);
            std::optional<Split> only;
            if (auto* o = eval->get_option("--split"); o->count()) only = split_from_string(o->as<std::string>());
            auto load = [&](Task t) {
                auto all = read_samples(fs::path(dataset) / (std::string(to_string(t)) + ".jsonl"));
                if (only) std::erase_if(all, [&](const Sample& s) { return s.split != *only; });
                return all;
            };
            json out;
            std::string csv;
            auto run = [&](PriorPolicy policy) {
                cfg.policy = policy;
                auto report = make_report(cfg);
                if (eval_task == "gen" || eval_task == "all") report.generation = eval_generation(load(Task::Gen), cfg, backends);
                if (eval_task == "line_loc" || eval_task == "all") report.line = eval_line_samples(load(Task::LineLoc), cfg, backends);
                if (eval_task == "file_loc" || eval_task == "all") report.file = eval_file_samples(load(Task::FileLoc), cfg, backends);
                return report;
            };
            if (priors == "both") {
                AblationReport ab{run(PriorPolicy::Selective), run(PriorPolicy::Random)};
                out = ab;
                csv = "policy=selective\n" + report_csv(ab.selective) + "policy=random\n" + report_csv(ab.random);
            } else {
                auto report = run(prior_policy_from_string(priors));
                out = report;
                csv = report_csv(report);
            }
            const std::string text = out.dump(2) + "\n";
            if (report_out.empty())
                std::cout << text;
            else
                write_file(report_out, text);
            if (!csv_out.empty()) write_file(csv_out, csv);
            return 0;
        }
        if (*serve) {
            LocatorConfig loc;
            std::optional<fs::path> store_dir;
            if (!store.empty()) store_dir = store;
            SessionManager sessions(make_backends(backend, timeout_ms, loc), store_dir);
            httplib::Server server;
            register_routes(server, sessions);
            std::cerr << "listening on " << host << ":" << port << "\n";
            if (!server.listen(host, port)) throw Error(ErrorCode::BackendUnavailable, "cannot listen on port " + std::to_string(port));
            return 0;
        }
        if (*replay || *recommend) {
            auto session = replay_session(read_event_log(log_path), EngineBackends::lexical());
            if (!snapshot_consistent(*session)) throw Error(ErrorCode::StaleEdit, "replayed snapshot is inconsistent");
            if (*recommend && !region.empty()) {
                try {
                    std::cout << json(session->recommend_edits(region, k)).dump(2) << "\n";
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::NoCandidate) throw;
                    std::cout << json(CandidateList{session->id(), session->revision(), region, {}, "no suggestion"}).dump(2) << "\n";
                }
                return 0;
            }
            std::cout << json(session->recommend_locations()).dump(2) << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
