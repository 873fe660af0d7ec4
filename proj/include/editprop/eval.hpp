#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "editprop/corpus_miner.hpp"
#include "editprop/edit_generator.hpp"
#include "editprop/edit_model.hpp"
#include "editprop/error.hpp"
#include "editprop/hashing.hpp"
#include "editprop/line_locator.hpp"
#include "editprop/relevance.hpp"
#include "editprop/session.hpp"

namespace editprop {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Sentence BLEU-4 over shared-tokenizer tokens, in [0, 100]. Uniform
/// weights, brevity penalty, add-one smoothing on 2..4-gram precisions.
inline double bleu4(std::span<const std::string> candidate, std::span<const std::string> reference) {
    auto ref = tokenize_lines(reference);
    if (ref.empty()) throw Error(ErrorCode::EmptyReference, "BLEU reference has no tokens");
    auto cand = tokenize_lines(candidate);
    if (cand.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::map<std::vector<std::string>, int> ref_counts, cand_counts;
        for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
        for (std::size_t i = 0; i + n <= cand.size(); ++i) ++cand_counts[{cand.begin() + i, cand.begin() + i + n}];
        double matches = 0.0, total = 0.0;
        for (const auto& [gram, c] : cand_counts) {
            total += c;
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) matches += std::min(c, it->second);
        }
        if (n > 1) {
            matches += 1.0;
            total += 1.0;
        }
        if (matches <= 0.0 || total <= 0.0) return 0.0;
        log_sum += std::log(matches / total);
    }
    const double c = static_cast<double>(cand.size()), r = static_cast<double>(ref.size());
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

/// Token-exact equality under the shared tokenizer (whitespace-insensitive).
inline bool exact_match(std::span<const std::string> candidate, std::span<const std::string> reference) {
    return tokenize_lines(candidate) == tokenize_lines(reference);
}

/// BLEU of generated content against a possibly empty ground truth (a pure
/// deletion): both empty scores 100, otherwise an empty side scores 0.
inline double content_bleu(std::span<const std::string> candidate, std::span<const std::string> reference) {
    const bool ref_empty = tokenize_lines(reference).empty();
    const bool cand_empty = tokenize_lines(candidate).empty();
    if (ref_empty) return cand_empty ? 100.0 : 0.0;
    return bleu4(candidate, reference);
}

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/// precision = |pred & gt| / |pred| (1 for an empty prediction), recall = |pred & gt| / |gt|.
inline PrecisionRecall eval_file_location(const std::set<std::string>& predicted, const std::set<std::string>& gt) {
    if (gt.empty()) throw Error(ErrorCode::EmptyGroundTruth, "file location needs at least one positive file");
    std::size_t hit = 0;
    for (const auto& p : predicted) hit += gt.count(p);
    PrecisionRecall r;
    r.precision = predicted.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(predicted.size());
    r.recall = static_cast<double>(hit) / static_cast<double>(gt.size());
    return r;
}

/// How a class with an undefined precision or recall enters the macro mean.
enum class AbsentClassPolicy {
    One,  // absent from both prediction and truth: P = R = 1; other undefined ratios 0
    Zero, // every undefined ratio counts as 0
    Skip, // classes absent from both are left out of the mean
};

using Confusion = std::array<std::array<std::size_t, 3>, 3>; // [gt][pred], Keep/Insert/Replace

struct LineMetrics {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
};

inline LineMetrics line_metrics(const Confusion& m, AbsentClassPolicy policy = AbsentClassPolicy::One) {
    std::size_t total = 0, correct = 0;
    for (std::size_t g = 0; g < 3; ++g)
        for (std::size_t p = 0; p < 3; ++p) {
            total += m[g][p];
            if (g == p) correct += m[g][p];
        }
    LineMetrics out;
    out.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 1.0;
    double psum = 0.0, rsum = 0.0;
    int classes = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        std::size_t pred_c = 0, gt_c = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            pred_c += m[k][c];
            gt_c += m[c][k];
        }
        const bool absent = pred_c == 0 && gt_c == 0;
        if (absent && policy == AbsentClassPolicy::Skip) continue;
        ++classes;
        if (absent && policy == AbsentClassPolicy::One) {
            psum += 1.0;
            rsum += 1.0;
            continue;
        }
        psum += pred_c ? static_cast<double>(m[c][c]) / static_cast<double>(pred_c) : 0.0;
        rsum += gt_c ? static_cast<double>(m[c][c]) / static_cast<double>(gt_c) : 0.0;
    }
    if (classes == 0) {
        out.macro_precision = out.macro_recall = 1.0;
        return out;
    }
    out.macro_precision = psum / classes;
    out.macro_recall = rsum / classes;
    return out;
}

inline Confusion confusion(std::span<const EditType> predicted, std::span<const EditType> gt) {
    if (predicted.size() != gt.size())
        throw Error(ErrorCode::CoverageMismatch, std::to_string(predicted.size()) + " predictions for " +
                                                     std::to_string(gt.size()) + " labelled lines");
    Confusion m{};
    for (std::size_t i = 0; i < gt.size(); ++i)
        ++m[static_cast<std::size_t>(gt[i])][static_cast<std::size_t>(predicted[i])];
    return m;
}

inline LineMetrics eval_line_location(std::span<const EditType> predicted, std::span<const EditType> gt,
                                      AbsentClassPolicy policy = AbsentClassPolicy::One) {
    return line_metrics(confusion(predicted, gt), policy);
}

// ---------------------------------------------------------------------------
// Evaluation over mined samples
// ---------------------------------------------------------------------------

enum class PriorPolicy { Selective, Random };

inline const char* to_string(PriorPolicy p) { return p == PriorPolicy::Selective ? "selective" : "random"; }

inline PriorPolicy prior_policy_from_string(std::string_view s) {
    if (s == "selective") return PriorPolicy::Selective;
    if (s == "random") return PriorPolicy::Random;
    throw Error(ErrorCode::ConfigError, "unknown prior policy '" + std::string(s) + "'");
}

struct EvalConfig {
    ScoringConfig scoring;
    LocatorConfig locator;
    int context_lines = 3;
    std::size_t generator_budget = 4096;
    std::vector<int> k_list{1, 3, 5, 10};
    PriorPolicy policy = PriorPolicy::Selective;
    std::uint64_t seed = 42;
    AbsentClassPolicy absent_class = AbsentClassPolicy::One;
    unsigned workers = 0;

    json to_json() const {
        json j{{"scoring", scoring},
               {"window_size", locator.window_size},
               {"stride", locator.stride},
               {"theta_replace", locator.theta_replace},
               {"theta_insert", locator.theta_insert},
               {"token_budget", locator.token_budget},
               {"context_lines", context_lines},
               {"generator_budget", generator_budget},
               {"k_list", k_list},
               {"policy", editprop::to_string(policy)},
               {"seed", seed},
               {"absent_class", static_cast<int>(absent_class)}};
        return j;
    }

    /// Hash of every setting that can change a metric; worker count excluded.
    std::string hash() const { return hex64(fnv1a64(to_json().dump())); }
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
}

inline std::vector<PriorEdit> sample_priors(const Sample& s, int context) {
    std::vector<PriorEdit> out;
    for (const auto& h : s.prior_hunks) {
        auto it = s.files.find(h.file_path);
        Lines empty;
        out.push_back(make_prior(edit_from_hunk(h), it == s.files.end() ? empty : it->second, context));
    }
    return out;
}

} // namespace detail

/// Priors for one generation sample under the chosen policy. The random arm
/// draws as many priors as the selective arm would keep, uniformly from all
/// of them, and ranks them in draw order with relevance 1/rank.
inline std::vector<PriorEdit> choose_priors(const Sample& s, const HunkRegion& region, const EvalConfig& cfg,
                                            const ScoringBackends& backends) {
    auto all = detail::sample_priors(s, cfg.context_lines);
    std::vector<Edit> edits;
    for (const auto& p : all) edits.push_back(p.edit);
    auto selected = select_prior_edits(edits, target_of(region), cfg.scoring, backends);
    std::vector<PriorEdit> out;
    if (cfg.policy == PriorPolicy::Selective) {
        for (const auto& sp : selected) {
            out.push_back(all[sp.index]);
            out.back().relevance = sp.relevance;
        }
        return out;
    }
    std::mt19937_64 rng(cfg.seed ^ fnv1a64(s.commit_id + "#" + std::to_string(s.sample_index)));
    auto picks = sample_without_replacement(rng, all.size(), selected.size());
    for (std::size_t r = 0; r < picks.size(); ++r) {
        out.push_back(all[picks[r]]);
        out.back().relevance = 1.0 / static_cast<double>(r + 1);
    }
    return out;
}

struct GenerationSampleResult {
    std::vector<bool> exact;   // per k in k_list
    std::vector<double> bleu;  // per k in k_list
    std::size_t candidates = 0;
    std::string failure;       // error code when the engine produced nothing
};

inline GenerationSampleResult eval_generation_sample(const Sample& s, const EvalConfig& cfg,
                                                     const EngineBackends& backends) {
    GenerationSampleResult r;
    r.exact.assign(cfg.k_list.size(), false);
    r.bleu.assign(cfg.k_list.size(), 0.0);
    const int kmax = *std::max_element(cfg.k_list.begin(), cfg.k_list.end());
    std::vector<EditCandidate> cands;
    try {
        auto it = s.files.find(s.target_hunk.file_path);
        const Lines empty;
        const Lines& file = it == s.files.end() ? empty : it->second;
        auto region = region_for_hunk(s.target_hunk, file, cfg.context_lines);
        auto priors = choose_priors(s, region, cfg, backends.scoring);
        if (priors.empty()) throw Error(ErrorCode::NoCandidate, "no prior edit selected");
        auto input = make_generator_input(std::move(region), s.prompt, std::move(priors), cfg.generator_budget);
        cands = generate_candidates(input, *backends.generator, kmax);
    } catch (const Error& e) {
        r.failure = to_string(e.code());
    }
    r.candidates = cands.size();
    const auto& gt = s.target_hunk.after_lines;
    for (std::size_t ki = 0; ki < cfg.k_list.size(); ++ki) {
        const auto k = static_cast<std::size_t>(cfg.k_list[ki]);
        for (std::size_t c = 0; c < cands.size() && c < k; ++c) {
            r.exact[ki] = r.exact[ki] || exact_match(cands[c].content, gt);
            r.bleu[ki] = std::max(r.bleu[ki], content_bleu(cands[c].content, gt));
        }
    }
    return r;
}

struct GenerationMetrics {
    std::vector<int> k_list;
    std::vector<double> emr;
    std::vector<double> bleu4;
    std::size_t samples = 0;
    std::map<std::string, std::size_t> failures;
};

/// Per-sample exact match and best BLEU over the top k, averaged over samples.
inline GenerationMetrics eval_generation(std::span<const Sample> samples, const EvalConfig& cfg,
                                         const EngineBackends& backends) {
    if (cfg.k_list.empty()) throw Error(ErrorCode::ConfigError, "k_list is empty");
    for (int k : cfg.k_list)
        if (k < 1) throw Error(ErrorCode::ConfigError, "every k must be >= 1");
    std::vector<GenerationSampleResult> results(samples.size());
    detail::parallel_for(samples.size(), cfg.workers,
                         [&](std::size_t i) { results[i] = eval_generation_sample(samples[i], cfg, backends); });
    GenerationMetrics m;
    m.k_list = cfg.k_list;
    m.emr.assign(cfg.k_list.size(), 0.0);
    m.bleu4.assign(cfg.k_list.size(), 0.0);
    m.samples = samples.size();
    for (const auto& r : results) {
        if (!r.failure.empty()) ++m.failures[r.failure];
        for (std::size_t ki = 0; ki < cfg.k_list.size(); ++ki) {
            m.emr[ki] += r.exact[ki] ? 1.0 : 0.0;
            m.bleu4[ki] += r.bleu[ki];
        }
    }
    if (!samples.empty())
        for (std::size_t ki = 0; ki < cfg.k_list.size(); ++ki) {
            m.emr[ki] /= static_cast<double>(samples.size());
            m.bleu4[ki] /= static_cast<double>(samples.size());
        }
    return m;
}

struct LineLocationMetrics {
    LineMetrics metrics;
    Confusion confusion{};
    std::size_t samples = 0;
    std::size_t lines = 0;
    std::map<std::string, std::size_t> failures;
};

/// Labels the target file of each sample (before the commit) with the other
/// hunks as priors. Lines changed by those priors and the synthetic head
/// line are excluded from both sides; confusion counts are pooled over all
/// samples before the macro averages are taken.
inline LineLocationMetrics eval_line_samples(std::span<const Sample> samples, const EvalConfig& cfg,
                                             const EngineBackends& backends) {
    std::vector<Confusion> per(samples.size(), Confusion{});
    std::vector<std::string> fail(samples.size());
    detail::parallel_for(samples.size(), cfg.workers, [&](std::size_t i) {
        const auto& s = samples[i];
        try {
            const Lines& file = s.files.at(s.target_hunk.file_path);
            const int n = static_cast<int>(file.size());
            auto gt = merge_line_labels(n, std::span(&s.target_hunk, 1));
            std::vector<bool> covered(static_cast<std::size_t>(n) + 1, false);
            for (const auto& h : s.prior_hunks) {
                if (h.file_path != s.target_hunk.file_path) continue;
                for (int l = h.before_start; l < h.before_start + static_cast<int>(h.before_lines.size()); ++l)
                    if (l >= 1 && l <= n) covered[static_cast<std::size_t>(l)] = true;
            }
            auto priors = detail::sample_priors(s, cfg.context_lines);
            std::reverse(priors.begin(), priors.end());
            auto pred = label_file(s.target_hunk.file_path, file, s.prompt, priors, *backends.labeler, cfg.locator);
            std::vector<EditType> p, g;
            for (int l = 1; l <= n; ++l) {
                if (covered[static_cast<std::size_t>(l)]) continue;
                p.push_back(pred[static_cast<std::size_t>(l - 1)].predicted);
                g.push_back(gt[static_cast<std::size_t>(l)]);
            }
            per[i] = confusion(p, g);
        } catch (const std::exception& e) {
            const auto* err = dynamic_cast<const Error*>(&e);
            fail[i] = err ? to_string(err->code()) : "NotFound";
        }
    });
    LineLocationMetrics out;
    out.samples = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!fail[i].empty()) {
            ++out.failures[fail[i]];
            continue;
        }
        for (std::size_t g = 0; g < 3; ++g)
            for (std::size_t q = 0; q < 3; ++q) {
                out.confusion[g][q] += per[i][g][q];
                out.lines += per[i][g][q];
            }
    }
    out.metrics = line_metrics(out.confusion, cfg.absent_class);
    return out;
}

struct FileLocationMetrics {
    PrecisionRecall mean;
    std::size_t samples = 0;
    std::size_t evaluated = 0;
    std::map<std::string, std::size_t> failures;
};

/// The target hunk is the trigger edit; the other files the commit touched
/// are the positives and the sample's negatives fill out the project. A
/// single-file commit has no positives and is counted under EmptyGroundTruth.
inline FileLocationMetrics eval_file_samples(std::span<const Sample> samples, const EvalConfig& cfg,
                                             const EngineBackends& backends) {
    std::vector<std::optional<PrecisionRecall>> per(samples.size());
    std::vector<std::string> fail(samples.size());
    detail::parallel_for(samples.size(), cfg.workers, [&](std::size_t i) {
        const auto& s = samples[i];
        try {
            std::set<std::string> gt;
            for (const auto& h : s.prior_hunks)
                if (h.file_path != s.target_hunk.file_path) gt.insert(h.file_path);
            ProjectSnapshot project;
            for (const auto& [path, lines] : s.files) project.files[path] = lines;
            auto ranked = locate_files(edit_from_hunk(s.target_hunk), project, cfg.scoring, backends.scoring, s.prompt);
            std::set<std::string> pred;
            for (const auto& r : ranked) pred.insert(r.path);
            per[i] = eval_file_location(pred, gt);
        } catch (const Error& e) {
            fail[i] = to_string(e.code());
        }
    });
    FileLocationMetrics out;
    out.samples = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!per[i]) {
            ++out.failures[fail[i]];
            continue;
        }
        ++out.evaluated;
        out.mean.precision += per[i]->precision;
        out.mean.recall += per[i]->recall;
    }
    if (out.evaluated) {
        out.mean.precision /= static_cast<double>(out.evaluated);
        out.mean.recall /= static_cast<double>(out.evaluated);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct MetricReport {
    json config;
    std::string config_hash;
    std::optional<FileLocationMetrics> file;
    std::optional<LineLocationMetrics> line;
    std::optional<GenerationMetrics> generation;
};

inline void to_json(json& j, const MetricReport& r) {
    j = json{{"v", 1}, {"config_hash", r.config_hash}, {"config", r.config}};
    if (r.file)
        j["file"] = {{"precision", r.file->mean.precision},
                     {"recall", r.file->mean.recall},
                     {"samples", r.file->samples},
                     {"evaluated", r.file->evaluated},
                     {"failures", r.file->failures}};
    if (r.line)
        j["line"] = {{"accuracy", r.line->metrics.accuracy},
                     {"macro_precision", r.line->metrics.macro_precision},
                     {"macro_recall", r.line->metrics.macro_recall},
                     {"confusion", r.line->confusion},
                     {"samples", r.line->samples},
                     {"lines", r.line->lines},
                     {"failures", r.line->failures}};
    if (r.generation) {
        json per_k = json::object();
        for (std::size_t i = 0; i < r.generation->k_list.size(); ++i)
            per_k[std::to_string(r.generation->k_list[i])] = {{"emr", r.generation->emr[i]},
                                                              {"bleu4", r.generation->bleu4[i]}};
        j["generation"] = {{"k", per_k}, {"samples", r.generation->samples}, {"failures", r.generation->failures}};
    }
}

/// task,metric,k,value rows; generation rows follow the top-k column layout.
inline std::string report_csv(const MetricReport& r) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    out << "task,metric,k,value\n";
    if (r.file) {
        out << "file,precision,," << r.file->mean.precision << "\n";
        out << "file,recall,," << r.file->mean.recall << "\n";
    }
    if (r.line) {
        out << "line,accuracy,," << r.line->metrics.accuracy << "\n";
        out << "line,macro_precision,," << r.line->metrics.macro_precision << "\n";
        out << "line,macro_recall,," << r.line->metrics.macro_recall << "\n";
    }
    if (r.generation)
        for (std::size_t i = 0; i < r.generation->k_list.size(); ++i) {
            out << "gen,emr," << r.generation->k_list[i] << "," << r.generation->emr[i] << "\n";
            out << "gen,bleu4," << r.generation->k_list[i] << "," << r.generation->bleu4[i] << "\n";
        }
    return out.str();
}

inline MetricReport make_report(const EvalConfig& cfg) {
    MetricReport r;
    r.config = cfg.to_json();
    r.config_hash = cfg.hash();
    return r;
}

struct AblationReport {
    MetricReport selective;
    MetricReport random;
};

inline void to_json(json& j, const AblationReport& r) {
    j = json{{"v", 1}, {"selective", r.selective}, {"random", r.random}};
}

/// Two generation passes that differ only in the prior-selection policy.
inline AblationReport run_ablation(std::span<const Sample> samples, EvalConfig cfg, const EngineBackends& backends) {
    AblationReport out;
    cfg.policy = PriorPolicy::Selective;
    out.selective = make_report(cfg);
    out.selective.generation = eval_generation(samples, cfg, backends);
    cfg.policy = PriorPolicy::Random;
    out.random = make_report(cfg);
    out.random.generation = eval_generation(samples, cfg, backends);
    return out;
}

} // namespace editprop
