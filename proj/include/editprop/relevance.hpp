#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <array>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "editprop/edit_model.hpp"
#include "editprop/error.hpp"
#include "editprop/tokenizer.hpp"

namespace editprop {

/// Hyperparameters of file location and prior-edit selection.
struct ScoringConfig {
    double alpha1 = 0.6;   // dependency weight
    double alpha2 = 0.4;   // semantic-similarity weight
    double epsilon = 0.0;  // intercept
    double th_sub = 0.3;   // file threshold
    double th_pri = 0.5;   // prior-edit threshold
    int k_window = 10;     // locality window, lines
    std::size_t max_segment_tokens = 256;
    // Optional prompt-to-segment similarity term; 0 leaves the file score
    // exactly alpha1*dep + alpha2*sem + epsilon.
    double prompt_weight = 0.0;

    void validate() const {
        if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw Error(ErrorCode::ConfigError, "alpha1 and alpha2 must be > 0");
        if (!(th_sub >= 0.0)) throw Error(ErrorCode::ConfigError, "th_sub must be >= 0");
        if (!(th_pri > 0.0 && th_pri < 1.0)) throw Error(ErrorCode::ConfigError, "th_pri must be in (0, 1)");
        if (k_window < 1) throw Error(ErrorCode::ConfigError, "k_window must be >= 1");
        if (max_segment_tokens < 16) throw Error(ErrorCode::ConfigError, "max_segment_tokens must be >= 16");
        if (prompt_weight < 0.0) throw Error(ErrorCode::ConfigError, "prompt_weight must be >= 0");
    }
};

inline void to_json(json& j, const ScoringConfig& c) {
    j = json{{"alpha1", c.alpha1}, {"alpha2", c.alpha2},   {"epsilon", c.epsilon},
             {"th_sub", c.th_sub}, {"th_pri", c.th_pri},   {"k_window", c.k_window},
             {"max_segment_tokens", c.max_segment_tokens}, {"prompt_weight", c.prompt_weight}};
}

inline void from_json(const json& j, ScoringConfig& c) {
    ScoringConfig d;
    c.alpha1 = j.value("alpha1", d.alpha1);
    c.alpha2 = j.value("alpha2", d.alpha2);
    c.epsilon = j.value("epsilon", d.epsilon);
    c.th_sub = j.value("th_sub", d.th_sub);
    c.th_pri = j.value("th_pri", d.th_pri);
    c.k_window = j.value("k_window", d.k_window);
    c.max_segment_tokens = j.value("max_segment_tokens", d.max_segment_tokens);
    c.prompt_weight = j.value("prompt_weight", d.prompt_weight);
    c.validate();
}

/// y_hat_1: the former code depends on the latter; y_hat_2: the latter depends on the former.
struct DependencyScore {
    double y_hat_1 = 0.0;
    double y_hat_2 = 0.0;
};

// ---------------------------------------------------------------------------
// Backend contracts
// ---------------------------------------------------------------------------

/// Pairwise dependency estimator. A learned model behind this interface is
/// expected to be a two-sigmoid head over "<from> former <to> latter",
/// trained with the summed binary cross-entropy of both directions.
class DependencyBackend {
public:
    virtual ~DependencyBackend() = default;
    virtual DependencyScore score(std::span<const std::string> former, std::span<const std::string> latter) = 0;
};

/// Sparse embedding: (dimension key, weight) sorted by key.
using Embedding = std::vector<std::pair<std::string, double>>;

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Embedding embed(std::span<const std::string> tokens) = 0;
};

/// The FCN slot of prior-edit relevance: maps (dep, sem, loc) into (0, 1).
class RelevanceCombiner {
public:
    virtual ~RelevanceCombiner() = default;
    virtual double combine(double dep, double sem, double loc) const = 0;
};

/// Directional identifier overlap. y_hat_2 is the share of the former's
/// identifiers that the latter references; y_hat_1 the converse.
class LexicalDependencyBackend final : public DependencyBackend {
public:
    DependencyScore score(std::span<const std::string> former, std::span<const std::string> latter) override {
        if (former.empty() || latter.empty())
            throw Error(ErrorCode::PreconditionFailed, "dep_pair needs two non-empty token sequences");
        return score_ids(identifier_set(former), identifier_set(latter));
    }

    static DependencyScore score_ids(const std::set<std::string>& f, const std::set<std::string>& l) {
        std::size_t inter = 0;
        const auto& small = f.size() < l.size() ? f : l;
        const auto& big = f.size() < l.size() ? l : f;
        for (const auto& id : small)
            if (big.count(id)) ++inter;
        DependencyScore s;
        s.y_hat_2 = f.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(f.size());
        s.y_hat_1 = l.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(l.size());
        return s;
    }
};

/// L2-normalised term-frequency vectors over the shared tokenizer.
class TermFrequencyEmbedder final : public Embedder {
public:
    Embedding embed(std::span<const std::string> tokens) override { return tf_embedding(tokens); }

    static Embedding tf_embedding(std::span<const std::string> tokens) {
        std::map<std::string, double> counts;
        for (const auto& t : tokens) counts[t] += 1.0;
        double norm = 0.0;
        for (const auto& [k, v] : counts) norm += v * v;
        norm = std::sqrt(norm);
        Embedding out;
        out.reserve(counts.size());
        for (const auto& [k, v] : counts) out.emplace_back(k, norm > 0.0 ? v / norm : 0.0);
        return out;
    }
};

/// Cosine of two sparse embeddings; a zero vector gives 0.
inline double cosine(const Embedding& a, const Embedding& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [k, v] : a) na += v * v;
    for (const auto& [k, v] : b) nb += v * v;
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        int c = a[i].first.compare(b[j].first);
        if (c == 0) {
            dot += a[i].second * b[j].second;
            ++i, ++j;
        } else if (c < 0) {
            ++i;
        } else {
            ++j;
        }
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// logistic(w . [dep, sem, loc] + b)
class LogisticCombiner final : public RelevanceCombiner {
public:
    LogisticCombiner() = default;
    LogisticCombiner(std::array<double, 3> w, double b) : w_(w), b_(b) {}

    double combine(double dep, double sem, double loc) const override {
        return logistic(w_[0] * dep + w_[1] * sem + w_[2] * loc + b_);
    }

    const std::array<double, 3>& weights() const noexcept { return w_; }
    double bias() const noexcept { return b_; }

private:
    std::array<double, 3> w_{1.0, 1.0, 1.0};
    double b_ = -1.5;
};

struct ScoringBackends {
    std::shared_ptr<DependencyBackend> dependency;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<RelevanceCombiner> combiner;

    static ScoringBackends lexical() {
        return {std::make_shared<LexicalDependencyBackend>(), std::make_shared<TermFrequencyEmbedder>(),
                std::make_shared<LogisticCombiner>()};
    }
};

// ---------------------------------------------------------------------------
// File propagation
// ---------------------------------------------------------------------------

inline DependencyScore dep_pair(std::span<const std::string> former_code, std::span<const std::string> latter_code,
                                DependencyBackend& backend) {
    auto f = tokenize_lines(former_code);
    auto l = tokenize_lines(latter_code);
    return backend.score(f, l);
}

/// Pre-tokenised c_tar of an edit, reused across every file of a scan.
struct TargetCode {
    std::vector<std::string> tokens;
    Embedding embedding;

    static TargetCode of(const Edit& e, Embedder& embedder) {
        TargetCode t;
        t.tokens = tokenize_lines(e.target_code());
        t.embedding = embedder.embed(t.tokens);
        return t;
    }
};

struct FileFeatures {
    double dep = 0.0;
    double sem = 0.0;
    double prompt_sim = 0.0;
};

/// max over segments of dep y_hat_2 and of embedding cosine. A file with no
/// segments scores 0 on both.
inline FileFeatures file_features(const TargetCode& target, const std::string& path, std::span<const std::string> file,
                                  const ScoringConfig& cfg, const ScoringBackends& backends,
                                  const Embedding* prompt_embedding = nullptr) {
    FileFeatures out;
    if (target.tokens.empty()) return out;
    for (const auto& seg : split_segments(path, file, cfg.max_segment_tokens)) {
        auto seg_tokens = tokenize_lines(seg.lines);
        if (seg_tokens.empty()) continue;
        out.dep = std::max(out.dep, backends.dependency->score(target.tokens, seg_tokens).y_hat_2);
        auto emb = backends.embedder->embed(seg_tokens);
        out.sem = std::max(out.sem, cosine(target.embedding, emb));
        if (prompt_embedding != nullptr) out.prompt_sim = std::max(out.prompt_sim, cosine(*prompt_embedding, emb));
    }
    return out;
}

inline double dep_file(const Edit& e, const std::string& path, std::span<const std::string> file,
                       const ScoringConfig& cfg, const ScoringBackends& backends) {
    return file_features(TargetCode::of(e, *backends.embedder), path, file, cfg, backends).dep;
}

inline double sem_file(const Edit& e, const std::string& path, std::span<const std::string> file,
                       const ScoringConfig& cfg, const ScoringBackends& backends) {
    return file_features(TargetCode::of(e, *backends.embedder), path, file, cfg, backends).sem;
}

/// alpha1*dep + alpha2*sem + epsilon, unclamped.
inline double propagation_score(double dep, double sem, const ScoringConfig& cfg, double prompt_sim = 0.0) {
    return cfg.alpha1 * dep + cfg.alpha2 * sem + cfg.epsilon + cfg.prompt_weight * prompt_sim;
}

inline double file_propagation_score(const Edit& e, const std::string& path, std::span<const std::string> file,
                                     const ScoringConfig& cfg, const ScoringBackends& backends,
                                     const Prompt& prompt = {}) {
    auto target = TargetCode::of(e, *backends.embedder);
    Embedding prompt_emb;
    const bool use_prompt = cfg.prompt_weight > 0.0 && !prompt.empty();
    if (use_prompt) prompt_emb = backends.embedder->embed(tokenize(prompt.text));
    auto f = file_features(target, path, file, cfg, backends, use_prompt ? &prompt_emb : nullptr);
    return propagation_score(f.dep, f.sem, cfg, f.prompt_sim);
}

struct RankedFile {
    std::string path;
    double score = 0.0;
};

/// Files other than the edited one whose propagation score exceeds th_sub,
/// by descending score then ascending path.
inline std::vector<RankedFile> locate_files(const Edit& e, const ProjectSnapshot& project, const ScoringConfig& cfg,
                                            const ScoringBackends& backends, const Prompt& prompt = {}) {
    cfg.validate();
    if (project.files.empty()) throw Error(ErrorCode::PreconditionFailed, "locate_files on an empty project");
    auto target = TargetCode::of(e, *backends.embedder);
    Embedding prompt_emb;
    const bool use_prompt = cfg.prompt_weight > 0.0 && !prompt.empty();
    if (use_prompt) prompt_emb = backends.embedder->embed(tokenize(prompt.text));
    std::vector<RankedFile> out;
    for (const auto& [path, lines] : project.files) {
        if (path == e.file_path) continue;
        auto f = file_features(target, path, lines, cfg, backends, use_prompt ? &prompt_emb : nullptr);
        double s = propagation_score(f.dep, f.sem, cfg, f.prompt_sim);
        if (s > cfg.th_sub) out.push_back({path, s});
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedFile& a, const RankedFile& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.path < b.path;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Prior-edit relevance
// ---------------------------------------------------------------------------

/// The code a prior edit is being judged against: a file position plus the
/// code there (replaced lines, or the lines around an insertion point).
struct TargetLocation {
    std::string file_path;
    int line = 1;
    Lines code;
};

/// 1 - d/k inside the window, 0 at or beyond it and across files.
inline double loc_sim(const std::string& prior_path, int prior_line, const std::string& target_path, int target_line,
                      int k_window) {
    if (k_window < 1) throw Error(ErrorCode::ConfigError, "k_window must be >= 1");
    if (prior_path != target_path) return 0.0;
    const double d = std::abs(static_cast<double>(prior_line) - static_cast<double>(target_line));
    if (d < k_window) return 1.0 - d / static_cast<double>(k_window);
    return 0.0;
}

inline double loc_sim(const Edit& prior, const Edit& target, int k_window) {
    return loc_sim(prior.file_path, prior.anchor_line, target.file_path, target.anchor_line, k_window);
}

inline double loc_sim(const Edit& prior, const TargetLocation& target, int k_window) {
    return loc_sim(prior.file_path, prior.anchor_line, target.file_path, target.line, k_window);
}

struct RelevanceFeatures {
    double dep = 0.0;
    double sem = 0.0;
    double loc = 0.0;
};

/// dep: how much the target references the prior's code (y_hat_2 with the
/// prior as former); sem: cosine of their embeddings; loc: loc_sim.
inline RelevanceFeatures relevance_features(const Edit& prior, const TargetLocation& target, const ScoringConfig& cfg,
                                            const ScoringBackends& backends) {
    RelevanceFeatures f;
    auto prior_tokens = tokenize_lines(prior.target_code());
    auto target_tokens = tokenize_lines(target.code);
    if (!prior_tokens.empty() && !target_tokens.empty()) {
        f.dep = backends.dependency->score(prior_tokens, target_tokens).y_hat_2;
        f.sem = cosine(backends.embedder->embed(prior_tokens), backends.embedder->embed(target_tokens));
    }
    f.loc = loc_sim(prior, target, cfg.k_window);
    return f;
}

inline double prior_relevance(const Edit& prior, const TargetLocation& target, const ScoringConfig& cfg,
                              const ScoringBackends& backends) {
    auto f = relevance_features(prior, target, cfg, backends);
    return backends.combiner->combine(f.dep, f.sem, f.loc);
}

struct ScoredPrior {
    std::size_t index = 0; // position in the input list (acceptance order)
    double relevance = 0.0;
};

/// Priors with relevance above th_pri, most relevant first; equal scores put
/// the more recent (higher index) edit first.
inline std::vector<ScoredPrior> select_prior_edits(std::span<const Edit> priors, const TargetLocation& target,
                                                   const ScoringConfig& cfg, const ScoringBackends& backends) {
    std::vector<ScoredPrior> out;
    for (std::size_t i = 0; i < priors.size(); ++i) {
        double r = prior_relevance(priors[i], target, cfg, backends);
        if (r > cfg.th_pri) out.push_back({i, r});
    }
    std::stable_sort(out.begin(), out.end(), [](const ScoredPrior& a, const ScoredPrior& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        return a.index > b.index;
    });
    return out;
}

/// Normalises non-negative relevance scores into a sampling distribution;
/// all-zero input gives the uniform distribution.
inline std::vector<double> relevance_distribution(std::span<const double> scores) {
    std::vector<double> out(scores.size(), 0.0);
    if (scores.empty()) return out;
    double total = 0.0;
    for (double s : scores) {
        if (!(s >= 0.0)) throw Error(ErrorCode::PreconditionFailed, "relevance scores must be non-negative");
        total += s;
    }
    for (std::size_t i = 0; i < scores.size(); ++i)
        out[i] = total > 0.0 ? scores[i] / total : 1.0 / static_cast<double>(scores.size());
    return out;
}

} // namespace editprop
