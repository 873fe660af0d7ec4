#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "editprop/edit_model.hpp"
#include "editprop/error.hpp"
#include "editprop/tokenizer.hpp"

namespace editprop {

struct LocatorConfig {
    int window_size = 40;
    int stride = 20;
    double theta_replace = 0.5;
    double theta_insert = 0.6;
    std::size_t token_budget = 4096;
};

struct CodeWindow {
    std::string file_path;
    int start_line = 1; // 1-based
    Lines lines;
    int window_size = 0;
    int stride = 0;
    // First line after the window, if any; gives the last window line its
    // next-line context.
    std::optional<std::string> lookahead;
};

/// Windows of `s` lines every `stride` lines until the file end is covered.
inline std::vector<CodeWindow> make_windows(const std::string& path, std::span<const std::string> file, int s,
                                            int stride) {
    if (s < 1 || stride < 1 || stride > s)
        throw Error(ErrorCode::ConfigError, "window needs s >= 1 and 1 <= stride <= s");
    std::vector<CodeWindow> out;
    const int n = static_cast<int>(file.size());
    for (int start = 1; start <= n; start += stride) {
        CodeWindow w{path, start, {}, s, stride, std::nullopt};
        const int end = std::min(n, start + s - 1);
        for (int i = start; i <= end; ++i) w.lines.push_back(file[static_cast<std::size_t>(i - 1)]);
        if (end < n) w.lookahead = file[static_cast<std::size_t>(end)];
        out.push_back(std::move(w));
        if (end >= n) break;
    }
    return out;
}

namespace tags {
inline constexpr const char* code_window = "<code-window>";
inline constexpr const char* prompt = "<prompt>";
inline constexpr const char* prior_edits = "<prior-edits>";
inline constexpr const char* mask = "<MASK>";
inline constexpr const char* to = "<to>";
inline constexpr const char* from = "<from>";
} // namespace tags

namespace detail {

inline std::vector<std::string> prior_section(const Edit& e) {
    std::vector<std::string> out{tags::prior_edits, std::string(tag(e.edit_type))};
    auto b = tokenize_lines(e.before_code);
    auto a = tokenize_lines(e.after_code);
    out.insert(out.end(), b.begin(), b.end());
    out.emplace_back(tags::to);
    out.insert(out.end(), a.begin(), a.end());
    return out;
}

/// Appends prompt and prior sections to `window_section`, dropping the least
/// relevant priors (the tail) and then prompt tokens until the budget fits.
inline std::vector<std::string> assemble(std::vector<std::string> window_section, const Prompt& prompt,
                                         std::span<const PriorEdit> priors, std::size_t budget,
                                         ErrorCode too_large) {
    if (window_section.size() + 1 > budget)
        throw Error(too_large, std::to_string(window_section.size()) + " window tokens exceed budget " +
                                   std::to_string(budget));
    auto prompt_tokens = tokenize(prompt.text);
    std::vector<std::vector<std::string>> sections;
    for (const auto& p : priors) sections.push_back(prior_section(p.edit));
    auto total = [&] {
        std::size_t t = window_section.size() + 1 + prompt_tokens.size();
        for (const auto& s : sections) t += s.size();
        return t;
    };
    while (!sections.empty() && total() > budget) sections.pop_back();
    if (total() > budget) prompt_tokens.resize(budget - window_section.size() - 1);
    auto out = std::move(window_section);
    out.emplace_back(tags::prompt);
    out.insert(out.end(), prompt_tokens.begin(), prompt_tokens.end());
    for (auto& s : sections) out.insert(out.end(), s.begin(), s.end());
    return out;
}

} // namespace detail

struct LocatorInput {
    CodeWindow window;
    Prompt prompt;
    std::vector<PriorEdit> prior_edits; // most relevant first
    std::vector<std::string> serialized;
};

/// `<code-window>` (`<MASK>` line-tokens)*  `<prompt>` prompt-tokens
/// (`<prior-edits>` type-tag before-tokens `<to>` after-tokens)*
inline std::vector<std::string> serialize_locator_input(const CodeWindow& window, const Prompt& prompt,
                                                        std::span<const PriorEdit> priors, std::size_t budget) {
    std::vector<std::string> ws{tags::code_window};
    for (const auto& line : window.lines) {
        ws.emplace_back(tags::mask);
        auto t = tokenize(line);
        ws.insert(ws.end(), t.begin(), t.end());
    }
    return detail::assemble(std::move(ws), prompt, priors, budget, ErrorCode::WindowTooLarge);
}

inline LocatorInput make_locator_input(CodeWindow window, Prompt prompt, std::vector<PriorEdit> priors,
                                       std::size_t budget) {
    LocatorInput in{std::move(window), std::move(prompt), std::move(priors), {}};
    in.serialized = serialize_locator_input(in.window, in.prompt, in.prior_edits, budget);
    return in;
}

/// Class probabilities are indexed Keep, Insert, Replace.
struct LinePrediction {
    int line_index = 0; // 1-based file line
    EditType predicted = EditType::Keep;
    std::array<double, 3> confidence{1.0, 0.0, 0.0};

    double predicted_confidence() const { return confidence[static_cast<std::size_t>(predicted)]; }

    friend bool operator==(const LinePrediction&, const LinePrediction&) = default;
};

inline void to_json(json& j, const LinePrediction& p) {
    j = json{{"line", p.line_index}, {"edit_type", p.predicted}, {"confidence", p.confidence}};
}

inline void from_json(const json& j, LinePrediction& p) {
    p.line_index = j.at("line").get<int>();
    p.predicted = j.at("edit_type").get<EditType>();
    p.confidence = j.at("confidence").get<std::array<double, 3>>();
}

/// Per-line edit-type labeller. A learned masked-LM backend receives
/// `input.serialized` verbatim and returns one probability triple per window line.
class LineLabeler {
public:
    virtual ~LineLabeler() = default;
    virtual std::vector<LinePrediction> label(const LocatorInput& input) = 0;
};

/// Rule-based labeller driven by token similarity to the prior edits.
///   Replace: sigma_R = max Jaccard(line, any before-line of a Replace prior) >= theta_R
///   Insert:  sigma_I = similarity of (line, next line) to an Insert prior's
///            (anchor line, following line) >= theta_I
/// Lines without identifiers are always Keep.
class HeuristicLineLabeler final : public LineLabeler {
public:
    explicit HeuristicLineLabeler(LocatorConfig cfg = {}) : cfg_(cfg) {}

    std::vector<LinePrediction> label(const LocatorInput& input) override {
        const auto& w = input.window;
        std::vector<std::vector<std::string>> replace_lines;
        struct InsertContext {
            std::vector<std::string> anchor;
            std::vector<std::string> next;
        };
        std::vector<InsertContext> insert_contexts;
        for (const auto& p : input.prior_edits) {
            if (p.edit.edit_type == EditType::Replace) {
                for (const auto& l : p.edit.before_code) {
                    auto t = tokenize(l);
                    if (has_identifier(t)) replace_lines.push_back(std::move(t));
                }
            } else if (p.edit.edit_type == EditType::Insert && !p.context_before.empty()) {
                InsertContext c{tokenize(p.context_before.back()), {}};
                if (!p.context_after.empty()) c.next = tokenize(p.context_after.front());
                if (has_identifier(c.anchor)) insert_contexts.push_back(std::move(c));
            }
        }

        std::vector<LinePrediction> out;
        out.reserve(w.lines.size());
        for (std::size_t i = 0; i < w.lines.size(); ++i) {
            LinePrediction pred;
            pred.line_index = w.start_line + static_cast<int>(i);
            auto toks = tokenize(w.lines[i]);
            double sr = 0.0, si = 0.0;
            if (has_identifier(toks)) {
                for (const auto& r : replace_lines) sr = std::max(sr, token_jaccard(toks, r));
                std::vector<std::string> next;
                if (i + 1 < w.lines.size())
                    next = tokenize(w.lines[i + 1]);
                else if (w.lookahead)
                    next = tokenize(*w.lookahead);
                for (const auto& c : insert_contexts) {
                    double ja = token_jaccard(toks, c.anchor);
                    double jn = (c.next.empty() && next.empty()) ? 0.0 : token_jaccard(next, c.next);
                    si = std::max(si, std::max(ja, 0.5 * (ja + jn)));
                }
            }
            pred.predicted = EditType::Keep;
            const bool r_ok = sr >= cfg_.theta_replace;
            const bool i_ok = si >= cfg_.theta_insert;
            if (r_ok && (!i_ok || sr >= si)) {
                pred.predicted = EditType::Replace;
                pred.confidence = {1.0 - sr, 0.0, sr};
            } else if (i_ok) {
                pred.predicted = EditType::Insert;
                pred.confidence = {1.0 - si, si, 0.0};
            } else {
                // Keep gets 1 - max(sigma), floored at 1/2 so it stays the argmax.
                const double m = std::max(sr, si);
                const double keep = std::max(1.0 - m, 0.5);
                const double rest = 1.0 - keep;
                const double denom = sr + si;
                pred.confidence = {keep, denom > 0.0 ? rest * si / denom : 0.0, denom > 0.0 ? rest * sr / denom : 0.0};
            }
            out.push_back(pred);
        }
        return out;
    }

    const LocatorConfig& config() const noexcept { return cfg_; }

private:
    static bool has_identifier(const std::vector<std::string>& toks) {
        return std::any_of(toks.begin(), toks.end(), [](const std::string& t) { return is_identifier(t); });
    }

    LocatorConfig cfg_;
};

inline std::vector<LinePrediction> predict_line_labels(const LocatorInput& input, LineLabeler& labeler) {
    auto preds = labeler.label(input);
    if (preds.size() != input.window.lines.size())
        throw Error(ErrorCode::BackendUnavailable, "labeler returned " + std::to_string(preds.size()) +
                                                       " predictions for " +
                                                       std::to_string(input.window.lines.size()) + " lines");
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto& p = preds[i];
        p.line_index = input.window.start_line + static_cast<int>(i);
        double sum = p.confidence[0] + p.confidence[1] + p.confidence[2];
        if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::BackendUnavailable, "probabilities do not sum to 1");
    }
    return preds;
}

namespace detail {
// Total order used to merge overlapping windows: higher confidence of the
// predicted class wins; on equal confidence Keep beats Insert beats Replace;
// remaining ties fall back to the probability vector.
inline bool merge_beats(const LinePrediction& a, const LinePrediction& b) {
    double ca = a.predicted_confidence(), cb = b.predicted_confidence();
    if (ca != cb) return ca > cb;
    if (a.predicted != b.predicted) return static_cast<int>(a.predicted) < static_cast<int>(b.predicted);
    return a.confidence > b.confidence;
}
} // namespace detail

/// Folds window predictions into one prediction per file line (1..line_count).
/// Lines no window covered are Keep with full confidence.
inline std::vector<LinePrediction> merge_window_predictions(int line_count,
                                                            std::span<const std::vector<LinePrediction>> windows) {
    std::vector<LinePrediction> out(static_cast<std::size_t>(line_count));
    std::vector<bool> seen(out.size(), false);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].line_index = static_cast<int>(i) + 1;
    for (const auto& w : windows) {
        for (const auto& p : w) {
            if (p.line_index < 1 || p.line_index > line_count) continue;
            auto idx = static_cast<std::size_t>(p.line_index - 1);
            if (!seen[idx] || detail::merge_beats(p, out[idx])) out[idx] = p;
            seen[idx] = true;
        }
    }
    return out;
}

/// Windows a whole file, labels each window, and merges.
inline std::vector<LinePrediction> label_file(const std::string& path, std::span<const std::string> file,
                                              const Prompt& prompt, const std::vector<PriorEdit>& priors,
                                              LineLabeler& labeler, const LocatorConfig& cfg) {
    std::vector<std::vector<LinePrediction>> per_window;
    for (auto& w : make_windows(path, file, cfg.window_size, cfg.stride)) {
        auto in = make_locator_input(std::move(w), prompt, priors, cfg.token_budget);
        per_window.push_back(predict_line_labels(in, labeler));
    }
    return merge_window_predictions(static_cast<int>(file.size()), per_window);
}

} // namespace editprop
