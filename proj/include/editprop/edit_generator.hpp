#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "editprop/edit_model.hpp"
#include "editprop/error.hpp"
#include "editprop/line_locator.hpp"
#include "editprop/relevance.hpp"
#include "editprop/tokenizer.hpp"

namespace editprop {

/// Consecutive lines sharing one edit type plus up to `c` Keep lines of
/// context per side. An Insert region's single target line is the line the
/// new content follows; start_line 0 with no target lines means the file head.
struct HunkRegion {
    std::string file_path;
    EditType edit_type = EditType::Replace;
    int start_line = 1;
    Lines target_lines;
    Lines context_before;
    Lines context_after;

    int end_line() const { return start_line + static_cast<int>(target_lines.size()) - 1; }

    friend bool operator==(const HunkRegion&, const HunkRegion&) = default;
};

inline void to_json(json& j, const HunkRegion& r) {
    j = json{{"file_path", r.file_path},           {"edit_type", r.edit_type},
             {"start_line", r.start_line},         {"target_lines", r.target_lines},
             {"context_before", r.context_before}, {"context_after", r.context_after}};
}

inline void from_json(const json& j, HunkRegion& r) {
    r.file_path = j.at("file_path").get<std::string>();
    r.edit_type = j.at("edit_type").get<EditType>();
    r.start_line = j.at("start_line").get<int>();
    r.target_lines = j.at("target_lines").get<Lines>();
    r.context_before = j.value("context_before", Lines{});
    r.context_after = j.value("context_after", Lines{});
}

/// Maximal runs of equal non-Keep labels become regions; every Insert label
/// is its own region. `labels` must hold one prediction per file line, in
/// order. `head_insert` adds an insertion region before line 1.
inline std::vector<HunkRegion> group_regions(const std::string& path, std::span<const std::string> file,
                                             std::span<const LinePrediction> labels, int c,
                                             bool head_insert = false) {
    if (labels.size() != file.size())
        throw Error(ErrorCode::PreconditionFailed, "labels must cover every line of the file");
    const int n = static_cast<int>(file.size());
    auto type_at = [&](int line) { return labels[static_cast<std::size_t>(line - 1)].predicted; };
    auto fill_context = [&](HunkRegion& r, int first, int last) {
        Lines before;
        for (int i = first - 1; i >= 1 && static_cast<int>(before.size()) < c && type_at(i) == EditType::Keep; --i)
            before.push_back(file[static_cast<std::size_t>(i - 1)]);
        std::reverse(before.begin(), before.end());
        r.context_before = std::move(before);
        for (int i = last + 1; i <= n && static_cast<int>(r.context_after.size()) < c && type_at(i) == EditType::Keep;
             ++i)
            r.context_after.push_back(file[static_cast<std::size_t>(i - 1)]);
    };

    std::vector<HunkRegion> out;
    if (head_insert) {
        HunkRegion r{path, EditType::Insert, 0, {}, {}, {}};
        fill_context(r, 1, 0);
        out.push_back(std::move(r));
    }
    int i = 1;
    while (i <= n) {
        auto t = type_at(i);
        if (t == EditType::Keep) {
            ++i;
            continue;
        }
        int j = i;
        if (t == EditType::Replace)
            while (j + 1 <= n && type_at(j + 1) == EditType::Replace) ++j;
        HunkRegion r{path, t, i, {}, {}, {}};
        for (int k = i; k <= j; ++k) r.target_lines.push_back(file[static_cast<std::size_t>(k - 1)]);
        fill_context(r, i, j);
        out.push_back(std::move(r));
        i = j + 1;
    }
    return out;
}

/// Builds the region the generator sees for a known hunk location.
inline HunkRegion region_for_hunk(const Hunk& h, std::span<const std::string> file, int c) {
    HunkRegion r;
    r.file_path = h.file_path;
    const int n = static_cast<int>(file.size());
    int first = 0, last = 0;
    if (h.is_insertion()) {
        r.edit_type = EditType::Insert;
        r.start_line = h.before_start;
        if (h.before_start >= 1 && h.before_start <= n)
            r.target_lines.push_back(file[static_cast<std::size_t>(h.before_start - 1)]);
        first = h.before_start;
        last = h.before_start;
        if (h.before_start == 0) first = 1, last = 0;
    } else {
        r.edit_type = EditType::Replace;
        r.start_line = h.before_start;
        r.target_lines = h.before_lines;
        first = h.before_start;
        last = h.before_start + static_cast<int>(h.before_lines.size()) - 1;
    }
    for (int i = std::max(1, first - c); i < first && i <= n; ++i)
        r.context_before.push_back(file[static_cast<std::size_t>(i - 1)]);
    for (int i = last + 1; i <= std::min(n, last + c); ++i)
        r.context_after.push_back(file[static_cast<std::size_t>(i - 1)]);
    return r;
}

/// The code at a region, as seen by prior-edit selection.
inline TargetLocation target_of(const HunkRegion& r) {
    TargetLocation t{r.file_path, r.start_line, r.target_lines};
    // An insertion point is judged by the line it follows and the line it precedes.
    if (r.edit_type == EditType::Insert) {
        t.line = r.start_line + 1;
        if (!r.context_after.empty()) t.code.push_back(r.context_after.front());
    }
    return t;
}

/// `<code-window>` (tag line-tokens)* over context and target lines, then
/// the same prompt / prior-edit sections as the locator input.
inline std::vector<std::string> serialize_generator_input(const HunkRegion& region, const Prompt& prompt,
                                                          std::span<const PriorEdit> priors, std::size_t budget) {
    std::vector<std::string> ws{tags::code_window};
    auto add = [&](EditType t, const std::string& line) {
        ws.emplace_back(tag(t));
        auto toks = tokenize(line);
        ws.insert(ws.end(), toks.begin(), toks.end());
    };
    for (const auto& l : region.context_before) add(EditType::Keep, l);
    for (const auto& l : region.target_lines) add(region.edit_type, l);
    for (const auto& l : region.context_after) add(EditType::Keep, l);
    return detail::assemble(std::move(ws), prompt, priors, budget, ErrorCode::RegionTooLarge);
}

struct GeneratorInput {
    HunkRegion region;
    Prompt prompt;
    std::vector<PriorEdit> priors; // most relevant first
    std::vector<std::string> serialized;
};

inline GeneratorInput make_generator_input(HunkRegion region, Prompt prompt, std::vector<PriorEdit> priors,
                                           std::size_t budget = 4096) {
    GeneratorInput in{std::move(region), std::move(prompt), std::move(priors), {}};
    in.serialized = serialize_generator_input(in.region, in.prompt, in.priors, budget);
    return in;
}

/// Generated content for a region: the replacement lines of a Replace region
/// or the new lines of an Insert region.
struct EditCandidate {
    int rank = 1;
    Lines content;
    double confidence = 0.0;

    friend bool operator==(const EditCandidate&, const EditCandidate&) = default;
};

inline void to_json(json& j, const EditCandidate& c) {
    j = json{{"rank", c.rank}, {"content", c.content}, {"confidence", c.confidence}};
}

/// Produces edit content options. A learned seq2seq backend receives
/// `input.serialized` and runs its own beam search; the engine only enforces
/// the ranked, deduplicated, at-most-k contract in generate_candidates.
class EditGenerator {
public:
    virtual ~EditGenerator() = default;
    virtual std::vector<EditCandidate> generate(const GeneratorInput& input, int k) = 0;
};

namespace detail {

inline const std::string kNewline = "\n";

inline std::vector<Token> to_stream(std::span<const std::string> lines) {
    std::vector<Token> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out.push_back(Token{kNewline, ""});
        auto t = lex_line(lines[i]);
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

inline Lines render_stream(std::span<const Token> stream) {
    Lines out;
    if (stream.empty()) return out;
    out.emplace_back();
    for (const auto& t : stream) {
        if (t.text == kNewline) {
            out.emplace_back();
            continue;
        }
        out.back() += t.space_before;
        out.back() += t.text;
    }
    return out;
}

/// Longest common subsequence of token texts, as matched index pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> lcs_pairs(std::span<const Token> a, std::span<const Token> b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (n == 0 || m == 0 || n * m > 4'000'000) return out;
    std::vector<std::vector<std::uint32_t>> dp(n + 1, std::vector<std::uint32_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            dp[i][j] = a[i].text == b[j].text ? dp[i + 1][j + 1] + 1 : std::max(dp[i + 1][j], dp[i][j + 1]);
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[i].text == b[j].text) {
            out.emplace_back(i, j);
            ++i, ++j;
        } else if (dp[i + 1][j] >= dp[i][j + 1]) {
            ++i;
        } else {
            ++j;
        }
    }
    return out;
}

struct Chunk {
    std::size_t a_begin, a_end, b_begin, b_end;
};

/// Unmatched stretches between consecutive LCS matches.
inline std::vector<Chunk> diff_chunks(std::span<const Token> a, std::span<const Token> b) {
    auto pairs = lcs_pairs(a, b);
    pairs.emplace_back(a.size(), b.size());
    std::vector<Chunk> out;
    std::size_t pa = 0, pb = 0;
    for (auto [ia, ib] : pairs) {
        if (ia > pa || ib > pb) out.push_back({pa, ia, pb, ib});
        pa = ia + 1;
        pb = ib + 1;
    }
    return out;
}

/// Identifier renaming learned from aligning `from` with `to`: x -> y when x
/// is aligned only ever against the same single identifier y and never
/// against itself, and no other identifier maps to y.
inline std::map<std::string, std::string> rename_map(std::span<const Token> from, std::span<const Token> to) {
    std::set<std::string> self;
    for (auto [i, j] : lcs_pairs(from, to)) self.insert(from[i].text);
    std::map<std::string, std::set<std::string>> cand;
    for (const auto& c : diff_chunks(from, to)) {
        if (c.a_end - c.a_begin != 1 || c.b_end - c.b_begin != 1) continue;
        const auto& x = from[c.a_begin].text;
        const auto& y = to[c.b_begin].text;
        if (is_identifier(x) && is_identifier(y)) cand[x].insert(y);
    }
    std::map<std::string, std::string> out;
    std::map<std::string, int> target_uses;
    for (const auto& [x, ys] : cand) {
        if (self.count(x) || ys.size() != 1) continue;
        out[x] = *ys.begin();
        ++target_uses[*ys.begin()];
    }
    for (auto it = out.begin(); it != out.end();) {
        if (target_uses[it->second] > 1)
            it = out.erase(it);
        else
            ++it;
    }
    return out;
}

inline void apply_renames(std::vector<Token>& toks, const std::map<std::string, std::string>& renames) {
    for (auto& t : toks) {
        auto it = renames.find(t.text);
        if (it != renames.end()) t.text = it->second;
    }
}

inline std::string first_indent(std::span<const std::string> lines) {
    for (const auto& l : lines)
        if (!tokenize(l).empty()) return std::string(indentation(l));
    return {};
}

inline Lines reindent(Lines lines, const std::string& from, const std::string& to) {
    if (from == to) return lines;
    for (auto& l : lines) {
        if (l.compare(0, from.size(), from) == 0 && !tokenize(l).empty()) l = to + l.substr(from.size());
    }
    return lines;
}

inline Lines rename_lines(std::span<const std::string> lines, const std::map<std::string, std::string>& renames) {
    auto s = to_stream(lines);
    apply_renames(s, renames);
    auto out = render_stream(s);
    // blank lines produce no tokens; keep the original line count
    if (out.size() != lines.size()) return Lines(lines.begin(), lines.end());
    return out;
}

struct SubstitutionRule {
    std::optional<std::string> left;
    std::vector<std::string> from;
    std::optional<std::string> right;
    std::vector<Token> to;
};

inline std::vector<SubstitutionRule> substitution_rules(std::span<const Token> before, std::span<const Token> after) {
    std::vector<SubstitutionRule> rules;
    for (const auto& c : diff_chunks(before, after)) {
        SubstitutionRule r;
        if (c.a_begin > 0) r.left = before[c.a_begin - 1].text;
        if (c.a_end < before.size()) r.right = before[c.a_end].text;
        for (std::size_t i = c.a_begin; i < c.a_end; ++i) r.from.push_back(before[i].text);
        r.to.assign(after.begin() + static_cast<std::ptrdiff_t>(c.b_begin),
                    after.begin() + static_cast<std::ptrdiff_t>(c.b_end));
        if (r.from.empty() && (!r.left || !r.right)) continue;
        rules.push_back(std::move(r));
    }
    return rules;
}

/// Applies every rule wherever it matches (with its one-token anchors),
/// scanning left to right without overlapping rewrites.
inline std::optional<std::vector<Token>> apply_rules(std::span<const Token> target,
                                                     std::span<const SubstitutionRule> rules) {
    std::vector<Token> out;
    bool applied = false;
    std::size_t p = 0;
    auto left_ok = [&](const SubstitutionRule& r) { return !r.left || (p > 0 && target[p - 1].text == *r.left); };
    while (p < target.size()) {
        bool done = false;
        for (const auto& r : rules) {
            if (r.from.empty() || p + r.from.size() > target.size() || !left_ok(r)) continue;
            bool eq = true;
            for (std::size_t i = 0; i < r.from.size() && eq; ++i) eq = target[p + i].text == r.from[i];
            if (!eq) continue;
            const std::size_t end = p + r.from.size();
            if (r.right && (end >= target.size() || target[end].text != *r.right)) continue;
            auto repl = r.to;
            if (!repl.empty() && repl.front().text != kNewline) repl.front().space_before = target[p].space_before;
            out.insert(out.end(), repl.begin(), repl.end());
            p = end;
            applied = done = true;
            break;
        }
        if (done) continue;
        for (const auto& r : rules) {
            if (!r.from.empty() || !left_ok(r) || target[p].text != *r.right) continue;
            out.insert(out.end(), r.to.begin(), r.to.end());
            applied = true;
            break;
        }
        out.push_back(target[p]);
        ++p;
    }
    if (!applied) return std::nullopt;
    return out;
}

} // namespace detail

/// Default generator: transfers the change of each relevant prior edit onto
/// the region.
///  - Replace prior whose before-code resembles the region (token Jaccard >=
///    template_threshold): the prior's after-code, identifiers renamed by
///    aligning the prior's before-code with the region.
///  - Replace prior: the token substitution script before -> after (LCS
///    alignment), applied wherever it matches in the region.
///  - Insert prior on an Insert region: the inserted lines, identifiers
///    renamed by aligning the prior's anchor context with the region's.
/// Each candidate's confidence is the relevance of its source prior.
class PatternTransferGenerator final : public EditGenerator {
public:
    explicit PatternTransferGenerator(double template_threshold = 0.5) : template_threshold_(template_threshold) {}

    std::vector<EditCandidate> generate(const GeneratorInput& input, int k) override {
        if (input.priors.empty()) throw Error(ErrorCode::NoCandidate, "no prior edits to transfer from");
        const auto& region = input.region;
        std::vector<const PriorEdit*> order;
        for (const auto& p : input.priors) order.push_back(&p);
        std::stable_sort(order.begin(), order.end(),
                         [](const PriorEdit* a, const PriorEdit* b) { return a->relevance > b->relevance; });

        std::vector<EditCandidate> out;
        for (const PriorEdit* p : order) {
            for (auto& content : transfer(*p, region)) out.push_back({0, std::move(content), p->relevance});
            if (static_cast<int>(out.size()) >= 4 * k + 8) break;
        }
        return out;
    }

private:
    std::vector<Lines> transfer(const PriorEdit& p, const HunkRegion& region) const {
        std::vector<Lines> out;
        const auto& e = p.edit;
        if (region.edit_type == EditType::Replace && e.edit_type == EditType::Replace) {
            auto prior_before = detail::to_stream(e.before_code);
            auto target = detail::to_stream(region.target_lines);
            auto renames = detail::rename_map(prior_before, target);
            auto prior_tokens = tokenize_lines(e.before_code);
            auto region_tokens = tokenize_lines(region.target_lines);
            if (token_jaccard(prior_tokens, region_tokens) >= template_threshold_) {
                auto lines = detail::rename_lines(e.after_code, renames);
                out.push_back(detail::reindent(std::move(lines), detail::first_indent(e.before_code),
                                               detail::first_indent(region.target_lines)));
            }
            auto rules = detail::substitution_rules(prior_before, detail::to_stream(e.after_code));
            for (auto& r : rules) {
                for (auto& t : r.from) {
                    auto it = renames.find(t);
                    if (it != renames.end()) t = it->second;
                }
                for (auto* anchor : {&r.left, &r.right}) {
                    if (!*anchor) continue;
                    auto it = renames.find(**anchor);
                    if (it != renames.end()) *anchor = it->second;
                }
                detail::apply_renames(r.to, renames);
            }
            if (auto rewritten = detail::apply_rules(target, rules)) out.push_back(detail::render_stream(*rewritten));
        } else if (region.edit_type == EditType::Insert && e.edit_type == EditType::Insert) {
            Lines prior_ctx, target_ctx;
            if (!p.context_before.empty()) prior_ctx.push_back(p.context_before.back());
            if (!p.context_after.empty()) prior_ctx.push_back(p.context_after.front());
            if (!region.target_lines.empty()) target_ctx.push_back(region.target_lines.front());
            if (!region.context_after.empty()) target_ctx.push_back(region.context_after.front());
            auto renames = detail::rename_map(detail::to_stream(prior_ctx), detail::to_stream(target_ctx));
            auto lines = detail::rename_lines(e.after_code, renames);
            std::string from_indent, to_indent;
            if (!p.context_after.empty() && !region.context_after.empty()) {
                from_indent = detail::first_indent(std::span(p.context_after).first(1));
                to_indent = detail::first_indent(std::span(region.context_after).first(1));
            } else if (!p.context_before.empty() && !region.target_lines.empty()) {
                from_indent = detail::first_indent(std::span(p.context_before).last(1));
                to_indent = detail::first_indent(std::span(region.target_lines).first(1));
            }
            out.push_back(detail::reindent(std::move(lines), from_indent, to_indent));
        }
        return out;
    }

    double template_threshold_;
};

/// Runs the backend and enforces the candidate contract: at most k,
/// deduplicated by content, no-op rewrites dropped, ranks 1..n with
/// non-increasing confidence.
inline std::vector<EditCandidate> generate_candidates(const GeneratorInput& input, EditGenerator& backend, int k) {
    if (k < 1) throw Error(ErrorCode::PreconditionFailed, "k must be >= 1");
    auto raw = backend.generate(input, k);
    std::stable_sort(raw.begin(), raw.end(),
                     [](const EditCandidate& a, const EditCandidate& b) { return a.confidence > b.confidence; });
    const Lines noop = input.region.edit_type == EditType::Replace ? input.region.target_lines : Lines{};
    std::vector<EditCandidate> out;
    std::set<std::vector<std::string>> seen;
    for (auto& c : raw) {
        if (c.content == noop) continue;
        if (!seen.insert(c.content).second) continue;
        c.rank = static_cast<int>(out.size()) + 1;
        out.push_back(std::move(c));
        if (static_cast<int>(out.size()) == k) break;
    }
    return out;
}

/// Turns an accepted candidate (or user-modified content) into an Edit at the region.
inline Edit edit_from_region(const HunkRegion& r, Lines content) {
    Edit e;
    e.file_path = r.file_path;
    if (r.edit_type == EditType::Insert) {
        e.edit_type = EditType::Insert;
        e.anchor_line = r.start_line + 1;
        e.after_code = std::move(content);
    } else {
        e.edit_type = EditType::Replace;
        e.anchor_line = r.start_line;
        e.before_code = r.target_lines;
        e.after_code = std::move(content);
    }
    e.validate();
    return e;
}

} // namespace editprop
