#pragma once

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "editprop/error.hpp"
#include "editprop/tokenizer.hpp"

namespace editprop {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Edit types
// ---------------------------------------------------------------------------

enum class EditType { Keep, Insert, Replace };

inline std::string_view tag(EditType t) {
    switch (t) {
    case EditType::Keep: return "<K>";
    case EditType::Insert: return "<I>";
    case EditType::Replace: return "<R>";
    }
    return "<K>";
}

inline EditType edit_type_from_tag(std::string_view s) {
    if (s == "<K>") return EditType::Keep;
    if (s == "<I>") return EditType::Insert;
    if (s == "<R>") return EditType::Replace;
    throw Error(ErrorCode::InvalidEdit, "unknown edit type tag '" + std::string(s) + "'");
}

inline void to_json(json& j, EditType t) { j = std::string(tag(t)); }
inline void from_json(const json& j, EditType& t) { t = edit_type_from_tag(j.get<std::string>()); }

// ---------------------------------------------------------------------------
// Paths and snapshots
// ---------------------------------------------------------------------------

/// Forward slashes, no empty / "." components; ".." and absolute paths are rejected.
inline std::string normalize_path(std::string_view raw) {
    std::string p(raw);
    std::replace(p.begin(), p.end(), '\\', '/');
    if (!p.empty() && p.front() == '/')
        throw Error(ErrorCode::InvalidEdit, "absolute path '" + p + "'");
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= p.size()) {
        auto end = p.find('/', start);
        if (end == std::string::npos) end = p.size();
        auto part = p.substr(start, end - start);
        if (part == "..") throw Error(ErrorCode::InvalidEdit, "path escapes root '" + p + "'");
        if (!part.empty() && part != ".") parts.push_back(part);
        start = end + 1;
    }
    if (parts.empty()) throw Error(ErrorCode::InvalidEdit, "empty path");
    std::string out;
    for (const auto& s : parts) {
        if (!out.empty()) out += '/';
        out += s;
    }
    return out;
}

struct ProjectSnapshot {
    std::string root_id;
    std::map<std::string, Lines> files;
    std::map<std::string, std::string> languages; // informational

    const Lines* find(const std::string& path) const {
        auto it = files.find(path);
        return it == files.end() ? nullptr : &it->second;
    }

    const Lines& at(const std::string& path) const {
        auto it = files.find(path);
        if (it == files.end()) throw Error(ErrorCode::NotFound, "no file '" + path + "' in snapshot");
        return it->second;
    }

    void add_file(std::string_view path, Lines lines) { files[normalize_path(path)] = std::move(lines); }

    friend bool operator==(const ProjectSnapshot&, const ProjectSnapshot&) = default;
};

inline void to_json(json& j, const ProjectSnapshot& s) {
    j = json{{"root_id", s.root_id}, {"files", s.files}, {"languages", s.languages}};
}

inline void from_json(const json& j, ProjectSnapshot& s) {
    s = {};
    s.root_id = j.value("root_id", std::string{});
    for (const auto& [path, lines] : j.at("files").items()) {
        auto norm = normalize_path(path);
        if (s.files.count(norm)) throw Error(ErrorCode::InvalidEdit, "duplicate path '" + norm + "'");
        s.files[norm] = lines.get<Lines>();
    }
    if (j.contains("languages")) s.languages = j.at("languages").get<std::map<std::string, std::string>>();
}

/// Splits text into lines; a trailing newline does not produce an empty last line.
inline Lines split_lines(std::string_view text) {
    Lines out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        start = end + 1;
    }
    return out;
}

struct Prompt {
    std::string text;

    bool empty() const noexcept { return text.empty(); }
    friend bool operator==(const Prompt&, const Prompt&) = default;
};

// ---------------------------------------------------------------------------
// Edits and hunks
// ---------------------------------------------------------------------------

/// One atomic edit. `anchor_line` is 1-based in the before-file: for a
/// Replace it is the first replaced line, for an Insert it is the position
/// the first inserted line will occupy (content goes after line anchor-1).
struct Edit {
    std::string file_path;
    int anchor_line = 1;
    EditType edit_type = EditType::Replace;
    Lines before_code;
    Lines after_code;

    void validate() const {
        if (anchor_line < 1) throw Error(ErrorCode::InvalidAnchor, "anchor_line must be >= 1");
        switch (edit_type) {
        case EditType::Insert:
            if (!before_code.empty() || after_code.empty())
                throw Error(ErrorCode::InvalidEdit, "insert requires empty before_code and non-empty after_code");
            break;
        case EditType::Replace:
            if (before_code.empty()) throw Error(ErrorCode::InvalidEdit, "replace requires non-empty before_code");
            break;
        case EditType::Keep:
            throw Error(ErrorCode::InvalidEdit, "an edit cannot have type Keep");
        }
    }

    /// The code an edit is judged by: before-code, or the inserted code for a pure insertion.
    const Lines& target_code() const { return before_code.empty() ? after_code : before_code; }

    friend bool operator==(const Edit&, const Edit&) = default;
};

inline void to_json(json& j, const Edit& e) {
    j = json{{"file_path", e.file_path},     {"anchor_line", e.anchor_line},
             {"edit_type", e.edit_type},     {"before_code", e.before_code},
             {"after_code", e.after_code}};
}

inline void from_json(const json& j, Edit& e) {
    e.file_path = normalize_path(j.at("file_path").get<std::string>());
    e.anchor_line = j.at("anchor_line").get<int>();
    e.edit_type = j.at("edit_type").get<EditType>();
    e.before_code = j.value("before_code", Lines{});
    e.after_code = j.value("after_code", Lines{});
    e.validate();
}

/// A contiguous changed region of one file, context excluded. For a pure
/// insertion `before_start` is the line after which content is inserted (0
/// for the head of the file); same convention for `after_start` of a pure
/// deletion. This is the unified-diff header convention.
struct Hunk {
    std::string file_path;
    int before_start = 0;
    Lines before_lines;
    int after_start = 0;
    Lines after_lines;

    bool is_insertion() const noexcept { return before_lines.empty(); }
    bool is_deletion() const noexcept { return after_lines.empty(); }

    /// Largest side, the "changed lines" count used by the commit filter.
    std::size_t changed_lines() const noexcept { return std::max(before_lines.size(), after_lines.size()); }

    void validate() const {
        if (before_lines.empty() && after_lines.empty())
            throw Error(ErrorCode::InvalidEdit, "hunk with neither removed nor added lines");
        if (before_start < 0 || after_start < 0) throw Error(ErrorCode::InvalidAnchor, "negative hunk start");
    }

    friend bool operator==(const Hunk&, const Hunk&) = default;
};

inline void to_json(json& j, const Hunk& h) {
    j = json{{"file_path", h.file_path},       {"before_start", h.before_start},
             {"before_lines", h.before_lines}, {"after_start", h.after_start},
             {"after_lines", h.after_lines}};
}

inline void from_json(const json& j, Hunk& h) {
    h.file_path = normalize_path(j.at("file_path").get<std::string>());
    h.before_start = j.at("before_start").get<int>();
    h.before_lines = j.value("before_lines", Lines{});
    h.after_start = j.value("after_start", 0);
    h.after_lines = j.value("after_lines", Lines{});
    h.validate();
}

inline Edit edit_from_hunk(const Hunk& h) {
    h.validate();
    Edit e;
    e.file_path = h.file_path;
    e.before_code = h.before_lines;
    e.after_code = h.after_lines;
    if (h.is_insertion()) {
        e.edit_type = EditType::Insert;
        e.anchor_line = h.before_start + 1;
    } else {
        e.edit_type = EditType::Replace;
        e.anchor_line = h.before_start;
    }
    return e;
}

/// Inverse of edit_from_hunk; `after_start` is left equal to the before
/// coordinate since an isolated edit has no other hunks shifting it.
inline Hunk hunk_from_edit(const Edit& e) {
    e.validate();
    Hunk h;
    h.file_path = e.file_path;
    h.before_lines = e.before_code;
    h.after_lines = e.after_code;
    if (e.edit_type == EditType::Insert) {
        h.before_start = e.anchor_line - 1;
        h.after_start = e.anchor_line;
    } else {
        h.before_start = e.anchor_line;
        h.after_start = e.after_code.empty() ? e.anchor_line - 1 : e.anchor_line;
    }
    return h;
}

/// An already-applied edit as seen by the locator and generator: the edit,
/// its relevance to the current target, and the lines around it in the file
/// it was applied to.
struct PriorEdit {
    Edit edit;
    double relevance = 1.0;
    Lines context_before; // nearest last
    Lines context_after;  // nearest first
};

/// Captures up to `context` lines on each side of `e` in `file_before`.
inline PriorEdit make_prior(const Edit& e, const Lines& file_before, int context = 3, double relevance = 1.0) {
    PriorEdit p{e, relevance, {}, {}};
    const int n = static_cast<int>(file_before.size());
    const int first = e.anchor_line;                                             // 1-based line after the context
    const int after = e.anchor_line + static_cast<int>(e.before_code.size());    // 1-based first line after
    for (int i = std::max(1, first - context); i < first && i <= n; ++i)
        p.context_before.push_back(file_before[static_cast<std::size_t>(i - 1)]);
    for (int i = after; i < after + context && i <= n; ++i)
        if (i >= 1) p.context_after.push_back(file_before[static_cast<std::size_t>(i - 1)]);
    return p;
}

// ---------------------------------------------------------------------------
// Line labels
// ---------------------------------------------------------------------------

/// Labels contributed by one hunk, keyed by 1-based before-line index. A
/// pure insertion yields a single Insert on the line it follows (0 = head).
inline std::vector<std::pair<int, EditType>> line_labels_from_hunk(const Hunk& h) {
    std::vector<std::pair<int, EditType>> out;
    if (h.is_insertion()) {
        if (h.before_start < 0) throw Error(ErrorCode::InvalidAnchor, "insertion anchor before file head");
        out.emplace_back(h.before_start, EditType::Insert);
        return out;
    }
    if (h.before_start < 1) throw Error(ErrorCode::InvalidAnchor, "replacement must start at line >= 1");
    for (std::size_t i = 0; i < h.before_lines.size(); ++i)
        out.emplace_back(h.before_start + static_cast<int>(i), EditType::Replace);
    return out;
}

/// Total labelling of a file from a set of hunks. Index 0 is the synthetic
/// head line, indices 1..line_count are file lines; unlabelled lines are Keep.
/// Overlapping Replace ranges are rejected; an Insert landing on a replaced
/// line is absorbed by the Replace.
inline std::vector<EditType> merge_line_labels(int line_count, std::span<const Hunk> hunks) {
    std::vector<EditType> labels(static_cast<std::size_t>(line_count) + 1, EditType::Keep);
    std::vector<bool> replaced(labels.size(), false);
    for (const auto& h : hunks) {
        if (h.is_insertion()) continue;
        for (auto [line, t] : line_labels_from_hunk(h)) {
            if (line > line_count) throw Error(ErrorCode::InvalidAnchor, "hunk extends past end of file");
            auto idx = static_cast<std::size_t>(line);
            if (replaced[idx])
                throw Error(ErrorCode::InvalidEdit, "overlapping replace hunks at line " + std::to_string(line));
            replaced[idx] = true;
            labels[idx] = EditType::Replace;
        }
    }
    for (const auto& h : hunks) {
        if (!h.is_insertion()) continue;
        for (auto [line, t] : line_labels_from_hunk(h)) {
            if (line > line_count) throw Error(ErrorCode::InvalidAnchor, "insertion past end of file");
            auto idx = static_cast<std::size_t>(line);
            if (!replaced[idx]) labels[idx] = EditType::Insert;
        }
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Applying edits
// ---------------------------------------------------------------------------

inline Lines apply_edit(Lines file, const Edit& e) {
    e.validate();
    const auto n = file.size();
    const auto anchor = static_cast<std::size_t>(e.anchor_line);
    if (e.edit_type == EditType::Insert) {
        if (anchor > n + 1)
            throw Error(ErrorCode::StaleEdit, "insert anchor " + std::to_string(anchor) + " past end of " +
                                                  e.file_path + " (" + std::to_string(n) + " lines)");
        file.insert(file.begin() + static_cast<std::ptrdiff_t>(anchor - 1), e.after_code.begin(),
                    e.after_code.end());
        return file;
    }
    const auto len = e.before_code.size();
    if (anchor - 1 + len > n)
        throw Error(ErrorCode::StaleEdit, "replace range past end of " + e.file_path);
    for (std::size_t i = 0; i < len; ++i) {
        if (file[anchor - 1 + i] != e.before_code[i])
            throw Error(ErrorCode::StaleEdit, e.file_path + ":" + std::to_string(anchor + i) +
                                                  " no longer matches the edit's before_code");
    }
    auto first = file.begin() + static_cast<std::ptrdiff_t>(anchor - 1);
    file.erase(first, first + static_cast<std::ptrdiff_t>(len));
    file.insert(file.begin() + static_cast<std::ptrdiff_t>(anchor - 1), e.after_code.begin(), e.after_code.end());
    return file;
}

inline ProjectSnapshot apply_edit(ProjectSnapshot snap, const Edit& e) {
    auto it = snap.files.find(e.file_path);
    if (it == snap.files.end()) {
        if (e.edit_type != EditType::Insert || e.anchor_line != 1)
            throw Error(ErrorCode::StaleEdit, "no file '" + e.file_path + "' in snapshot");
        snap.files[e.file_path] = e.after_code;
        return snap;
    }
    it->second = apply_edit(std::move(it->second), e);
    return snap;
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

struct Segment {
    std::string file_path;
    int start_line = 1;
    Lines lines;
    std::size_t token_count = 0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Greedy whole-line tiling under a token budget. A line whose own token
/// count exceeds the budget becomes a segment by itself.
inline std::vector<Segment> split_segments(const std::string& path, std::span<const std::string> lines,
                                           std::size_t max_segment_tokens) {
    if (max_segment_tokens < 16) throw Error(ErrorCode::ConfigError, "max_segment_tokens must be >= 16");
    std::vector<Segment> out;
    Segment cur{path, 1, {}, 0};
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto t = count_tokens(lines[i]);
        if (!cur.lines.empty() && cur.token_count + t > max_segment_tokens) {
            out.push_back(std::move(cur));
            cur = Segment{path, static_cast<int>(i) + 1, {}, 0};
        }
        cur.lines.push_back(lines[i]);
        cur.token_count += t;
    }
    if (!cur.lines.empty()) out.push_back(std::move(cur));
    return out;
}

// ---------------------------------------------------------------------------
// Unified diff
// ---------------------------------------------------------------------------

/// One file section of a diff. Renames and binary changes come back with
/// `skipped` set and no hunks.
struct DiffFile {
    std::string path;
    std::vector<Hunk> hunks;
    bool skipped = false;
    std::string skip_reason;

    friend bool operator==(const DiffFile&, const DiffFile&) = default;
};

namespace detail {

inline bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

inline std::string strip_diff_path(std::string_view raw) {
    auto tab = raw.find('\t');
    if (tab != std::string_view::npos) raw = raw.substr(0, tab);
    while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\r')) raw.remove_suffix(1);
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') raw = raw.substr(1, raw.size() - 2);
    if (raw == "/dev/null") return std::string(raw);
    if (starts_with(raw, "a/") || starts_with(raw, "b/")) raw.remove_prefix(2);
    return std::string(raw);
}

inline bool parse_int(std::string_view s, int& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

// "-12,3" / "+12" -> start, count
inline bool parse_range(std::string_view s, char sign, int& start, int& count) {
    if (s.empty() || s.front() != sign) return false;
    s.remove_prefix(1);
    auto comma = s.find(',');
    if (comma == std::string_view::npos) {
        count = 1;
        return parse_int(s, start);
    }
    return parse_int(s.substr(0, comma), start) && parse_int(s.substr(comma + 1), count);
}

// Hunks are placed on a doubled line axis: replaced lines L..M occupy
// [2L, 2M], an insertion after line L is the point 2L+1. Any intersection is
// an overlap.
inline void check_overlaps(std::vector<Hunk>& hunks, std::size_t line_no) {
    auto lo = [](const Hunk& h) { return h.is_insertion() ? 2 * h.before_start + 1 : 2 * h.before_start; };
    auto hi = [](const Hunk& h) {
        return h.is_insertion() ? 2 * h.before_start + 1
                                : 2 * (h.before_start + static_cast<int>(h.before_lines.size()) - 1);
    };
    std::stable_sort(hunks.begin(), hunks.end(), [&](const Hunk& a, const Hunk& b) { return lo(a) < lo(b); });
    for (std::size_t i = 1; i < hunks.size(); ++i)
        if (lo(hunks[i]) <= hi(hunks[i - 1]))
            throw MalformedDiff(line_no, "overlapping hunks in " + hunks[i].file_path);
}

} // namespace detail

/// Parses GNU/git unified diffs. Each contiguous group of removed/added lines
/// becomes a Hunk; context lines only advance the line counters, so an @@
/// region without interior context yields exactly one Hunk.
inline std::vector<DiffFile> parse_unified_diff(std::string_view diff_text) {
    std::vector<DiffFile> files;
    auto lines = split_lines(diff_text);
    DiffFile* cur = nullptr;
    std::string minus_path;
    bool in_git_header = false;

    auto finish = [&](std::size_t line_no) {
        if (cur != nullptr && !cur->skipped) detail::check_overlaps(cur->hunks, line_no);
    };

    std::size_t i = 0;
    while (i < lines.size()) {
        const std::string_view line = lines[i];
        const std::size_t line_no = i + 1;
        if (detail::starts_with(line, "diff --git ")) {
            finish(line_no);
            files.emplace_back();
            cur = &files.back();
            in_git_header = true;
            // best-effort path until ---/+++ arrive: take the b/ side
            auto rest = line.substr(11);
            auto sp = rest.rfind(" b/");
            cur->path = detail::strip_diff_path(sp == std::string_view::npos ? rest : rest.substr(sp + 1));
            ++i;
            continue;
        }
        if (detail::starts_with(line, "--- ") && i + 1 < lines.size() &&
            detail::starts_with(lines[i + 1], "+++ ")) {
            if (!in_git_header) {
                finish(line_no);
                files.emplace_back();
                cur = &files.back();
            }
            in_git_header = false;
            minus_path = detail::strip_diff_path(line.substr(4));
            auto plus_path = detail::strip_diff_path(std::string_view(lines[i + 1]).substr(4));
            auto chosen = plus_path == "/dev/null" ? minus_path : plus_path;
            if (chosen == "/dev/null") throw MalformedDiff(line_no, "both sides are /dev/null");
            cur->path = normalize_path(chosen);
            i += 2;
            continue;
        }
        if (detail::starts_with(line, "Binary files ") || detail::starts_with(line, "GIT binary patch")) {
            if (cur == nullptr) throw MalformedDiff(line_no, "binary marker outside a file section");
            cur->skipped = true;
            cur->skip_reason = "binary";
            in_git_header = false;
            ++i;
            continue;
        }
        if (detail::starts_with(line, "rename from ") || detail::starts_with(line, "rename to ") ||
            detail::starts_with(line, "copy from ") || detail::starts_with(line, "copy to ")) {
            if (cur == nullptr) throw MalformedDiff(line_no, "rename marker outside a file section");
            cur->skipped = true;
            cur->skip_reason = detail::starts_with(line, "copy") ? "copy" : "rename";
            if (detail::starts_with(line, "rename to ") || detail::starts_with(line, "copy to "))
                cur->path = normalize_path(line.substr(line.find(" to ") + 4));
            ++i;
            continue;
        }
        if (detail::starts_with(line, "@@")) {
            if (cur == nullptr) throw MalformedDiff(line_no, "hunk header before any file header");
            in_git_header = false;
            auto close = line.find("@@", 2);
            if (close == std::string_view::npos) throw MalformedDiff(line_no, "unterminated hunk header");
            auto ranges = line.substr(2, close - 2);
            while (!ranges.empty() && ranges.front() == ' ') ranges.remove_prefix(1);
            while (!ranges.empty() && ranges.back() == ' ') ranges.remove_suffix(1);
            auto sp = ranges.find(' ');
            int bstart = 0, bcount = 0, astart = 0, acount = 0;
            if (sp == std::string_view::npos || !detail::parse_range(ranges.substr(0, sp), '-', bstart, bcount) ||
                !detail::parse_range(ranges.substr(sp + 1), '+', astart, acount) || bstart < 0 || astart < 0 ||
                bcount < 0 || acount < 0)
                throw MalformedDiff(line_no, "bad hunk header '" + std::string(line) + "'");
            if (bcount == 0 && acount == 0) throw MalformedDiff(line_no, "empty hunk");

            int b = bcount == 0 ? bstart + 1 : bstart;
            int a = acount == 0 ? astart + 1 : astart;
            int seen_b = 0, seen_a = 0;
            Hunk group;
            int gb = b, ga = a;
            auto flush = [&] {
                if (group.before_lines.empty() && group.after_lines.empty()) return;
                group.file_path = cur->path;
                group.before_start = group.before_lines.empty() ? gb - 1 : gb;
                group.after_start = group.after_lines.empty() ? ga - 1 : ga;
                cur->hunks.push_back(std::move(group));
                group = Hunk{};
            };
            ++i;
            while (i < lines.size() && (seen_b < bcount || seen_a < acount)) {
                std::string_view body = lines[i];
                if (body.empty() || body.front() == ' ') {
                    flush();
                    ++b, ++a, ++seen_b, ++seen_a;
                    gb = b, ga = a;
                } else if (body.front() == '-') {
                    if (group.before_lines.empty() && group.after_lines.empty()) gb = b, ga = a;
                    group.before_lines.emplace_back(body.substr(1));
                    ++b, ++seen_b;
                } else if (body.front() == '+') {
                    if (group.before_lines.empty() && group.after_lines.empty()) gb = b, ga = a;
                    group.after_lines.emplace_back(body.substr(1));
                    ++a, ++seen_a;
                } else if (body.front() == '\\') {
                    // "\ No newline at end of file"
                } else {
                    throw MalformedDiff(i + 1, "unexpected line inside hunk body");
                }
                ++i;
            }
            while (i < lines.size() && detail::starts_with(lines[i], "\\")) ++i;
            if (seen_b != bcount || seen_a != acount)
                throw MalformedDiff(line_no, "hunk body does not match header counts");
            flush();
            continue;
        }
        // index/mode/similarity lines and free text between sections
        if (detail::starts_with(line, "similarity index ") && cur != nullptr) {
            cur->skipped = true;
            if (cur->skip_reason.empty()) cur->skip_reason = "rename";
        }
        ++i;
    }
    finish(lines.size());
    for (auto& f : files)
        if (f.skipped) f.hunks.clear();
    return files;
}

/// Renders zero-context unified diff text that parse_unified_diff reads back
/// to the same hunks.
inline std::string render_unified_diff(std::span<const DiffFile> files) {
    std::string out;
    for (const auto& f : files) {
        out += "diff --git a/" + f.path + " b/" + f.path + "\n";
        if (f.skipped) {
            if (f.skip_reason == "binary")
                out += "Binary files a/" + f.path + " and b/" + f.path + " differ\n";
            else
                out += "rename from " + f.path + "\nrename to " + f.path + "\n";
            continue;
        }
        out += "--- a/" + f.path + "\n+++ b/" + f.path + "\n";
        for (const auto& h : f.hunks) {
            out += "@@ -" + std::to_string(h.before_start) + "," + std::to_string(h.before_lines.size()) + " +" +
                   std::to_string(h.after_start) + "," + std::to_string(h.after_lines.size()) + " @@\n";
            for (const auto& l : h.before_lines) out += "-" + l + "\n";
            for (const auto& l : h.after_lines) out += "+" + l + "\n";
        }
    }
    return out;
}

} // namespace editprop
