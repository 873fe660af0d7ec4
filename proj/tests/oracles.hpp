#pragma once

// Brute-force reference implementations used to cross-check the library
// metrics. Deliberately naive: vectors and linear scans, no maps, no shared
// helpers with the code under test.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Toks = std::vector<std::string>;

/// Whitespace split of every line, concatenated.
inline Toks words(const std::vector<std::string>& lines) {
    Toks out;
    for (const auto& l : lines) {
        std::istringstream in(l);
        for (std::string w; in >> w;) out.push_back(w);
    }
    return out;
}

inline bool same_gram(const Toks& a, std::size_t i, const Toks& b, std::size_t j, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k)
        if (a[i + k] != b[j + k]) return false;
    return true;
}

inline std::size_t occurrences(const Toks& hay, const Toks& gram_src, std::size_t at, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t j = 0; j + n <= hay.size(); ++j)
        if (same_gram(hay, j, gram_src, at, n)) ++c;
    return c;
}

/// Smoothed sentence BLEU-4 on whitespace tokens, times 100.
inline double bleu(const Toks& cand, const Toks& ref) {
    if (cand.empty()) return 0.0;
    double logp = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i + n <= cand.size(); ++i) {
            // count each distinct candidate gram once, at its first position
            bool first = true;
            for (std::size_t p = 0; p < i; ++p)
                if (same_gram(cand, p, cand, i, n)) first = false;
            if (!first) continue;
            double in_cand = static_cast<double>(occurrences(cand, cand, i, n));
            double in_ref = static_cast<double>(occurrences(ref, cand, i, n));
            num += in_cand < in_ref ? in_cand : in_ref;
            den += in_cand;
        }
        if (n >= 2) {
            num += 1;
            den += 1;
        }
        if (num == 0 || den == 0) return 0.0;
        logp += 0.25 * std::log(num / den);
    }
    double lc = static_cast<double>(cand.size()), lr = static_cast<double>(ref.size());
    double bp = lc < lr ? std::exp(1 - lr / lc) : 1.0;
    return 100 * bp * std::exp(logp);
}

/// Share of (candidate, reference) pairs that are token-identical.
inline double emr(const std::vector<Toks>& cands, const std::vector<Toks>& refs) {
    double hit = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        bool eq = cands[i].size() == refs[i].size();
        for (std::size_t k = 0; eq && k < cands[i].size(); ++k) eq = cands[i][k] == refs[i][k];
        if (eq) hit += 1;
    }
    return cands.empty() ? 0.0 : hit / static_cast<double>(cands.size());
}

/// File precision/recall over duplicate-free path lists.
inline void file_pr(const Toks& pred, const Toks& gt, double& precision, double& recall) {
    double hit = 0;
    for (const auto& p : pred)
        for (const auto& g : gt)
            if (p == g) hit += 1;
    precision = pred.empty() ? 1.0 : hit / static_cast<double>(pred.size());
    recall = hit / static_cast<double>(gt.size());
}

/// Macro precision/recall over classes 0..2 from paired label lists. A
/// class that appears on neither side scores 1 on both; a class that is
/// never predicted (or never true) but appears on the other side scores 0.
inline void macro_pr(const std::vector<int>& pred, const std::vector<int>& gt, double& precision, double& recall) {
    precision = recall = 0;
    for (int c = 0; c < 3; ++c) {
        double tp = 0, np = 0, ng = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == c) np += 1;
            if (gt[i] == c) ng += 1;
            if (pred[i] == c && gt[i] == c) tp += 1;
        }
        if (np == 0 && ng == 0) {
            precision += 1;
            recall += 1;
            continue;
        }
        precision += np > 0 ? tp / np : 0;
        recall += ng > 0 ? tp / ng : 0;
    }
    precision /= 3;
    recall /= 3;
}

/// Term-frequency cosine over a dense vocabulary vector.
inline double tf_cosine(const Toks& a, const Toks& b) {
    Toks vocab;
    for (const Toks* side : {&a, &b})
        for (const auto& t : *side) {
            bool seen = false;
            for (const auto& v : vocab) seen = seen || v == t;
            if (!seen) vocab.push_back(t);
        }
    std::vector<double> va(vocab.size(), 0.0), vb(vocab.size(), 0.0);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        for (const auto& t : a) va[i] += t == vocab[i] ? 1 : 0;
        for (const auto& t : b) vb[i] += t == vocab[i] ? 1 : 0;
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        dot += va[i] * vb[i];
        na += va[i] * va[i];
        nb += vb[i] * vb[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / std::sqrt(na * nb);
}

} // namespace oracle
