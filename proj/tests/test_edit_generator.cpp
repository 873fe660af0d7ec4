#include <random>

#include <gtest/gtest.h>

#include "editprop/edit_generator.hpp"
#include "fixture.hpp"

using namespace editprop;

namespace {

std::vector<LinePrediction> labels_of(const std::string& pattern) {
    std::vector<LinePrediction> out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        LinePrediction p;
        p.line_index = static_cast<int>(i) + 1;
        p.predicted = pattern[i] == 'R' ? EditType::Replace : pattern[i] == 'I' ? EditType::Insert : EditType::Keep;
        out.push_back(p);
    }
    return out;
}

Lines letters(int n) {
    Lines out;
    for (int i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
    return out;
}

class ListGenerator : public EditGenerator {
public:
    explicit ListGenerator(std::vector<EditCandidate> c) : c_(std::move(c)) {}
    std::vector<EditCandidate> generate(const GeneratorInput&, int) override { return c_; }

private:
    std::vector<EditCandidate> c_;
};

GeneratorInput input_for(HunkRegion r, std::vector<PriorEdit> priors) {
    return make_generator_input(std::move(r), Prompt{}, std::move(priors));
}

} // namespace

TEST(Regions, GroupRunsAndContext) {
    auto f = letters(10);
    auto regions = group_regions("f", f, labels_of("KRRKIIKKRK"), 2);
    ASSERT_EQ(regions.size(), 4u);
    EXPECT_EQ(regions[0].edit_type, EditType::Replace);
    EXPECT_EQ(regions[0].start_line, 2);
    EXPECT_EQ(regions[0].target_lines, (Lines{"b", "c"}));
    EXPECT_EQ(regions[0].context_before, (Lines{"a"}));
    EXPECT_EQ(regions[0].context_after, (Lines{"d"})); // stops at the Insert line
    EXPECT_EQ(regions[1].edit_type, EditType::Insert);
    EXPECT_EQ(regions[1].start_line, 5);
    EXPECT_EQ(regions[1].target_lines, (Lines{"e"}));
    EXPECT_EQ(regions[1].context_after, Lines{});
    EXPECT_EQ(regions[2].start_line, 6);
    EXPECT_EQ(regions[2].context_after, (Lines{"g", "h"}));
    EXPECT_EQ(regions[3].start_line, 9);
    EXPECT_EQ(regions[3].end_line(), 9);
    EXPECT_EQ(regions[3].context_before, (Lines{"g", "h"}));
    EXPECT_EQ(regions[3].context_after, (Lines{"j"}));
}

TEST(Regions, HeadInsertAndMismatch) {
    auto f = letters(3);
    auto regions = group_regions("f", f, labels_of("KKK"), 3, true);
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_EQ(regions[0].start_line, 0);
    EXPECT_TRUE(regions[0].target_lines.empty());
    EXPECT_EQ(regions[0].context_after, (Lines{"a", "b", "c"}));
    EXPECT_THROW(group_regions("f", f, labels_of("KK"), 3), Error);
}

TEST(Regions, EveryNonKeepLineInExactlyOneRegion) {
    std::mt19937 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 30);
        std::string pat;
        for (int i = 0; i < n; ++i) pat += "KKKRI"[rng() % 5];
        auto f = letters(n);
        auto regions = group_regions("f", f, labels_of(pat), static_cast<int>(rng() % 4));
        std::string seen(static_cast<std::size_t>(n), 'K');
        for (const auto& r : regions) {
            for (int l = r.start_line; l <= r.end_line(); ++l) {
                ASSERT_EQ(seen[static_cast<std::size_t>(l - 1)], 'K');
                seen[static_cast<std::size_t>(l - 1)] = r.edit_type == EditType::Replace ? 'R' : 'I';
            }
            if (r.edit_type == EditType::Insert) {
                EXPECT_EQ(r.target_lines.size(), 1u);
            }
        }
        EXPECT_EQ(seen, pat);
    }
}

TEST(Regions, ForHunk) {
    auto f = letters(8);
    auto r = region_for_hunk(Hunk{"f", 3, {"c", "d"}, 3, {"x"}}, f, 2);
    EXPECT_EQ(r.edit_type, EditType::Replace);
    EXPECT_EQ(r.context_before, (Lines{"a", "b"}));
    EXPECT_EQ(r.target_lines, (Lines{"c", "d"}));
    EXPECT_EQ(r.context_after, (Lines{"e", "f"}));
    auto ins = region_for_hunk(Hunk{"f", 8, {}, 9, {"x"}}, f, 2);
    EXPECT_EQ(ins.edit_type, EditType::Insert);
    EXPECT_EQ(ins.target_lines, (Lines{"h"}));
    EXPECT_EQ(ins.context_before, (Lines{"f", "g"}));
    EXPECT_TRUE(ins.context_after.empty());
    auto head = region_for_hunk(Hunk{"f", 0, {}, 1, {"x"}}, f, 2);
    EXPECT_TRUE(head.target_lines.empty());
    EXPECT_EQ(head.context_after, (Lines{"a", "b"}));
    auto t = target_of(region_for_hunk(Hunk{"f", 4, {}, 5, {"x"}}, f, 2));
    EXPECT_EQ(t.line, 5);
    EXPECT_EQ(t.code, (Lines{"d", "e"}));
}

TEST(GeneratorInput, LayoutAndBudget) {
    HunkRegion r{"f", EditType::Replace, 2, {"b = 1"}, {"a"}, {"c"}};
    std::vector<PriorEdit> priors{{Edit{"f", 9, EditType::Insert, {}, {"z"}}, 0.9, {}, {}}};
    auto toks = serialize_generator_input(r, Prompt{"go"}, priors, 4096);
    std::vector<std::string> want{"<code-window>", "<K>", "a", "<R>", "b", "=", "1", "<K>", "c",
                                  "<prompt>", "go", "<prior-edits>", "<I>", "<to>", "z"};
    EXPECT_EQ(toks, want);
    try {
        serialize_generator_input(r, Prompt{}, priors, 8);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RegionTooLarge);
    }
}

TEST(PatternTransfer, TemplateRenamesIdentifiers) {
    Edit prior{"a.go", 3, EditType::Replace, {"\tx := computeTotal(items)"}, {"\tx := computeTotalWithTax(items, rate)"}};
    HunkRegion r{"a.go", EditType::Replace, 9, {"    y := computeTotal(items)"}, {}, {}};
    PatternTransferGenerator g;
    auto out = generate_candidates(input_for(r, {{prior, 0.8, {}, {}}}), g, 5);
    ASSERT_FALSE(out.empty());
    EXPECT_EQ(out[0].content, (Lines{"    y := computeTotalWithTax(items, rate)"}));
    EXPECT_DOUBLE_EQ(out[0].confidence, 0.8);
}

TEST(PatternTransfer, SubstitutionAppliesInsideLargerCode) {
    Edit prior{"a.go", 3, EditType::Replace, {"\tlog.Printf(\"%v\", err)"}, {"\tlogger.Errorf(\"%v\", err)"}};
    HunkRegion r{"b.go", EditType::Replace, 20, {"\tif err != nil {", "\t\tlog.Printf(\"%v\", err)", "\t}"}, {}, {}};
    PatternTransferGenerator g;
    auto out = generate_candidates(input_for(r, {{prior, 0.7, {}, {}}}), g, 5);
    ASSERT_FALSE(out.empty());
    bool found = false;
    for (const auto& c : out)
        found = found || c.content == Lines{"\tif err != nil {", "\t\tlogger.Errorf(\"%v\", err)", "\t}"};
    EXPECT_TRUE(found);
}

TEST(PatternTransfer, InsertTransfersWithContextRenames) {
    auto edits = fixture::edits_in_order();
    auto prior = make_prior(edits[0], fixture::benchmark_before());
    auto testing = fixture::testing_before();
    const int anchor = fixture::line_of(testing, "type testContext struct {");
    auto region = region_for_hunk(Hunk{fixture::testing_path, anchor, {}, anchor + 1, {"x"}}, testing, 3);
    PatternTransferGenerator g;
    prior.relevance = 0.9;
    auto out = generate_candidates(input_for(region, {prior}), g, 3);
    ASSERT_FALSE(out.empty());
    EXPECT_EQ(out[0].content, fixture::h4_after);
}

TEST(PatternTransfer, NoPriorsIsNoCandidate) {
    PatternTransferGenerator g;
    HunkRegion r{"f", EditType::Replace, 1, {"a"}, {}, {}};
    try {
        generate_candidates(input_for(r, {}), g, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoCandidate);
    }
}

TEST(Candidates, ContractHolds) {
    HunkRegion r{"f", EditType::Replace, 1, {"same"}, {}, {}};
    auto in = input_for(r, {});
    ListGenerator gen({{0, {"b"}, 0.5}, {0, {"same"}, 0.99}, {0, {"a"}, 0.9}, {0, {"b"}, 0.4}, {0, {"c"}, 0.5}});
    auto out = generate_candidates(in, gen, 10);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].content, (Lines{"a"}));
    EXPECT_EQ(out[1].content, (Lines{"b"}));
    EXPECT_EQ(out[2].content, (Lines{"c"}));
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].rank, static_cast<int>(i) + 1);
    EXPECT_EQ(generate_candidates(in, gen, 2).size(), 2u);
    EXPECT_THROW(generate_candidates(in, gen, 0), Error);
}

TEST(Candidates, RandomBackendOutputIsNormalised) {
    std::mt19937 rng(12);
    HunkRegion r{"f", EditType::Insert, 1, {"anchor"}, {}, {}};
    auto in = input_for(r, {});
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<EditCandidate> raw;
        const int n = static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            Lines content;
            if (rng() % 5) content.push_back("c" + std::to_string(rng() % 5));
            raw.push_back({0, content, static_cast<double>(rng() % 100) / 100.0});
        }
        ListGenerator gen(raw);
        const int k = 1 + static_cast<int>(rng() % 6);
        auto out = generate_candidates(in, gen, k);
        EXPECT_LE(static_cast<int>(out.size()), k);
        std::set<Lines> seen;
        for (std::size_t i = 0; i < out.size(); ++i) {
            EXPECT_FALSE(out[i].content.empty());
            EXPECT_TRUE(seen.insert(out[i].content).second);
            EXPECT_EQ(out[i].rank, static_cast<int>(i) + 1);
            if (i > 0) {
                EXPECT_LE(out[i].confidence, out[i - 1].confidence);
            }
        }
        // prefix property: top-k is a prefix of top-(k+1)
        auto more = generate_candidates(in, gen, k + 1);
        for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(more[i], out[i]);
    }
}

TEST(EditFromRegion, AnchorsMatchRegionKind) {
    HunkRegion ins{"f", EditType::Insert, 4, {"d"}, {}, {}};
    auto e = edit_from_region(ins, {"new"});
    EXPECT_EQ(e.edit_type, EditType::Insert);
    EXPECT_EQ(e.anchor_line, 5);
    EXPECT_EQ(apply_edit(letters(5), e), (Lines{"a", "b", "c", "d", "new", "e"}));
    HunkRegion rep{"f", EditType::Replace, 2, {"b", "c"}, {}, {}};
    auto r = edit_from_region(rep, {"B"});
    EXPECT_EQ(apply_edit(letters(4), r), (Lines{"a", "B", "d"}));
    EXPECT_THROW(edit_from_region(ins, {}), Error);
}
