#pragma once

// Two-file Go fixture: a subtest matcher commit touching benchmark.go and
// testing.go in six hunks, plus an unrelated file and an unrelated edit.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "editprop/corpus_miner.hpp"
#include "editprop/edit_model.hpp"

namespace fixture {

using editprop::Edit;
using editprop::Hunk;
using editprop::Lines;
using editprop::ProjectSnapshot;

inline const std::string benchmark_path = "src/testing/benchmark.go";
inline const std::string testing_path = "src/testing/testing.go";
inline const std::string unrelated_path = "src/image/png/paeth.go";

inline const char* const commit_message =
    "testing: add matcher so that benchmark and test names can be filtered per subtest level";

inline const char* const benchmark_text = R"go(// Copyright 2009 The Go Authors. All rights reserved.
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

package testing

import (
	"flag"
	"fmt"
	"os"
	"runtime"
	"sync"
	"time"
)

var matchBenchmarks = flag.String("test.bench", "", "regular expression per path component to select benchmarks to run")
var benchTime = flag.Duration("test.benchtime", 1*time.Second, "approximate run time for each benchmark")
var benchmarkMemory = flag.Bool("test.benchmem", false, "print memory allocations for benchmarks")

// Global lock to ensure only one benchmark runs at a time.
var benchmarkLock sync.Mutex

// InternalBenchmark is an internal type but exported because it is cross-package;
// it is part of the implementation of the "go test" command.
type InternalBenchmark struct {
	Name string
	F    func(b *B)
}

// B is a type passed to Benchmark functions to manage benchmark
// timing and to specify the number of iterations to run.
type B struct {
	common
	context          *benchContext
	N                int
	previousN        int
	previousDuration time.Duration
	benchFunc        func(b *B)
	benchTime        time.Duration
	bytes            int64
	missingBytes     bool
	timerOn          bool
	showAllocResult  bool
	hasSub           bool
	result           BenchmarkResult
}

type benchContext struct {
	maxLen int // The largest recorded benchmark name.
	extLen int // Maximum extension length.
}

// An internal function but exported because it is cross-package; part of the implementation
// of the "go test" command.
func RunBenchmarks(matchString func(pat, str string) (bool, error), benchmarks []InternalBenchmark) {
	runBenchmarks(matchString, benchmarks)
}

func runBenchmarks(matchString func(pat, str string) (bool, error), benchmarks []InternalBenchmark) bool {
	// If no flag was specified, don't run benchmarks.
	if len(*matchBenchmarks) == 0 {
		return true
	}
	// Collect matching benchmarks and determine longest name.
	maxprocs := 1
	for _, procs := range cpuList {
		if procs > maxprocs {
			maxprocs = procs
		}
	}
	ctx := &benchContext{
		extLen: len(benchmarkName("", maxprocs)),
	}
	var bs []InternalBenchmark
	for _, Benchmark := range benchmarks {
		matched, err := matchString(*matchBenchmarks, Benchmark.Name)
		if err != nil {
			fmt.Fprintf(os.Stderr, "testing: invalid regexp for -test.bench: %s\n", err)
			os.Exit(1)
		}
		if matched {
			bs = append(bs, Benchmark)
			benchName := benchmarkName(Benchmark.Name, maxprocs)
			if l := len(benchName) + ctx.extLen + 1; l > ctx.maxLen {
				ctx.maxLen = l
			}
		}
	}
	main := &B{
		common: common{name: "Main"},
		benchFunc: func(b *B) {
			for _, Benchmark := range bs {
				b.Run(Benchmark.Name, Benchmark.F)
			}
		},
		benchTime: *benchTime,
		context:   ctx,
	}
	main.runN(1)
	return !main.failed
}

// Run benchmarks f as a subbenchmark with the given name. It reports
// whether there were any failures.
//
// A subbenchmark is like any other benchmark. A benchmark that calls Run at
// least once will not be measured itself and will be called once with N=1.
func (b *B) Run(name string, f func(b *B)) bool {
	// Since b has subbenchmarks, we will no longer run it as a benchmark itself.
	// Release the lock and acquire it on exit to ensure locks stay paired.
	b.hasSub = true
	benchmarkLock.Unlock()
	defer benchmarkLock.Lock()

	if b.level > 0 {
		name = b.name + "/" + name
	}
	sub := &B{
		common: common{
			signal: make(chan bool),
			name:   name,
			parent: &b.common,
			level:  b.level + 1,
		},
		benchFunc: f,
		benchTime: b.benchTime,
		context:   b.context,
	}
	if sub.run1() {
		sub.run()
	}
	b.add(sub.result)
	return !sub.failed
}
)go";

inline const char* const testing_text = R"go(// Copyright 2009 The Go Authors. All rights reserved.
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

package testing

import (
	"bytes"
	"flag"
	"fmt"
	"os"
	"runtime"
	"strings"
	"sync"
	"time"
)

var (
	// The short flag requests that tests run more quickly, but its functionality
	// is provided by test writers themselves.
	short = flag.Bool("test.short", false, "run smaller test suite to save time")

	// Report as tests are run; default is silent for success.
	chatty           = flag.Bool("test.v", false, "verbose: print additional output")
	count            = flag.Uint("test.count", 1, "run tests and benchmarks `n` times")
	coverProfile     = flag.String("test.coverprofile", "", "write a coverage profile to the named file after execution")
	match            = flag.String("test.run", "", "regular expression to select tests and examples to run")
	memProfile       = flag.String("test.memprofile", "", "write a memory profile to the named file after execution")
	timeout          = flag.Duration("test.timeout", 0, "if positive, sets an aggregate time limit for all tests")
	cpuListStr       = flag.String("test.cpu", "", "comma-separated list of cpu counts to run each test with")
	parallel         = flag.Int("test.parallel", runtime.GOMAXPROCS(0), "maximum test parallelism")

	haveExamples bool // are there examples?

	cpuList []int
)

// T is a type passed to Test functions to manage test state and support formatted test logs.
// Logs are accumulated during execution and dumped to standard output when done.
type T struct {
	common
	isParallel bool
	context    *testContext // For running tests and subtests.
}

// Run runs f as a subtest of t called name. It reports whether f succeeded.
// Run will block until all its parallel subtests have completed.
func (t *T) Run(name string, f func(t *T)) bool {
	testName := name
	if t.level > 0 {
		testName = t.name + "/" + name
	}
	t = &T{
		common: common{
			barrier: make(chan bool),
			signal:  make(chan bool),
			name:    testName,
			parent:  &t.common,
			level:   t.level + 1,
			chatty:  t.chatty,
		},
		context: t.context,
	}
	t.w = indenter{&t.common}

	if t.chatty {
		fmt.Printf("=== RUN   %s\n", t.name)
	}
	go tRunner(t, f)
	<-t.signal
	return !t.failed
}

// testContext holds all fields that are common to all tests. This includes
// synchronization primitives to run at most *parallel tests.
type testContext struct {
	mu sync.Mutex

	// Channel used to signal tests that are ready to be run in parallel.
	startParallel chan bool

	// running is the number of tests currently running in parallel.
	// This does not include tests that are waiting for subtests to complete.
	running int

	// numWaiting is the number tests waiting to be run in parallel.
	numWaiting int

	// maxParallel is a copy of the parallel flag.
	maxParallel int
}

func newTestContext(maxParallel int) *testContext {
	return &testContext{
		startParallel: make(chan bool),
		maxParallel:   maxParallel,
		running:       1, // Set the count to 1 for the main (sequential) test.
	}
}
)go";

inline const char* const unrelated_text = R"go(// Copyright 2012 The Go Authors. All rights reserved.
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

package png

// intSize is either 32 or 64.
const intSize = 32 << (^uint(0) >> 63)

func abs(x int) int {
	// m := -1 if x < 0. m := 0 otherwise.
	m := x >> (intSize - 1)

	// In two's complement representation, the negative number
	// of any number (except the smallest one) can be computed
	// by flipping all the bits and add 1. This is faster than
	// code with a branch.
	return (x ^ m) - m
}

// paeth implements the Paeth filter function.
func paeth(a, b, c uint8) uint8 {
	pc := int(c)
	pa := int(b) - pc
	pb := int(a) - pc
	pc = abs(pa + pb)
	pa = abs(pa)
	pb = abs(pb)
	if pa <= pb && pa <= pc {
		return a
	} else if pb <= pc {
		return b
	}
	return c
}
)go";

inline Lines benchmark_before() { return editprop::split_lines(benchmark_text); }
inline Lines testing_before() { return editprop::split_lines(testing_text); }
inline Lines unrelated_file() { return editprop::split_lines(unrelated_text); }

/// 1-based index of the single line equal to `text`.
inline int line_of(const Lines& file, const std::string& text) {
    int found = 0;
    for (std::size_t i = 0; i < file.size(); ++i) {
        if (file[i] != text) continue;
        if (found) throw std::logic_error("fixture line is not unique: " + text);
        found = static_cast<int>(i) + 1;
    }
    if (!found) throw std::logic_error("fixture line not found: " + text);
    return found;
}

// Hunk contents, before-commit coordinates filled in by hunks().
inline const Lines h1_after{"\tmatch *matcher"};
inline const Lines h2_after{"\t\tmatch:  newMatcher(matchString, *matchBenchmarks, \"-test.bench\"),"};
inline const Lines h3_before{"\tif b.level > 0 {", "\t\tname = b.name + \"/\" + name"};
inline const Lines h3_after{"\tbenchName, ok := b.name, true",
                            "\tif b.context != nil {",
                            "\t\tbenchName, ok = b.context.match.fullName(&b.common, name)",
                            "\t}",
                            "\tif !ok {",
                            "\t\treturn true"};
inline const Lines h4_after{"\tmatch *matcher"};
inline const Lines h5_before{"\ttestName := name", "\tif t.level > 0 {", "\t\ttestName = t.name + \"/\" + name"};
inline const Lines h5_after{"\ttestName, ok := t.context.match.fullName(&t.common, name)", "\tif !ok {",
                            "\t\treturn true"};
inline const Lines h6_before{"func newTestContext(maxParallel int) *testContext {", "\treturn &testContext{"};
inline const Lines h6_after{"func newTestContext(maxParallel int, m *matcher) *testContext {", "\treturn &testContext{",
                            "\t\tmatch:         m,"};

/// Net line growth of the first `n` hunks that sit above `h` in its file.
inline int growth_above(const std::vector<Hunk>& hs, const Hunk& h, std::size_t n) {
    int s = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (hs[i].file_path == h.file_path && hs[i].before_start < h.before_start)
            s += static_cast<int>(hs[i].after_lines.size()) - static_cast<int>(hs[i].before_lines.size());
    return s;
}

/// H1..H6 in commit order, in before-commit coordinates (as a -U0 diff
/// would report them).
inline std::vector<Hunk> hunks() {
    const auto b = benchmark_before();
    const auto t = testing_before();
    std::vector<Hunk> out;
    auto insert = [](const std::string& path, int after_line, Lines lines) {
        return Hunk{path, after_line, {}, 0, std::move(lines)};
    };
    auto replace = [](const std::string& path, int first, Lines before, Lines after) {
        return Hunk{path, first, std::move(before), 0, std::move(after)};
    };
    out.push_back(insert(benchmark_path, line_of(b, "type benchContext struct {"), h1_after));
    out.push_back(insert(benchmark_path, line_of(b, "\tctx := &benchContext{"), h2_after));
    out.push_back(replace(benchmark_path, line_of(b, h3_before[0]), h3_before, h3_after));
    out.push_back(insert(testing_path, line_of(t, "type testContext struct {"), h4_after));
    out.push_back(replace(testing_path, line_of(t, h5_before[0]), h5_before, h5_after));
    out.push_back(replace(testing_path, line_of(t, h6_before[0]), h6_before, h6_after));
    // after-side coordinates: shift by the net growth of hunks above in the same file
    for (auto& h : out)
        h.after_start = h.before_start + growth_above(out, h, out.size()) + (h.is_insertion() ? 1 : 0);
    return out;
}

/// H1..H6 as edits applied one after another, anchors in the file state at
/// the time each is applied.
inline std::vector<Edit> edits_in_order() {
    std::vector<Edit> out;
    const auto hs = hunks();
    for (std::size_t i = 0; i < hs.size(); ++i) {
        Edit e = editprop::edit_from_hunk(hs[i]);
        e.anchor_line += growth_above(hs, hs[i], i);
        out.push_back(std::move(e));
    }
    return out;
}

inline ProjectSnapshot project_before(bool with_unrelated = true) {
    ProjectSnapshot s;
    s.root_id = "fixture";
    s.add_file(benchmark_path, benchmark_before());
    s.add_file(testing_path, testing_before());
    if (with_unrelated) s.add_file(unrelated_path, unrelated_file());
    return s;
}

inline std::string replace_once(std::string text, const std::string& from, const std::string& to) {
    auto pos = text.find(from);
    if (pos == std::string::npos || text.find(from, pos + 1) != std::string::npos)
        throw std::logic_error("fixture replacement not unique: " + from);
    return text.replace(pos, from.size(), to);
}

/// Post-commit file texts, built by plain text substitution.
inline std::string benchmark_after_text() {
    std::string s = benchmark_text;
    s = replace_once(s, "type benchContext struct {\n", "type benchContext struct {\n\tmatch *matcher\n");
    s = replace_once(s, "\tctx := &benchContext{\n",
                     "\tctx := &benchContext{\n\t\tmatch:  newMatcher(matchString, *matchBenchmarks, \"-test.bench\"),\n");
    s = replace_once(s, "\tif b.level > 0 {\n\t\tname = b.name + \"/\" + name\n\t}\n",
                     "\tbenchName, ok := b.name, true\n\tif b.context != nil {\n"
                     "\t\tbenchName, ok = b.context.match.fullName(&b.common, name)\n\t}\n\tif !ok {\n\t\treturn true\n\t}\n");
    return s;
}

inline std::string testing_after_text() {
    std::string s = testing_text;
    s = replace_once(s, "type testContext struct {\n", "type testContext struct {\n\tmatch *matcher\n");
    s = replace_once(s, "\ttestName := name\n\tif t.level > 0 {\n\t\ttestName = t.name + \"/\" + name\n\t}\n",
                     "\ttestName, ok := t.context.match.fullName(&t.common, name)\n\tif !ok {\n\t\treturn true\n\t}\n");
    s = replace_once(s, "func newTestContext(maxParallel int) *testContext {\n\treturn &testContext{\n",
                     "func newTestContext(maxParallel int, m *matcher) *testContext {\n\treturn &testContext{\n"
                     "\t\tmatch:         m,\n");
    return s;
}

inline ProjectSnapshot project_after(bool with_unrelated = true) {
    ProjectSnapshot s;
    s.root_id = "fixture";
    s.add_file(benchmark_path, editprop::split_lines(benchmark_after_text()));
    s.add_file(testing_path, editprop::split_lines(testing_after_text()));
    if (with_unrelated) s.add_file(unrelated_path, unrelated_file());
    return s;
}

/// An edit in the unrelated file, used as a distractor prior.
inline Edit unrelated_edit() {
    const auto f = unrelated_file();
    Edit e;
    e.file_path = unrelated_path;
    e.edit_type = editprop::EditType::Replace;
    e.anchor_line = line_of(f, "\tpc = abs(pa + pb)");
    e.before_code = {"\tpc = abs(pa + pb)"};
    e.after_code = {"\tpc = abs(pa + pb) // |p - c|"};
    return e;
}

/// The fixture commit as the miner would see it.
inline editprop::CommitRecord commit_record() {
    editprop::CommitRecord c;
    c.commit_id = "5e2a3f7c0d9b41a8";
    c.message = commit_message;
    c.hunks = hunks();
    c.files_touched = editprop::touched_paths(c.hunks);
    c.snapshot_before = project_before();
    return c;
}

} // namespace fixture
