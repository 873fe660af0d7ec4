#include <thread>

#include <gtest/gtest.h>

#include "editprop/http_service.hpp"
#include "fixture.hpp"

using namespace editprop;

namespace {

class Api : public ::testing::Test {
protected:
    void SetUp() override {
        register_routes(server_, sessions_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        ASSERT_GT(port_, 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }

    void TearDown() override {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::pair<int, json> post(const std::string& path, const json& body) {
        auto r = client_->Post(path, body.dump(), "application/json");
        if (!r) throw std::runtime_error("request failed");
        return {r->status, json::parse(r->body)};
    }

    std::pair<int, json> post_raw(const std::string& path, const std::string& body) {
        auto r = client_->Post(path, body, "application/json");
        if (!r) throw std::runtime_error("request failed");
        return {r->status, json::parse(r->body)};
    }

    std::pair<int, json> get(const std::string& path) {
        auto r = client_->Get(path);
        if (!r) throw std::runtime_error("request failed");
        return {r->status, json::parse(r->body)};
    }

    std::string create_calc_session() {
        ProjectSnapshot p;
        p.add_file("shop/calc.go", {"package shop", "", "func process(order *Order) error {",
                                    "\tsubtotal := computeTotal(order.items)", "\tif subtotal == nil {",
                                    "\t\treturn errMissing", "\t}", "\tamount := computeTotal(order.items)",
                                    "\tif amount == nil {", "\t\treturn errMissing", "\t}", "\treturn nil", "}"});
        p.add_file("shop/util.go", {"package shop", "", "func start() {", "\tfmt.Println(\"starting\")", "}"});
        auto [status, body] = post("/sessions", {{"v", 1}, {"snapshot", p}});
        EXPECT_EQ(status, 201);
        return body["session_id"].get<std::string>();
    }

    static json calc_edit() {
        return Edit{"shop/calc.go", 4, EditType::Replace, {"\tsubtotal := computeTotal(order.items)"},
                    {"\tsubtotal := computeTotalWithTax(order.items, taxRate)"}};
    }

    SessionManager sessions_{EngineBackends::lexical()};
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
};

std::string ref_at(const json& report, const std::string& path, int line) {
    for (const auto& r : report["regions"])
        if (r["path"] == path && r["start_line"] == line) return r["ref"].get<std::string>();
    return {};
}

} // namespace

TEST_F(Api, Healthz) {
    auto [status, body] = get("/healthz");
    EXPECT_EQ(status, 200);
    EXPECT_EQ(body["status"], "ok");
    EXPECT_EQ(body["sessions"], 0);
}

TEST_F(Api, EditLocateSuggestAccept) {
    const auto id = create_calc_session();
    EXPECT_EQ(id, "s-000001");

    auto [s1, ev] = post("/sessions/" + id + "/events", {{"v", 1}, {"edit", calc_edit()}, {"prompt", "add tax"}});
    EXPECT_EQ(s1, 200);
    EXPECT_EQ(ev["revision"], 1);

    auto [s2, rep] = get("/sessions/" + id + "/locations");
    EXPECT_EQ(s2, 200);
    EXPECT_EQ(rep["v"], 1);
    EXPECT_EQ(rep["revision"], 1);
    ASSERT_TRUE(rep["files"].is_array());
    const auto ref = ref_at(rep, "shop/calc.go", 8);
    ASSERT_FALSE(ref.empty()) << rep.dump();

    auto [s3, cands] = post("/sessions/" + id + "/regions/" + ref + "/candidates?k=3", json::object());
    EXPECT_EQ(s3, 200);
    ASSERT_FALSE(cands["candidates"].empty());
    EXPECT_LE(cands["candidates"].size(), 3u);
    EXPECT_EQ(cands["candidates"][0]["rank"], 1);
    EXPECT_EQ(cands["candidates"][0]["content"], json::array({"\tamount := computeTotalWithTax(order.items, taxRate)"}));

    auto [s4, fb] = post("/sessions/" + id + "/regions/" + ref + "/feedback",
                         {{"outcome", "accepted"}, {"content", cands["candidates"][0]["content"]}});
    EXPECT_EQ(s4, 200);
    EXPECT_EQ(fb["revision"], 2);

    // the old ref is from revision 1
    auto [s5, err] = post("/sessions/" + id + "/regions/" + ref + "/candidates", json::object());
    EXPECT_EQ(s5, 409);
    EXPECT_EQ(err["error"]["code"], "RevisionMismatch");
    sessions_.with_session(id, [](EditSession& s) {
        EXPECT_TRUE(snapshot_consistent(s));
        EXPECT_EQ(s.snapshot().at("shop/calc.go")[7], "\tamount := computeTotalWithTax(order.items, taxRate)");
    });
}

TEST_F(Api, NoSuggestionIsNotAnError) {
    auto [status, created] = post("/sessions", {{"snapshot", fixture::project_before()}});
    ASSERT_EQ(status, 201);
    const auto id = created["session_id"].get<std::string>();
    post("/sessions/" + id + "/events", {{"edit", fixture::edits_in_order()[0]}});
    auto [s2, rep] = get("/sessions/" + id + "/locations");
    const auto ref = ref_at(rep, fixture::testing_path, fixture::line_of(fixture::testing_before(), "type testContext struct {"));
    ASSERT_FALSE(ref.empty());
    auto [s3, body] = post("/sessions/" + id + "/regions/" + ref + "/candidates?k=5", json::object());
    EXPECT_EQ(s3, 200);
    EXPECT_TRUE(body["candidates"].empty());
    EXPECT_EQ(body["message"], "no suggestion");
}

TEST_F(Api, IgnoredFeedbackHidesRegion) {
    const auto id = create_calc_session();
    post("/sessions/" + id + "/events", {{"edit", calc_edit()}});
    auto [s1, rep] = get("/sessions/" + id + "/locations");
    const auto ref = ref_at(rep, "shop/calc.go", 8);
    ASSERT_FALSE(ref.empty());
    auto [s2, fb] = post("/sessions/" + id + "/regions/" + ref + "/feedback", {{"outcome", "ignored"}});
    EXPECT_EQ(s2, 200);
    EXPECT_EQ(fb["revision"], 1);
    auto [s3, after] = get("/sessions/" + id + "/locations");
    EXPECT_TRUE(ref_at(after, "shop/calc.go", 8).empty());
}

TEST_F(Api, ErrorStatuses) {
    auto [s0, nf] = get("/sessions/s-000042/locations");
    EXPECT_EQ(s0, 404);
    EXPECT_EQ(nf["error"]["code"], "NotFound");

    const auto id = create_calc_session();
    auto [s1, pre] = get("/sessions/" + id + "/locations");
    EXPECT_EQ(s1, 412);
    EXPECT_EQ(pre["error"]["code"], "PreconditionFailed");

    json stale = Edit{"shop/calc.go", 4, EditType::Replace, {"\tnot the current text"}, {"x"}};
    auto [s2, st] = post("/sessions/" + id + "/events", {{"edit", stale}});
    EXPECT_EQ(s2, 409);
    EXPECT_EQ(st["error"]["code"], "StaleEdit");

    auto [s3, bad] = post_raw("/sessions/" + id + "/events", "{not json");
    EXPECT_EQ(s3, 400);
    auto [s4, missing] = post("/sessions/" + id + "/events", json::object());
    EXPECT_EQ(s4, 400);
    auto [s5, version] = post("/sessions/" + id + "/events", {{"v", 2}, {"edit", calc_edit()}});
    EXPECT_EQ(s5, 400);
    EXPECT_EQ(version["error"]["code"], "ConfigError");

    post("/sessions/" + id + "/events", {{"edit", calc_edit()}});
    auto [s6, kbad] = post("/sessions/" + id + "/regions/1-0/candidates?k=0", json::object());
    EXPECT_EQ(s6, 400);
    auto [s7, nore] = post("/sessions/" + id + "/regions/1-999/candidates", json::object());
    EXPECT_EQ(s7, 404);
    auto [s8, outcome] = post("/sessions/" + id + "/regions/1-0/feedback", {{"outcome", "maybe"}});
    EXPECT_EQ(s8, 400);
    auto [s9, cfg] = post("/sessions", {{"snapshot", ProjectSnapshot{}}, {"config", {{"scoring", {{"th_pri", 2.0}}}}}});
    EXPECT_EQ(s9, 400);
    EXPECT_EQ(cfg["error"]["code"], "ConfigError");
}
