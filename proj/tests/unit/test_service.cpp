#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "locus/error.hpp"
#include "locus/serialize.hpp"
#include "locus/service.hpp"
#include "support.hpp"

using namespace locus;
using json = nlohmann::json;
using testing::reference_schema;

namespace {

// Wine glasses are ambiguous between kitchen and dining room until fullness is known.
struct WineGlass {
    SchemaPtr schema = reference_schema();
    TableBackend backend{schema};
    Lexicon lexicon{*schema};

    WineGlass() {
        backend.set({{"class", "wine_glass"}}, "room", {0, 0, 0, 0.5, 0, 0, 0.5});
        backend.set({{"class", "wine_glass"}, {"fullness", "full"}}, "room", {0, 0, 0, 0, 0, 0, 1});
        backend.set({{"class", "wine_glass"}, {"fullness", "empty"}}, "room", {0, 0, 0, 1, 0, 0, 0});
        backend.set({{"class", "wine_glass"}, {"fullness", "half"}}, "room", {0, 0, 0, 0.5, 0, 0, 0.5});
        backend.set({{"class", "wine_glass"}, {"fullness", "empty"}, {"room", "kitchen"}}, "location", {0.9, 0, 0.1, 0, 0, 0, 0, 0});
    }
};

constexpr std::string_view kWineGlass = R"({"features": [["class", "wine_glass"]]})";

json body(const ServiceReply& r) { return json::parse(r.body); }

class Gate final : public Backend {
public:
    explicit Gate(SchemaPtr s) : Backend(std::move(s)) {}
    std::string name() const override { return "gate"; }

    mutable std::atomic<bool> armed{false};
    mutable std::promise<void> entered;
    mutable std::promise<void> release;

protected:
    Distribution do_predict(const EvidenceSet&, const FeatureType& t) const override {
        if (armed.exchange(false)) {
            entered.set_value();
            release.get_future().wait();
        }
        return Distribution::uniform(t.name, t.values);
    }
};

class FailsOn final : public Backend {
public:
    FailsOn(const Backend& inner, std::string target) : Backend(inner.schema_ptr()), inner_(inner), target_(std::move(target)) {}
    std::string name() const override { return "fails"; }

protected:
    Distribution do_predict(const EvidenceSet& e, const FeatureType& t) const override {
        if (t.name == target_) throw BackendError(BackendError::Kind::unavailable, "connection refused");
        return inner_.predict(e, t.name);
    }

private:
    const Backend& inner_;
    std::string target_;
};

}  // namespace

TEST_CASE("create returns a session and the first blocking event") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    auto r = svc.create(kWineGlass);
    CHECK(r.status == 200);
    auto j = body(r);
    CHECK(j["session_id"].is_string());
    CHECK(j["event"] == json::parse(R"({"kind":"question","feature_type":"fullness","prompt":"What is the object's fullness?"})"));
    CHECK(j["events"].size() == 1);
    CHECK(svc.session_count() == 1);
}

TEST_CASE("answers advance through the room prediction to done") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    const auto id = body(svc.create(kWineGlass))["session_id"].get<std::string>();
    auto r = svc.answer(id, R"({"value": "Empty"})");
    REQUIRE(r.status == 200);
    auto j = body(r);
    REQUIRE(j["events"].size() == 2);
    CHECK(j["events"][0] == json::parse(R"({"kind":"stage_prediction","stage":"room","ranked":[["kitchen",1.0],["bedroom",0.0],["bathroom",0.0]],"confidence":1.0})"));
    CHECK(j["event"]["kind"] == "done");
    const auto& result = j["event"]["result"];
    CHECK(result["room_ranked"][0] == json::array({"kitchen", 1.0}));
    CHECK(result["location_ranked"][0] == json::array({"sink", 0.9}));
    CHECK(result["questions_asked"] == 1);

    auto again = svc.answer(id, R"({"value": "full"})");
    CHECK(again.status == 409);
    CHECK(body(again).contains("error"));
}

TEST_CASE("skip keeps the budget") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    const auto id = body(svc.create(kWineGlass))["session_id"].get<std::string>();
    auto j = body(svc.answer(id, R"({"skip": true})"));
    CHECK(j["event"]["kind"] == "done");
    auto state = body(svc.get(id));
    CHECK(state["budget_remaining"] == 2);
    CHECK(state["stage"] == "done");
}

TEST_CASE("malformed and invalid requests") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    CHECK(svc.create("").status == 400);
    CHECK(svc.create("{}").status == 400);
    CHECK(svc.create("[1]").status == 400);
    CHECK(svc.create("{not json").status == 400);
    CHECK(svc.create(R"({"text": "   "})").status == 400);
    CHECK(svc.create(R"({"text": 5})").status == 400);
    CHECK(svc.create(R"({"features": []})").status == 400);
    CHECK(svc.create(R"({"features": [["class"]]})").status == 400);
    CHECK(svc.create(R"({"features": [["class", "spaceship"]]})").status == 422);
    CHECK(svc.create(R"({"features": [["weight", "heavy"]]})").status == 422);
    CHECK(svc.create(R"({"features": [["room", "kitchen"]]})").status == 422);
    CHECK(svc.session_count() == 0);

    const auto id = body(svc.create(kWineGlass))["session_id"].get<std::string>();
    CHECK(svc.answer("nope", R"({"value": "full"})").status == 404);
    CHECK(svc.get("nope").status == 404);
    CHECK(svc.answer(id, "").status == 400);
    CHECK(svc.answer(id, "{}").status == 400);
    CHECK(svc.answer(id, R"({"skip": false})").status == 400);
    CHECK(svc.answer(id, R"({"value": ""})").status == 400);
    CHECK(svc.answer(id, R"({"value": "sparkly"})").status == 422);
    // The session survives rejected requests.
    CHECK(body(svc.get(id))["awaiting"] == "answer");
}

TEST_CASE("text requests are parsed") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    auto r = svc.create(R"({"text": "the red apple next to the knife"})");
    REQUIRE(r.status == 200);
    auto state = body(svc.get(body(r)["session_id"].get<std::string>()));
    CHECK(state["evidence"] == json::parse(R"([["colour","red"],["class","apple"],["reference_object","knife"],["room","bedroom"]])"));

    auto glass = body(svc.create(R"({"text": "a wine glass"})"));
    CHECK(glass["event"]["feature_type"] == "fullness");
}

TEST_CASE("session state document") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    const auto id = body(svc.create(kWineGlass))["session_id"].get<std::string>();
    auto s = body(svc.get(id));
    CHECK(s["session_id"] == id);
    CHECK(s["created_at"].get<std::string>().size() == 20);
    CHECK(s["stage"] == "room");
    CHECK(s["awaiting"] == "answer");
    CHECK(s["outstanding"] == "fullness");
    CHECK(s["evidence"] == json::parse(R"([["class","wine_glass"]])"));
    CHECK(s["budget_remaining"] == 2);
    CHECK(s["predicted_room"].is_null());
    CHECK(s["fault"].is_null());
    CHECK(s["events"].size() == 1);
    REQUIRE(s["transcript"].size() == 2);
    CHECK(s["transcript"][0]["kind"] == "prediction");
    CHECK(s["transcript"][1]["kind"] == "question");
    CHECK(s["transcript"][1]["feature_type"] == "fullness");

    svc.answer(id, R"({"value": "empty"})");
    s = body(svc.get(id));
    CHECK(s["predicted_room"] == "kitchen");
    CHECK(s["outstanding"].is_null());
    CHECK(s["events"].size() == 3);
    // The transcript parses back into the controller's own entries.
    std::vector<TranscriptEntry> entries;
    for (const auto& e : s["transcript"]) entries.push_back(transcript_entry_from_json(e));
    CHECK(entries.back().kind == TranscriptEntry::Kind::done);
}

TEST_CASE("schema endpoint") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    auto r = svc.schema();
    CHECK(r.status == 200);
    CHECK(parse_schema(r.body) == *w.schema);
}

TEST_CASE("backend failures return 503") {
    WineGlass w;
    FailsOn room(w.backend, "room");
    SessionService down(room, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    auto r = down.create(kWineGlass);
    CHECK(r.status == 503);
    CHECK(body(r)["event"]["kind"] == "fault");
    CHECK(down.session_count() == 0);

    FailsOn location(w.backend, "location");
    SessionService half(location, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    const auto id = body(half.create(kWineGlass))["session_id"].get<std::string>();
    auto f = half.answer(id, R"({"value": "empty"})");
    CHECK(f.status == 503);
    CHECK(body(f)["event"]["message"].get<std::string>().find("connection refused") != std::string::npos);
    CHECK(half.answer(id, R"({"value": "full"})").status == 409);
    CHECK(body(half.get(id))["fault"].is_string());
}

TEST_CASE("a second request to a busy session gets 409") {
    auto schema = testing::make_schema({"kitchen", "bathroom"}, {"sink", "shelf"}, {{"cleanliness", {"clean", "dirty"}}});
    TableBackend table(schema);
    table.set({}, "room", {0.5, 0.5});
    table.set({{"cleanliness", "clean"}}, "room", {1, 0});
    table.set({{"cleanliness", "dirty"}}, "room", {0, 1});
    Gate gate(schema);
    // Route predictions through the table until the gate is armed.
    class Both final : public Backend {
    public:
        Both(const TableBackend& t, Gate& g) : Backend(t.schema_ptr()), t_(t), g_(g) {}
        std::string name() const override { return "both"; }

    protected:
        Distribution do_predict(const EvidenceSet& e, const FeatureType& f) const override {
            if (g_.armed) g_.predict(e, f.name);
            return t_.predict(e, f.name);
        }

    private:
        const TableBackend& t_;
        Gate& g_;
    } both(table, gate);

    Lexicon lex(*schema);
    SessionService svc(both, lex, ControllerConfig::defaults_for(BackendKind::native));
    const auto id = body(svc.create(R"({"features": [["cleanliness", "clean"]]})")).at("session_id");
    const auto open = body(svc.create(R"({"text": "something"})"));
    REQUIRE(open["event"]["kind"] == "question");
    const auto open_id = open["session_id"].get<std::string>();
    (void)id;

    gate.armed = true;
    auto slow = std::async(std::launch::async, [&] { return svc.answer(open_id, R"({"value": "dirty"})"); });
    gate.entered.get_future().wait();
    CHECK(svc.answer(open_id, R"({"value": "clean"})").status == 409);
    gate.release.set_value();
    CHECK(slow.get().status == 200);
    CHECK(body(svc.get(open_id))["predicted_room"] == "bathroom");
}

TEST_CASE("idle sessions are evicted") {
    WineGlass w;
    ServiceOptions o;
    o.idle_timeout = std::chrono::minutes(30);
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native), o);
    for (int i = 0; i < 3; ++i) svc.create(kWineGlass);
    CHECK(svc.evict_idle() == 0);
    CHECK(svc.evict_idle(SessionService::Clock::now() + std::chrono::minutes(29)) == 0);
    CHECK(svc.evict_idle(SessionService::Clock::now() + std::chrono::minutes(31)) == 3);
    CHECK(svc.session_count() == 0);
}

TEST_CASE("session ids are unique") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    std::set<std::string> ids;
    for (int i = 0; i < 500; ++i) ids.insert(body(svc.create(kWineGlass))["session_id"].get<std::string>());
    CHECK(ids.size() == 500);
}

TEST_CASE("concurrent sessions stay isolated") {
    std::mt19937_64 seed_rng(21);
    testing::JointWorld world(seed_rng, {5, 4, {3, 3, 2}, 0.2, true});
    Lexicon lex(*world.schema());
    auto cfg = ControllerConfig::defaults_for(BackendKind::native);
    cfg.theta = 1.0;
    SessionService svc(world.backend(), lex, cfg);
    Controller reference(world.backend(), cfg);

    std::atomic<int> mismatches{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 6; ++t) {
        threads.emplace_back([&, t] {
            std::mt19937_64 rng(100 + t);
            for (int s = 0; s < 25; ++s) {
                auto hidden = world.sample(rng);
                const auto first = world.features()[0];
                json req = {{"features", json::array({json::array({first, hidden[first]})})}};
                auto j = body(svc.create(req.dump()));
                const auto id = j["session_id"].get<std::string>();
                while (j["event"]["kind"] == "question") {
                    const auto f = j["event"]["feature_type"].get<std::string>();
                    j = body(svc.answer(id, json{{"value", hidden[f]}}.dump()));
                }
                auto expected = reference.run_with_oracle(testing::evidence(*world.schema(), {{first, hidden[first]}}),
                                                          [&](std::string_view f) { return std::optional(hidden[std::string(f)]); });
                if (prediction_result_from_json(j["event"]["result"]) != expected) ++mismatches;
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(mismatches == 0);
    CHECK(svc.session_count() == 150);
}

TEST_CASE("HTTP routes") {
    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    HttpServer server(svc);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    server.start();

    httplib::Client cli("127.0.0.1", port);
    auto created = cli.Post("/sessions", std::string(kWineGlass), "application/json");
    REQUIRE(created);
    CHECK(created->status == 200);
    CHECK(created->get_header_value("Content-Type") == "application/json");
    const auto id = json::parse(created->body)["session_id"].get<std::string>();

    auto state = cli.Get("/sessions/" + id);
    REQUIRE(state);
    CHECK(json::parse(state->body)["outstanding"] == "fullness");

    auto answered = cli.Post("/sessions/" + id + "/answers", R"({"value": "empty"})", "application/json");
    REQUIRE(answered);
    CHECK(answered->status == 200);
    CHECK(json::parse(answered->body)["event"]["kind"] == "done");
    CHECK(cli.Post("/sessions/" + id + "/answers", R"({"value": "empty"})", "application/json")->status == 409);
    CHECK(cli.Post("/sessions", "", "application/json")->status == 400);
    CHECK(cli.Get("/sessions/unknown")->status == 404);
    auto schema = cli.Get("/schema");
    REQUIRE(schema);
    CHECK(schema->status == 200);
    CHECK(parse_schema(schema->body) == *w.schema);
    server.stop();
}

TEST_CASE("static files are served alongside the API") {
    auto dir = std::filesystem::temp_directory_path() / ("locus_static_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "index.html") << "<html>hello</html>";

    WineGlass w;
    SessionService svc(w.backend, w.lexicon, ControllerConfig::defaults_for(BackendKind::native));
    {
        HttpServer server(svc, dir);
        const int port = server.bind("127.0.0.1", 0);
        server.start();
        httplib::Client cli("127.0.0.1", port);
        auto page = cli.Get("/index.html");
        REQUIRE(page);
        CHECK(page->status == 200);
        CHECK(page->body == "<html>hello</html>");
        auto root = cli.Get("/");
        REQUIRE(root);
        CHECK(root->body == "<html>hello</html>");
        CHECK(cli.Get("/schema")->status == 200);
        server.stop();
    }
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(HttpServer(svc, dir), Error);
}
