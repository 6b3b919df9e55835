// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "locus/clarify.hpp"
#include "locus/controller.hpp"
#include "locus/cooccur.hpp"
#include "locus/eval.hpp"
#include "locus/external.hpp"
#include "locus/serialize.hpp"
#include "locus/service.hpp"
#include "locus/synthetic.hpp"
#include "support.hpp"

using namespace locus;
using json = nlohmann::json;

namespace {

constexpr double kGainTolerance = 1e-9;
constexpr double kEntropyTolerance = 1e-12;
constexpr double kMajorityMargin = 0.05;
constexpr double kRoomGapMin = 0.2;

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    std::string name;
    double limit_seconds;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome fail(std::string why) { return {false, std::move(why)}; }

// Gains from the library against summation over the joint.
Outcome gain_oracle() {
    std::mt19937_64 rng(20240611);
    int instances = 0, comparisons = 0;
    double worst = 0.0;
    for (int w = 0; w < 150; ++w) {
        std::vector<std::size_t> sizes(2 + rng() % 3);
        for (auto& s : sizes) s = 2 + rng() % 3;
        testing::JointWorld world(rng, {3 + rng() % 6, 3 + rng() % 6, sizes, 0.25, true});
        const bool location = rng() % 2;
        const std::string target = location ? "location" : "room";
        auto hidden = world.sample(rng);
        std::map<std::string, std::string> known;
        EvidenceSet e;
        if (location) {
            known["room"] = hidden["room"];
            e.assign(*world.schema(), {"room", hidden["room"]});
        }
        for (std::size_t i = 1; i < world.features().size(); ++i) {
            const auto& f = world.features()[i];
            if (rng() % 2) {
                known[f] = hidden[f];
                e.assign(*world.schema(), {f, hidden[f]});
            }
        }
        ++instances;
        for (const auto& f : world.features()) {
            if (known.contains(f)) continue;
            const double err = std::abs(expected_gain(world.backend(), e, target, f).gain - world.brute_gain(target, known, f));
            worst = std::max(worst, err);
            ++comparisons;
        }
    }
    if (instances < 100) return fail("too few instances");
    if (worst > kGainTolerance) return fail(fmt("max |error| %.3g > %.0e", worst, kGainTolerance));
    return {true, fmt("%d instances, %d gains, max |error| %.3g", instances, comparisons, worst)};
}

Outcome entropy_calibration() {
    double worst = 0.0;
    for (std::size_t n = 2; n <= 16; ++n) {
        std::vector<std::string> c;
        for (std::size_t i = 0; i < n; ++i) c.push_back("v" + std::to_string(i));
        auto u = Distribution::uniform("room", c);
        worst = std::max(worst, std::abs(entropy(u) - std::log(static_cast<double>(n))));
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> point(n, 0.0);
            point[j] = 1.0;
            if (entropy(Distribution{"room", c, point}) != 0.0) return fail(fmt("point mass n=%zu has nonzero entropy", n));
            double prev = entropy(u);
            for (int step = 1; step <= 20; ++step) {
                const double t = step / 20.0;
                std::vector<double> p(n);
                for (std::size_t i = 0; i < n; ++i) p[i] = (1 - t) / static_cast<double>(n) + (i == j ? t : 0.0);
                const double h = entropy(Distribution{"room", c, p});
                if (!(h < prev)) return fail(fmt("entropy not decreasing at n=%zu, t=%.2f", n, t));
                prev = h;
            }
        }
    }
    if (worst > kEntropyTolerance) return fail(fmt("uniform entropy off by %.3g", worst));
    return {true, fmt("n=2..16, max |H(uniform)-ln n| %.3g", worst)};
}

Outcome cooccur_exactness() {
    auto schema = testing::reference_schema();
    auto m = CoOccurModel::train(schema, testing::hand_instances(), {0.0});
    auto bowl = cooccur_predict(m, testing::evidence(*schema, {{"class", "bowl"}}), "room");
    auto clean = cooccur_predict(m, testing::evidence(*schema, {{"class", "bowl"}, {"cleanliness", "clean"}}), "room");
    for (const auto& r : schema->values("room")) {
        const double want_bowl = r == "kitchen" ? 2.0 / 3.0 : r == "dining_room" ? 1.0 / 3.0 : 0.0;
        const double want_clean = r == "kitchen" ? 0.6 : r == "dining_room" ? 0.4 : 0.0;
        if (bowl.probability_of(r) != want_bowl) return fail(fmt("{bowl} %s = %.17g", r.c_str(), bowl.probability_of(r)));
        if (clean.probability_of(r) != want_clean) return fail(fmt("{bowl, clean} %s = %.17g", r.c_str(), clean.probability_of(r)));
    }
    return {true, "kitchen 2/3 and 0.6 reproduced exactly"};
}

struct Corpus {
    SyntheticWorld world;
    ObjectFeaturesDB db;
    std::shared_ptr<const CoOccurModel> model;
    CoOccurBackend backend;
    Lexicon lexicon;

    Corpus(const SyntheticWorldOptions& o, double alpha)
        : world(generate_world(*testing::reference_schema(), o)),
          db(build_feature_db(testing::reference_schema(), world.annotations)),
          model(std::make_shared<CoOccurModel>(CoOccurModel::train(testing::reference_schema(), world.training, {alpha}))),
          backend(model),
          lexicon(*testing::reference_schema()) {}

    AnswerOracle oracle(const std::string& object) const {
        return [this, object](std::string_view f) { return oracle_answer(db, object, f); };
    }
};

SyntheticWorldOptions deterministic_options() {
    SyntheticWorldOptions o;
    o.training_instances = 200;
    o.objects = 40;
    o.seed = 7;
    return o;
}

SyntheticWorldOptions ambiguous_options(std::uint64_t seed) {
    SyntheticWorldOptions o;
    o.training_instances = 300;
    o.objects = 60;
    o.room_fidelity = 0.85;
    o.location_fidelity = 0.85;
    o.noise_features = true;
    o.seed = seed;
    return o;
}

EvalSettings settings() {
    EvalSettings s;
    s.controller = ControllerConfig::defaults_for(BackendKind::native);
    s.seed = 42;
    return s;
}

Outcome deterministic_world() {
    Corpus c(deterministic_options(), 0.0);
    const auto conditions = ablation_conditions();
    auto informative = run_condition(c.world.expressions, c.db, c.backend, c.lexicon, conditions[3], settings());
    auto none = run_condition(c.world.expressions, c.db, c.backend, c.lexicon, conditions[1], settings());

    Controller controller(c.backend, settings().controller);
    std::map<std::string, std::size_t> location_counts;
    std::size_t episodes = 0;
    int most_per_stage = 0;
    for (const auto& e : c.world.expressions) {
        if (e.flagged) continue;
        ++episodes;
        ++location_counts[ground_truth(c.db, e.object_id).second];
        auto r = controller.run_with_oracle(extract_features(e.text, c.lexicon), c.oracle(e.object_id));
        int per_stage[2] = {0, 0};
        for (const auto& t : r.transcript)
            if (t.kind == TranscriptEntry::Kind::answer) ++per_stage[t.stage == Stage::room ? 0 : 1];
        most_per_stage = std::max({most_per_stage, per_stage[0], per_stage[1]});
    }
    std::size_t majority = 0;
    for (const auto& [loc, n] : location_counts) majority = std::max(majority, n);
    const double majority_rate = static_cast<double>(majority) / static_cast<double>(episodes);

    const auto detail = fmt("informative R_H@1 %.3f L_H@1 %.3f, max answers/stage %d; none L_H@1 %.3f vs majority %.3f (%zu episodes)",
                            informative.r_h1, informative.l_h1, most_per_stage, none.l_h1, majority_rate, episodes);
    const bool ok = informative.faults == 0 && informative.r_h1 == 1.0 && informative.l_h1 == 1.0 && most_per_stage <= 1 &&
                    none.l_h1 <= majority_rate + kMajorityMargin;
    return {ok, detail};
}

Outcome ablation_ordering() {
    Corpus c(ambiguous_options(42), 0.1);
    auto report = run_conditions(c.world.expressions, c.db, c.backend, c.lexicon, ablation_conditions(), settings());
    const auto& none = report.conditions[1];
    const auto& random = report.conditions[2];
    const auto& informative = report.conditions[3];
    const auto detail = fmt("R_H@1 none %.3f random %.3f informative %.3f; L_H@1 none %.3f random %.3f informative %.3f", none.r_h1,
                            random.r_h1, informative.r_h1, none.l_h1, random.l_h1, informative.l_h1);
    const bool ok = informative.r_h1 >= random.r_h1 && random.r_h1 >= none.r_h1 && informative.l_h1 >= random.l_h1 &&
                    random.l_h1 >= none.l_h1 && informative.r_h1 - none.r_h1 >= kRoomGapMin;
    return {ok, detail};
}

Outcome iteration_room_identity() {
    const auto conditions = ablation_conditions();
    int runs = 0;
    auto check = [&](const Corpus& c, double theta) -> std::optional<std::string> {
        auto s = settings();
        s.controller.theta = theta;
        auto flat = run_condition(c.world.expressions, c.db, c.backend, c.lexicon, conditions[0], s);
        auto iter = run_condition(c.world.expressions, c.db, c.backend, c.lexicon, conditions[1], s);
        ++runs;
        if (flat.r_h1 != iter.r_h1 || flat.r_h3 != iter.r_h3)
            return fmt("room scores differ: %.6f/%.6f vs %.6f/%.6f", flat.r_h1, flat.r_h3, iter.r_h1, iter.r_h3);
        return std::nullopt;
    };
    if (auto err = check(Corpus(deterministic_options(), 0.0), 0.65)) return fail(*err);
    for (std::uint64_t seed = 1; seed <= 6; ++seed)
        for (double theta : {0.65, 0.99})
            if (auto err = check(Corpus(ambiguous_options(seed), 0.1), theta)) return fail(*err);
    return {true, fmt("%d runs, room H@1 and H@3 identical", runs)};
}

Outcome controller_fuzz() {
    std::mt19937_64 rng(1000);
    int longest = 0;
    for (int session = 0; session < 1000; ++session) {
        testing::JointWorld world(rng, {2 + rng() % 6, 2 + rng() % 5, {2 + rng() % 3, 2 + rng() % 3, 2 + rng() % 2}, 0.3, true});
        const auto& schema = *world.schema();
        ControllerConfig cfg;
        cfg.theta = 0.2 + 0.8 * static_cast<double>(rng() % 1001) / 1000.0;
        cfg.question_budget = static_cast<int>(rng() % 4);
        const auto p = rng() % 3;
        cfg.policy = p == 0 ? ClarificationPolicy::none() : p == 1 ? ClarificationPolicy::random(rng()) : ClarificationPolicy::informative();
        if (rng() % 3 == 0) cfg.budget_scope = BudgetScope::per_stage;
        cfg.iterative = rng() % 4 != 0;
        Controller c(world.backend(), cfg);

        auto hidden = world.sample(rng);
        EvidenceSet start;
        if (rng() % 2) start.assign(schema, {world.features()[0], hidden[world.features()[0]]});

        const int budget = cfg.question_budget * (cfg.budget_scope == BudgetScope::per_stage ? 2 : 1);
        const int bound = budget + static_cast<int>(world.features().size());
        auto t = c.start(start);
        int steps = 0;
        while (t.event.kind != Event::Kind::done) {
            if (t.event.kind == Event::Kind::fault) return fail(fmt("session %d faulted", session));
            if (t.event.kind == Event::Kind::stage_prediction) {
                t = c.step(std::move(t.state), Proceed{});
                continue;
            }
            if (++steps > bound) return fail(fmt("session %d exceeded %d question steps", session, bound));
            const auto& f = t.event.feature_type;
            if (is_target_type(f)) return fail(fmt("session %d asked %s", session, f.c_str()));
            const auto roll = rng() % 5;
            if (roll == 0) t = c.step(std::move(t.state), Skip{});
            else if (roll == 1) t = c.step(std::move(t.state), Answer{schema.values(f)[rng() % schema.values(f).size()]});
            else t = c.step(std::move(t.state), Answer{hidden[f]});
        }
        longest = std::max(longest, steps);

        const auto& s = t.state;
        std::set<std::string> asked;
        for (const auto& q : s.asked)
            if (!asked.insert(q.feature_type).second) return fail(fmt("session %d repeated %s", session, q.feature_type.c_str()));
        if (s.answered_count() > budget) return fail(fmt("session %d answered %d > budget %d", session, s.answered_count(), budget));
        if (cfg.budget_scope == BudgetScope::per_stage)
            for (auto stage : {Stage::room, Stage::location})
                if (std::count_if(s.asked.begin(), s.asked.end(), [&](const auto& q) { return q.answer && q.stage == stage; }) >
                    cfg.question_budget)
                    return fail(fmt("session %d overspent a stage budget", session));

        auto r = c.start(start);
        for (const auto& reply : replies_from_transcript(s.transcript)) r = c.step(std::move(r.state), reply);
        if (!(r.state == s) || !(r.event == t.event)) return fail(fmt("session %d does not replay", session));
    }
    return {true, fmt("1000 sessions, longest %d question steps", longest)};
}

Outcome transport_transparency() {
    Corpus c(ambiguous_options(99), 0.1);
    BackendHttpServer model_server(c.backend);
    const int model_port = model_server.bind("127.0.0.1", 0);
    model_server.start();
    ExternalBackend external(testing::reference_schema(), Endpoint::parse("http://127.0.0.1:" + std::to_string(model_port)));

    const auto cfg = ControllerConfig::defaults_for(BackendKind::external);
    SessionService service(external, c.lexicon, cfg);
    HttpServer api(service);
    const int api_port = api.bind("127.0.0.1", 0);
    api.start();
    httplib::Client client("127.0.0.1", api_port);

    Controller local(c.backend, cfg);
    std::vector<const ExpressionRecord*> usable;
    for (const auto& e : c.world.expressions)
        if (!e.flagged) usable.push_back(&e);

    std::mt19937_64 rng(50);
    int questions = 0;
    for (int episode = 0; episode < 50; ++episode) {
        const auto& expr = *usable[rng() % usable.size()];
        // Per-episode answers: mostly truthful, sometimes skipped or wrong.
        std::map<std::string, std::optional<std::string>> answers;
        const auto salt = rng();
        auto oracle = [&](std::string_view f) -> std::optional<std::string> {
            auto it = answers.find(std::string(f));
            if (it != answers.end()) return it->second;
            std::mt19937_64 local_rng(salt ^ std::hash<std::string_view>{}(f));
            std::optional<std::string> a = oracle_answer(c.db, expr.object_id, f);
            const auto roll = local_rng() % 6;
            if (roll == 0) a.reset();
            if (roll == 1) {
                const auto& v = c.db.schema().values(f);
                a = v[local_rng() % v.size()];
            }
            return answers[std::string(f)] = a;
        };

        auto res = client.Post("/sessions", json{{"text", expr.text}}.dump(), "application/json");
        if (!res || res->status != 200) return fail(fmt("episode %d: create failed", episode));
        auto doc = json::parse(res->body);
        const auto id = doc["session_id"].get<std::string>();
        while (doc["event"]["kind"] == "question") {
            ++questions;
            auto a = oracle(doc["event"]["feature_type"].get<std::string>());
            const json reply = a ? json{{"value", *a}} : json{{"skip", true}};
            res = client.Post("/sessions/" + id + "/answers", reply.dump(), "application/json");
            if (!res || res->status != 200) return fail(fmt("episode %d: answer failed", episode));
            doc = json::parse(res->body);
        }
        if (doc["event"]["kind"] != "done") return fail(fmt("episode %d ended with %s", episode, doc["event"]["kind"].dump().c_str()));
        const auto remote = prediction_result_from_json(doc["event"]["result"]);
        const auto in_process = local.run_with_oracle(extract_features(expr.text, c.lexicon), oracle);
        if (!(remote == in_process)) return fail(fmt("episode %d: results differ", episode));
    }
    api.stop();
    model_server.stop();
    return {true, fmt("50 episodes over HTTP, %d questions, results identical", questions)};
}

Outcome threshold_behaviour() {
    auto schema = testing::make_schema({"kitchen", "bathroom"}, {"sink", "shelf"}, {{"cleanliness", {"clean", "dirty"}}});
    TableBackend b(schema);
    b.set({}, "room", {0.66, 0.34});
    b.set({{"cleanliness", "clean"}}, "room", {1, 0});
    b.set({{"cleanliness", "dirty"}}, "room", {0, 1});
    for (const auto& room : schema->values("room")) {
        b.set({{"room", room}}, "location", {1, 0});
        for (const auto& v : schema->values("cleanliness")) b.set({{"cleanliness", v}, {"room", room}}, "location", {1, 0});
    }
    auto asked = [&](double theta) {
        ControllerConfig cfg;
        cfg.theta = theta;
        auto r = Controller(b, cfg).run_with_oracle({}, [](std::string_view) { return std::optional<std::string>("clean"); });
        return static_cast<int>(std::count_if(r.transcript.begin(), r.transcript.end(),
                                              [](const auto& e) { return e.kind == TranscriptEntry::Kind::question; }));
    };
    const int low = asked(0.65), high = asked(0.99);
    return {low == 0 && high == 1, fmt("C=0.66: theta 0.65 asked %d, theta 0.99 asked %d", low, high)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"information-gain oracle equivalence", 10, gain_oracle},
        {"entropy calibration", 1, entropy_calibration},
        {"co-occurrence exactness", 1, cooccur_exactness},
        {"deterministic synthetic world", 60, deterministic_world},
        {"ablation ordering", 120, ablation_ordering},
        {"iteration leaves room scores unchanged", 60, iteration_room_identity},
        {"controller contract fuzz", 30, controller_fuzz},
        {"transport transparency", 30, transport_transparency},
        {"threshold behaviour", 1, threshold_behaviour},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.pass && secs > c.limit_seconds) o = fail(o.detail + fmt("; over the %.0f s limit", c.limit_seconds));
        if (!o.pass) ++failures;
        std::printf("%s  %-40s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
    return failures == 0 ? 0 : 1;
}
