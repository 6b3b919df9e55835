#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "locus/clarify.hpp"
#include "locus/cooccur.hpp"
#include "locus/eval.hpp"
#include "locus/parsing.hpp"
#include "locus/synthetic.hpp"

using namespace locus;

namespace {

struct Fixture {
    SchemaPtr schema = std::make_shared<const FeatureSchema>(load_schema(LOCUS_DATA_DIR "/schema.json"));
    SyntheticWorld world;
    ObjectFeaturesDB db;
    CoOccurBackend backend;
    Lexicon lexicon;

    explicit Fixture(std::size_t training)
        : world(generate_world(*schema, options(training))),
          db(build_feature_db(schema, world.annotations)),
          backend(std::make_shared<const CoOccurModel>(CoOccurModel::train(schema, world.training, {0.1}))),
          lexicon(*schema) {}

    static SyntheticWorldOptions options(std::size_t training) {
        SyntheticWorldOptions o;
        o.training_instances = training;
        o.objects = 60;
        o.room_fidelity = 0.85;
        o.location_fidelity = 0.85;
        o.noise_features = true;
        return o;
    }

    EvidenceSet sample_evidence() const { return extract_features("a red cup next to the knife", lexicon); }
};

const Fixture& fixture(std::size_t training) {
    static std::map<std::size_t, std::unique_ptr<Fixture>> cache;
    auto& f = cache[training];
    if (!f) f = std::make_unique<Fixture>(training);
    return *f;
}

void BM_Predict(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    const auto e = f.sample_evidence();
    for (auto _ : state) benchmark::DoNotOptimize(f.backend.predict(e, "room"));
}
BENCHMARK(BM_Predict)->Arg(200)->Arg(2000);

void BM_ExpectedGain(benchmark::State& state) {
    const auto& f = fixture(200);
    const auto e = f.sample_evidence();
    for (auto _ : state) benchmark::DoNotOptimize(expected_gain(f.backend, e, "room", "material"));
}
BENCHMARK(BM_ExpectedGain);

void BM_RankQuestions(benchmark::State& state) {
    const auto& f = fixture(200);
    const auto e = f.sample_evidence();
    const auto base = f.backend.predict(e, "room");
    for (auto _ : state) benchmark::DoNotOptimize(rank_questions(f.backend, e, base, {}));
}
BENCHMARK(BM_RankQuestions);

void BM_Parse(benchmark::State& state) {
    const auto& f = fixture(200);
    for (auto _ : state) benchmark::DoNotOptimize(extract_features("the empty glass bottle on the counter near the red oven", f.lexicon));
}
BENCHMARK(BM_Parse);

void BM_RunCondition(benchmark::State& state) {
    const auto& f = fixture(200);
    EvalSettings s;
    s.seed = 42;
    for (auto _ : state)
        benchmark::DoNotOptimize(run_condition(f.world.expressions, f.db, f.backend, f.lexicon, ablation_conditions()[3], s));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.world.expressions.size()));
}
BENCHMARK(BM_RunCondition)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
