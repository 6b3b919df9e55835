#include "locus/serialize.hpp"

#include "locus/error.hpp"

namespace locus {

using ojson = nlohmann::ordered_json;

namespace {

Stage stage_from(const std::string& s) {
    if (s == "room") return Stage::room;
    if (s == "location") return Stage::location;
    if (s == "done") return Stage::done;
    throw DataError("unknown stage '" + s + "'");
}

TranscriptEntry::Kind entry_kind_from(const std::string& s) {
    using K = TranscriptEntry::Kind;
    for (auto k : {K::prediction, K::question, K::answer, K::skip, K::evidence_replaced, K::stage_prediction, K::done, K::fault})
        if (to_string(k) == s) return k;
    throw DataError("unknown transcript entry kind '" + s + "'");
}

Event::Kind event_kind_from(const std::string& s) {
    using K = Event::Kind;
    for (auto k : {K::question, K::stage_prediction, K::done, K::fault})
        if (to_string(k) == s) return k;
    throw DataError("unknown event kind '" + s + "'");
}

template <typename F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed document: ") + e.what());
    }
}

}  // namespace

ojson to_json(const std::vector<RankedValue>& ranked) {
    ojson out = ojson::array();
    for (const auto& r : ranked) out.push_back(ojson::array({r.value, r.probability}));
    return out;
}

ojson to_json(const TranscriptEntry& e) {
    using K = TranscriptEntry::Kind;
    ojson j;
    j["kind"] = std::string(to_string(e.kind));
    j["stage"] = std::string(to_string(e.stage));
    if (!e.feature_type.empty()) j["feature_type"] = e.feature_type;
    if (!e.value.empty()) j["value"] = e.value;
    if (e.kind == K::prediction || e.kind == K::stage_prediction || e.kind == K::question) j["confidence"] = e.confidence;
    if (e.kind == K::question) j["gain"] = e.gain;
    if (!e.ranked.empty()) j["ranked"] = to_json(e.ranked);
    if (!e.message.empty()) j["message"] = e.message;
    return j;
}

ojson to_json(const PredictionResult& r) {
    ojson j;
    j["room_ranked"] = to_json(r.room_ranked);
    j["location_ranked"] = to_json(r.location_ranked);
    j["questions_asked"] = r.questions_asked;
    j["questions_skipped"] = r.questions_skipped;
    ojson t = ojson::array();
    for (const auto& e : r.transcript) t.push_back(to_json(e));
    j["transcript"] = std::move(t);
    return j;
}

ojson to_json(const Event& e) {
    ojson j;
    j["kind"] = std::string(to_string(e.kind));
    switch (e.kind) {
        case Event::Kind::question:
            j["feature_type"] = e.feature_type;
            j["prompt"] = e.prompt;
            break;
        case Event::Kind::stage_prediction:
            j["stage"] = std::string(to_string(e.stage));
            j["ranked"] = to_json(e.ranked);
            j["confidence"] = e.confidence;
            break;
        case Event::Kind::done:
            if (e.result) j["result"] = to_json(*e.result);
            break;
        case Event::Kind::fault:
            j["message"] = e.message;
            break;
    }
    return j;
}

ojson to_json(const EvidenceSet& evidence) {
    ojson out = ojson::array();
    for (const auto& a : evidence) out.push_back(ojson::array({a.type, a.value}));
    return out;
}

std::vector<RankedValue> ranked_from_json(const nlohmann::json& j) {
    return guarded([&] {
        std::vector<RankedValue> out;
        if (!j.is_array()) throw DataError("ranked list must be an array");
        for (const auto& item : j) {
            if (!item.is_array() || item.size() != 2) throw DataError("ranked entries must be [value, probability]");
            out.push_back({item.at(0).get<std::string>(), item.at(1).get<double>()});
        }
        return out;
    });
}

TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
    return guarded([&] {
        TranscriptEntry e;
        e.kind = entry_kind_from(j.at("kind").get<std::string>());
        e.stage = stage_from(j.at("stage").get<std::string>());
        e.feature_type = j.value("feature_type", "");
        e.value = j.value("value", "");
        e.confidence = j.value("confidence", 0.0);
        e.gain = j.value("gain", 0.0);
        if (j.contains("ranked")) e.ranked = ranked_from_json(j.at("ranked"));
        e.message = j.value("message", "");
        return e;
    });
}

PredictionResult prediction_result_from_json(const nlohmann::json& j) {
    return guarded([&] {
        PredictionResult r;
        r.room_ranked = ranked_from_json(j.at("room_ranked"));
        r.location_ranked = ranked_from_json(j.at("location_ranked"));
        r.questions_asked = j.at("questions_asked").get<int>();
        r.questions_skipped = j.at("questions_skipped").get<int>();
        for (const auto& e : j.at("transcript")) r.transcript.push_back(transcript_entry_from_json(e));
        return r;
    });
}

Event event_from_json(const nlohmann::json& j) {
    return guarded([&] {
        Event e;
        e.kind = event_kind_from(j.at("kind").get<std::string>());
        switch (e.kind) {
            case Event::Kind::question:
                e.feature_type = j.at("feature_type").get<std::string>();
                e.prompt = j.at("prompt").get<std::string>();
                break;
            case Event::Kind::stage_prediction:
                e.stage = stage_from(j.at("stage").get<std::string>());
                e.ranked = ranked_from_json(j.at("ranked"));
                e.confidence = j.value("confidence", 0.0);
                break;
            case Event::Kind::done:
                e.stage = Stage::done;
                if (j.contains("result")) e.result = prediction_result_from_json(j.at("result"));
                break;
            case Event::Kind::fault:
                e.message = j.value("message", "");
                break;
        }
        return e;
    });
}

}  // namespace locus
