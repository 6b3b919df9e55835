#pragma once

#include <nlohmann/json.hpp>

#include "locus/controller.hpp"
#include "locus/evidence.hpp"

namespace locus {

// JSON shapes used by the session service. Ranked lists are [[value, p], ...].

nlohmann::ordered_json to_json(const std::vector<RankedValue>& ranked);
nlohmann::ordered_json to_json(const TranscriptEntry& entry);
nlohmann::ordered_json to_json(const PredictionResult& result);
nlohmann::ordered_json to_json(const Event& event);
nlohmann::ordered_json to_json(const EvidenceSet& evidence);

std::vector<RankedValue> ranked_from_json(const nlohmann::json& j);
TranscriptEntry transcript_entry_from_json(const nlohmann::json& j);
PredictionResult prediction_result_from_json(const nlohmann::json& j);
Event event_from_json(const nlohmann::json& j);

}  // namespace locus
