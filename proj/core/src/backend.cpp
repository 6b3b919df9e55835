#include "locus/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "locus/error.hpp"

namespace locus {

using nlohmann::json;

Backend::Backend(SchemaPtr schema) : schema_(std::move(schema)) {
    if (!schema_) throw std::invalid_argument("backend requires a schema");
}

void check_predict_inputs(const FeatureSchema& schema, const EvidenceSet& evidence, std::string_view target) {
    if (!is_target_type(target))
        throw InvalidEvidence("prediction target must be room or location, got '" + std::string(target) + "'");
    for (const auto& a : evidence) {
        if (auto v = schema.validate(a)) throw InvalidEvidence(v->message);
        if (a.type == target) throw InvalidEvidence("evidence contains the prediction target '" + a.type + "'");
    }
}

Distribution Backend::predict(const EvidenceSet& evidence, std::string_view target) const {
    check_predict_inputs(*schema_, evidence, target);
    Distribution d = do_predict(evidence, schema_->at(target));
    if (auto problem = check_distribution(*schema_, d))
        throw BackendError(BackendError::Kind::malformed_response, name() + " backend: " + *problem);
    return d;
}

TableBackend::TableBackend(SchemaPtr schema, Fallback fallback) : Backend(std::move(schema)), fallback_(fallback) {}

TableBackend::Key TableBackend::make_key(std::vector<FeatureAssignment> known, std::string_view target) {
    std::sort(known.begin(), known.end());
    known.erase(std::unique(known.begin(), known.end()), known.end());
    return {std::move(known), std::string(target)};
}

void TableBackend::set(const std::vector<FeatureAssignment>& known, std::string_view target, std::vector<double> probabilities) {
    auto evidence = EvidenceSet::from_pairs(schema(), known);
    check_predict_inputs(schema(), evidence, target);
    Distribution d{std::string(target), schema().values(target), std::move(probabilities)};
    if (auto problem = check_distribution(schema(), d)) throw SchemaError("table entry: " + *problem);
    entries_[make_key(evidence.assignments(), target)] = std::move(d.probabilities);
}

Distribution TableBackend::do_predict(const EvidenceSet& evidence, const FeatureType& target) const {
    auto it = entries_.find(make_key(evidence.assignments(), target.name));
    if (it != entries_.end()) return Distribution{target.name, target.values, it->second};
    if (fallback_ == Fallback::error)
        throw BackendError(BackendError::Kind::unavailable, "table backend has no entry for this evidence");
    return Distribution::uniform(target.name, target.values);
}

std::unique_ptr<TableBackend> TableBackend::parse(SchemaPtr schema, std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("table fixture: ") + e.what());
    }
    auto fallback = Fallback::uniform;
    if (doc.contains("fallback")) {
        auto f = doc.at("fallback").get<std::string>();
        if (f == "error") fallback = Fallback::error;
        else if (f != "uniform") throw DataError("table fixture: unknown fallback '" + f + "'");
    }
    auto table = std::make_unique<TableBackend>(std::move(schema), fallback);
    const auto& entries = doc.value("entries", json::array());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        try {
            std::vector<FeatureAssignment> known;
            for (const auto& pair : e.at("known")) known.push_back({pair.at(0).get<std::string>(), pair.at(1).get<std::string>()});
            table->set(known, normalize_token(e.at("target").get<std::string>()), e.at("probabilities").get<std::vector<double>>());
        } catch (const json::exception& ex) {
            throw DataError("table fixture: entries[" + std::to_string(i) + "]: " + ex.what());
        } catch (const Error& ex) {
            throw DataError("table fixture: entries[" + std::to_string(i) + "]: " + ex.what());
        }
    }
    return table;
}

std::unique_ptr<TableBackend> TableBackend::load(SchemaPtr schema, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open table fixture '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(std::move(schema), buf.str());
}

}  // namespace locus
