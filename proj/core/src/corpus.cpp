#include "locus/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "locus/error.hpp"
#include "locus/parsing.hpp"

namespace locus {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + std::string(what) + " file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Calls fn(doc, "source:line") for every non-blank line.
template <typename Fn>
void for_each_jsonl(std::string_view text, std::string_view source, Fn&& fn) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = std::string(source) + ":" + std::to_string(lineno);
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(where + ": " + e.what());
        }
        try {
            fn(doc, where);
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
    }
}

std::map<std::string, std::vector<std::string>> read_features(const json& j, const std::string& where) {
    if (!j.is_object()) throw DataError(where + ": 'features' must be an object");
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [k, v] : j.items()) {
        auto& values = out[normalize_token(k)];
        if (v.is_string()) values.push_back(normalize_token(v.get<std::string>()));
        else if (v.is_array())
            for (const auto& x : v) values.push_back(normalize_token(x.get<std::string>()));
        else throw DataError(where + ": feature '" + k + "' must be a string or a list of strings");
    }
    return out;
}

std::string canonical_sentinel(const std::string& v) { return is_sentinel(v) ? (v == kNoneSentinel ? std::string(kNoneSentinel) : std::string(kNaSentinel)) : v; }

}  // namespace

std::vector<ExpressionRecord> ExpressionSet::usable() const {
    std::vector<ExpressionRecord> out;
    for (const auto& r : records)
        if (!r.flagged) out.push_back(r);
    return out;
}

std::size_t ExpressionSet::flagged_count() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.flagged; }));
}

const ObjectFeaturesDB::Object& ObjectFeaturesDB::at(std::string_view object_id) const {
    auto it = objects_.find(std::string(object_id));
    if (it == objects_.end()) throw DataError("unknown object id '" + std::string(object_id) + "'");
    return it->second;
}

ObjectFeaturesDB build_feature_db(SchemaPtr schema, const std::vector<AnnotationRecord>& annotations) {
    const auto& sch = *schema;
    // object -> annotator -> type -> chosen values
    std::map<std::string, std::map<std::string, std::map<std::string, std::set<std::string>>>> votes;
    for (const auto& rec : annotations) {
        if (rec.object_id.empty()) throw DataError("annotation without an object id");
        auto& per_annotator = votes[rec.object_id][rec.annotator_id];
        for (const auto& [raw_type, values] : rec.features) {
            auto type = normalize_token(raw_type);
            const auto* ft = sch.find(type);
            if (ft == nullptr) throw DataError("object '" + rec.object_id + "': unknown feature type '" + type + "'");
            auto& chosen = per_annotator[type];
            for (const auto& raw : values) {
                auto v = normalize_token(raw);
                if (is_sentinel(v)) continue;
                if (!sch.value_index(type, v))
                    throw DataError("object '" + rec.object_id + "': unknown value '" + v + "' for feature type '" + type + "'");
                chosen.insert(v);
            }
            if (!ft->multi_valued && chosen.size() > 1)
                throw DataError("object '" + rec.object_id + "', annotator '" + rec.annotator_id + "': feature type '" + type +
                                "' is single-valued but got " + std::to_string(chosen.size()) + " values");
        }
    }

    ObjectFeaturesDB db(schema);
    for (const auto& [object_id, by_annotator] : votes) {
        ObjectFeaturesDB::Object obj;
        obj.annotators = by_annotator.size();
        std::map<std::string, std::map<std::string, std::size_t>> counts;
        for (const auto& [annotator, types] : by_annotator)
            for (const auto& [type, chosen] : types) {
                auto& c = counts[type];
                for (const auto& v : chosen) ++c[v];
            }
        for (const auto& t : sch.types()) {
            auto it = counts.find(t.name);
            if (it == counts.end()) continue;
            auto& resolved = obj.features[t.name];
            for (const auto& v : t.values) {
                auto c = it->second.find(v);
                if (c != it->second.end() && 2 * c->second > obj.annotators) resolved.push_back(v);
            }
        }
        for (auto target : {kRoom, kLocation}) {
            auto it = obj.features.find(std::string(target));
            if (it == obj.features.end() || it->second.empty())
                throw DataError("object '" + object_id + "' has no majority " + std::string(target) + " annotation");
            if (it->second.size() > 1) throw DataError("object '" + object_id + "' resolves to several " + std::string(target) + " values");
        }
        obj.room = obj.features.at(std::string(kRoom)).front();
        obj.location = obj.features.at(std::string(kLocation)).front();
        db.insert(object_id, std::move(obj));
    }
    return db;
}

std::optional<std::string> oracle_answer(const ObjectFeaturesDB& db, std::string_view object_id, std::string_view feature) {
    const auto& obj = db.at(object_id);
    db.schema().at(feature);
    auto it = obj.features.find(std::string(feature));
    if (it == obj.features.end() || it->second.empty()) return std::nullopt;
    return it->second.front();
}

std::pair<std::string, std::string> ground_truth(const ObjectFeaturesDB& db, std::string_view object_id) {
    const auto& obj = db.at(object_id);
    return {obj.room, obj.location};
}

std::vector<ObjectInstance> parse_instances(std::string_view text, std::string_view source) {
    std::vector<ObjectInstance> out;
    for_each_jsonl(text, source, [&](const json& doc, const std::string& where) {
        ObjectInstance inst;
        inst.id = doc.at("id").get<std::string>();
        inst.features = read_features(doc.at("features"), where);
        out.push_back(std::move(inst));
    });
    return out;
}

std::vector<ObjectInstance> load_instances(const std::filesystem::path& path) {
    return parse_instances(read_file(path, "instances"), path.string());
}

std::vector<AnnotationRecord> parse_annotations(std::string_view text, std::string_view source) {
    std::vector<AnnotationRecord> out;
    for_each_jsonl(text, source, [&](const json& doc, const std::string& where) {
        AnnotationRecord rec;
        rec.object_id = doc.at("object_id").get<std::string>();
        rec.annotator_id = doc.at("annotator_id").get<std::string>();
        rec.features = read_features(doc.at("features"), where);
        for (auto& [type, values] : rec.features)
            for (auto& v : values) v = canonical_sentinel(v);
        out.push_back(std::move(rec));
    });
    return out;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    return parse_annotations(read_file(path, "annotations"), path.string());
}

bool mentions_target(std::string_view text, const FeatureSchema& schema) {
    const auto words = tokenize(text);
    for (auto target : {kRoom, kLocation}) {
        for (const auto& v : schema.values(target)) {
            const auto phrase = tokenize(v);
            if (phrase.empty() || phrase.size() > words.size()) continue;
            if (std::search(words.begin(), words.end(), phrase.begin(), phrase.end()) != words.end()) return true;
        }
    }
    return false;
}

ExpressionSet parse_expressions(std::string_view text, const FeatureSchema& schema, std::string_view source) {
    ExpressionSet out;
    for_each_jsonl(text, source, [&](const json& doc, const std::string&) {
        ExpressionRecord r;
        r.object_id = doc.at("object_id").get<std::string>();
        r.text = doc.at("text").get<std::string>();
        if (r.text.find_first_not_of(" \t\r\n") == std::string::npos) {
            ++out.dropped_empty;
            return;
        }
        r.flagged = mentions_target(r.text, schema);
        out.records.push_back(std::move(r));
    });
    return out;
}

ExpressionSet load_expressions(const std::filesystem::path& path, const FeatureSchema& schema) {
    return parse_expressions(read_file(path, "expressions"), schema, path.string());
}

std::string to_jsonl(const std::vector<ObjectInstance>& instances) {
    std::string out;
    for (const auto& i : instances) {
        ordered_json doc;
        doc["id"] = i.id;
        doc["features"] = i.features;
        out += doc.dump() + "\n";
    }
    return out;
}

std::string to_jsonl(const std::vector<AnnotationRecord>& annotations) {
    std::string out;
    for (const auto& a : annotations) {
        ordered_json doc;
        doc["object_id"] = a.object_id;
        doc["annotator_id"] = a.annotator_id;
        doc["features"] = a.features;
        out += doc.dump() + "\n";
    }
    return out;
}

std::string to_jsonl(const std::vector<ExpressionRecord>& expressions) {
    std::string out;
    for (const auto& e : expressions) {
        ordered_json doc;
        doc["object_id"] = e.object_id;
        doc["text"] = e.text;
        out += doc.dump() + "\n";
    }
    return out;
}

}  // namespace locus
