#include "locus/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "locus/error.hpp"

namespace locus {

using nlohmann::json;

std::string normalize_token(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back('_');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

bool is_target_type(std::string_view type) noexcept { return type == kRoom || type == kLocation; }

FeatureSchema::FeatureSchema(std::vector<FeatureType> types) : types_(std::move(types)) {
    value_lookup_.resize(types_.size());
    for (std::size_t i = 0; i < types_.size(); ++i) {
        auto& t = types_[i];
        t.name = normalize_token(t.name);
        if (t.name.empty()) throw SchemaError("feature_types[" + std::to_string(i) + "]: empty type name");
        if (!type_lookup_.emplace(t.name, i).second) throw SchemaError("duplicate feature type '" + t.name + "'");
        if (t.values.empty()) throw SchemaError("feature type '" + t.name + "' has no values");
        for (std::size_t j = 0; j < t.values.size(); ++j) {
            auto& v = t.values[j];
            v = normalize_token(v);
            if (v.empty()) throw SchemaError("feature type '" + t.name + "': empty value at index " + std::to_string(j));
            if (!value_lookup_[i].emplace(v, j).second)
                throw SchemaError("duplicate value '" + v + "' under feature type '" + t.name + "'");
        }
    }
    for (auto target : {kRoom, kLocation}) {
        auto* t = find(target);
        if (t == nullptr) throw SchemaError("schema is missing required target type '" + std::string(target) + "'");
        if (t->queryable) throw SchemaError("target type '" + t->name + "' must be non-queryable");
        if (t->multi_valued) throw SchemaError("target type '" + t->name + "' must be single-valued");
    }
}

const FeatureType* FeatureSchema::find(std::string_view type) const noexcept {
    auto it = type_lookup_.find(type);
    return it == type_lookup_.end() ? nullptr : &types_[it->second];
}

const FeatureType& FeatureSchema::at(std::string_view type) const {
    if (auto* t = find(type)) return *t;
    throw SchemaError("unknown feature type '" + std::string(type) + "'");
}

std::optional<std::size_t> FeatureSchema::type_index(std::string_view type) const noexcept {
    auto it = type_lookup_.find(type);
    if (it == type_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> FeatureSchema::value_index(std::string_view type, std::string_view value) const noexcept {
    auto ti = type_index(type);
    if (!ti) return std::nullopt;
    auto& lookup = value_lookup_[*ti];
    auto it = lookup.find(value);
    if (it == lookup.end()) return std::nullopt;
    return it->second;
}

std::optional<SchemaViolation> FeatureSchema::validate(const FeatureAssignment& a) const {
    if (!type_index(a.type))
        return SchemaViolation{SchemaViolation::Kind::unknown_type, "unknown feature type '" + a.type + "'"};
    if (!value_index(a.type, a.value))
        return SchemaViolation{SchemaViolation::Kind::unknown_value,
                               "unknown value '" + a.value + "' for feature type '" + a.type + "'"};
    return std::nullopt;
}

std::size_t FeatureSchema::pair_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : types_) n += t.values.size();
    return n;
}

std::optional<SchemaViolation> validate_assignment(const FeatureSchema& schema, const FeatureAssignment& a) {
    return schema.validate(a);
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

[[noreturn]] void field_error(std::string_view source, const std::string& field, const std::string& what) {
    throw SchemaError(std::string(source) + ": " + field + ": " + what);
}

}  // namespace

FeatureSchema parse_schema(std::string_view text, std::string_view source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string(source) + ":" + std::to_string(line_of(text, e.byte)) + ": parse error: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("feature_types"))
        field_error(source, "<root>", "expected an object with a 'feature_types' list");
    const auto& list = doc["feature_types"];
    if (!list.is_array() || list.empty()) field_error(source, "feature_types", "expected a non-empty list");

    std::vector<FeatureType> types;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = list[i];
        const std::string field = "feature_types[" + std::to_string(i) + "]";
        if (!e.is_object()) field_error(source, field, "expected an object");
        FeatureType t;
        if (!e.contains("name") || !e["name"].is_string()) field_error(source, field + ".name", "expected a string");
        t.name = e["name"].get<std::string>();
        if (e.contains("queryable")) {
            if (!e["queryable"].is_boolean()) field_error(source, field + ".queryable", "expected a boolean");
            t.queryable = e["queryable"].get<bool>();
        }
        if (e.contains("multi_valued")) {
            if (!e["multi_valued"].is_boolean()) field_error(source, field + ".multi_valued", "expected a boolean");
            t.multi_valued = e["multi_valued"].get<bool>();
        }
        if (!e.contains("values") || !e["values"].is_array())
            field_error(source, field + ".values", "expected a list of strings");
        for (std::size_t j = 0; j < e["values"].size(); ++j) {
            const auto& v = e["values"][j];
            if (!v.is_string()) field_error(source, field + ".values[" + std::to_string(j) + "]", "expected a string");
            t.values.push_back(v.get<std::string>());
        }
        types.push_back(std::move(t));
    }
    try {
        return FeatureSchema(std::move(types));
    } catch (const SchemaError& e) {
        throw SchemaError(std::string(source) + ": " + e.what());
    }
}

FeatureSchema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open schema file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_schema(buf.str(), path.string());
}

std::string serialize_schema(const FeatureSchema& schema) {
    json list = json::array();
    for (const auto& t : schema.types()) {
        list.push_back({{"name", t.name}, {"queryable", t.queryable}, {"multi_valued", t.multi_valued}, {"values", t.values}});
    }
    return json{{"feature_types", list}}.dump(2) + "\n";
}

}  // namespace locus
