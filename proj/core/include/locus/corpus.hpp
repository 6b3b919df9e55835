#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "locus/cooccur.hpp"
#include "locus/schema.hpp"

namespace locus {

struct AnnotationRecord {
    std::string object_id;
    std::string annotator_id;
    /// type -> selected values; may contain the sentinels "none" / "n_a".
    std::map<std::string, std::vector<std::string>> features;
};

struct ExpressionRecord {
    std::string object_id;
    std::string text;
    /// Mentions a room or location word; excluded from evaluation.
    bool flagged = false;
};

struct ExpressionSet {
    std::vector<ExpressionRecord> records;  // includes flagged records
    std::size_t dropped_empty = 0;

    std::vector<ExpressionRecord> usable() const;
    std::size_t flagged_count() const;
};

/// Majority-voted features per object.
class ObjectFeaturesDB {
public:
    struct Object {
        /// type -> values selected by a strict majority, in schema order.
        /// An empty list means the feature resolved to the none/N-A sentinel.
        std::map<std::string, std::vector<std::string>> features;
        std::size_t annotators = 0;
        std::string room;
        std::string location;
    };

    explicit ObjectFeaturesDB(SchemaPtr schema) : schema_(std::move(schema)) {}

    bool contains(std::string_view object_id) const { return objects_.contains(std::string(object_id)); }
    const Object& at(std::string_view object_id) const;
    const std::map<std::string, Object>& objects() const noexcept { return objects_; }
    const FeatureSchema& schema() const noexcept { return *schema_; }

    void insert(std::string object_id, Object object) { objects_[std::move(object_id)] = std::move(object); }

private:
    SchemaPtr schema_;
    std::map<std::string, Object> objects_;
};

/// Keeps a value iff more than half of the object's annotators chose it.
/// Throws DataError when an object lacks a single majority room or location.
ObjectFeaturesDB build_feature_db(SchemaPtr schema, const std::vector<AnnotationRecord>& annotations);

/// Majority value for a feature (first in schema order when several), or
/// nullopt for the none/N-A sentinel. Throws DataError for unknown objects.
std::optional<std::string> oracle_answer(const ObjectFeaturesDB& db, std::string_view object_id, std::string_view feature);

/// (room, location) ground truth.
std::pair<std::string, std::string> ground_truth(const ObjectFeaturesDB& db, std::string_view object_id);

// JSONL readers. Errors carry "path:line".
std::vector<ObjectInstance> load_instances(const std::filesystem::path& path);
std::vector<ObjectInstance> parse_instances(std::string_view text, std::string_view source = "<instances>");
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);
std::vector<AnnotationRecord> parse_annotations(std::string_view text, std::string_view source = "<annotations>");

/// Drops blank texts and flags texts that mention a room or location value.
ExpressionSet load_expressions(const std::filesystem::path& path, const FeatureSchema& schema);
ExpressionSet parse_expressions(std::string_view text, const FeatureSchema& schema, std::string_view source = "<expressions>");

/// True if any room or location value occurs as a word sequence in the text.
bool mentions_target(std::string_view text, const FeatureSchema& schema);

// JSONL writers (used by the synthetic corpus generator and tests).
std::string to_jsonl(const std::vector<ObjectInstance>& instances);
std::string to_jsonl(const std::vector<AnnotationRecord>& annotations);
std::string to_jsonl(const std::vector<ExpressionRecord>& expressions);

}  // namespace locus
