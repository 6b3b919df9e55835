#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace locus {

inline constexpr std::string_view kRoom = "room";
inline constexpr std::string_view kLocation = "location";
inline constexpr std::string_view kClass = "class";
inline constexpr std::string_view kReferenceObject = "reference_object";

/// Lowercases, trims and joins internal whitespace runs with '_'.
std::string normalize_token(std::string_view raw);

/// True for the two prediction targets (room, location).
bool is_target_type(std::string_view type) noexcept;

struct FeatureType {
    std::string name;
    bool queryable = true;
    bool multi_valued = false;
    std::vector<std::string> values;

    bool operator==(const FeatureType&) const = default;
};

struct FeatureAssignment {
    std::string type;
    std::string value;

    auto operator<=>(const FeatureAssignment&) const = default;
};

struct SchemaViolation {
    enum class Kind { unknown_type, unknown_value };
    Kind kind;
    std::string message;
};

/// Feature-type/value vocabulary. Immutable once constructed.
class FeatureSchema {
public:
    /// Validates names, uniqueness and the target-type rules; throws SchemaError.
    explicit FeatureSchema(std::vector<FeatureType> types);

    const std::vector<FeatureType>& types() const noexcept { return types_; }

    const FeatureType* find(std::string_view type) const noexcept;
    const FeatureType& at(std::string_view type) const;

    /// Position of the type in schema order.
    std::optional<std::size_t> type_index(std::string_view type) const noexcept;
    std::optional<std::size_t> value_index(std::string_view type, std::string_view value) const noexcept;

    const std::vector<std::string>& values(std::string_view type) const { return at(type).values; }

    std::optional<SchemaViolation> validate(const FeatureAssignment& a) const;

    /// Total number of admissible (type, value) pairs.
    std::size_t pair_count() const noexcept;

    bool operator==(const FeatureSchema& other) const { return types_ == other.types_; }

private:
    std::vector<FeatureType> types_;
    std::map<std::string, std::size_t, std::less<>> type_lookup_;
    std::vector<std::map<std::string, std::size_t, std::less<>>> value_lookup_;
};

using SchemaPtr = std::shared_ptr<const FeatureSchema>;

/// Parses a schema document; `source` names the input in error messages.
FeatureSchema parse_schema(std::string_view text, std::string_view source = "<schema>");
FeatureSchema load_schema(const std::filesystem::path& path);

/// Canonical serialization (pretty-printed, order-preserving).
std::string serialize_schema(const FeatureSchema& schema);

/// Thin check used at API boundaries.
std::optional<SchemaViolation> validate_assignment(const FeatureSchema& schema, const FeatureAssignment& a);

}  // namespace locus
