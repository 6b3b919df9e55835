#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "locus/schema.hpp"

namespace locus {

/// Ordered set of known feature assignments about the target object.
///
/// Single-valued types hold at most one assignment; multi-valued types may
/// repeat with distinct values. Insertion order is preserved.
class EvidenceSet {
public:
    EvidenceSet() = default;

    /// Builds from raw pairs, validating each against the schema.
    static EvidenceSet from_pairs(const FeatureSchema& schema, const std::vector<FeatureAssignment>& pairs);

    /// Adds `a`. For a single-valued type already present, the new value replaces
    /// the old one and the replaced assignment is returned. Duplicate
    /// multi-valued pairs are ignored. Throws SchemaError for invalid pairs.
    std::optional<FeatureAssignment> assign(const FeatureSchema& schema, FeatureAssignment a);

    bool contains_type(std::string_view type) const noexcept;
    bool contains(const FeatureAssignment& a) const noexcept;

    /// First value of `type`, if present.
    std::optional<std::string> value_of(std::string_view type) const;

    /// Copy with every assignment of `type` removed.
    EvidenceSet without(std::string_view type) const;

    const std::vector<FeatureAssignment>& assignments() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

    auto begin() const noexcept { return items_.begin(); }
    auto end() const noexcept { return items_.end(); }

    bool operator==(const EvidenceSet&) const = default;

private:
    std::vector<FeatureAssignment> items_;
};

/// Normalized probability vector over one target type's schema values.
struct Distribution {
    std::string target;
    std::vector<std::string> candidates;
    std::vector<double> probabilities;

    /// Normalizes nonnegative weights. An all-zero weight vector yields the uniform distribution.
    static Distribution from_weights(std::string target, std::vector<std::string> candidates, std::vector<double> weights);
    static Distribution uniform(std::string target, std::vector<std::string> candidates);

    std::size_t size() const noexcept { return probabilities.size(); }
    double probability_of(std::string_view value) const;

    bool operator==(const Distribution&) const = default;
};

inline constexpr double kDistributionTolerance = 1e-9;

/// Describes the first broken invariant (candidate list, sign, sum), if any.
std::optional<std::string> check_distribution(const FeatureSchema& schema, const Distribution& d);

}  // namespace locus
