#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "locus/corpus.hpp"

namespace locus {

/// A household world where the room follows from the object's material and
/// the location from its cleanliness, neither of which people mention when
/// describing the object. Descriptions carry only class and colour.
struct SyntheticWorldOptions {
    std::size_t training_instances = 200;
    std::size_t objects = 40;
    std::size_t expressions_per_object = 3;
    std::size_t annotators = 3;
    /// Probability that the room follows the material rule (otherwise uniform over rule rooms).
    double room_fidelity = 1.0;
    /// Probability that the location follows the cleanliness rule.
    double location_fidelity = 1.0;
    /// Adds fullness as an independent, uninformative hidden feature.
    bool noise_features = false;
    std::uint64_t seed = 7;
};

struct SyntheticWorld {
    std::vector<ObjectInstance> training;
    std::vector<AnnotationRecord> annotations;
    std::vector<ExpressionRecord> expressions;

    std::map<std::string, std::string> room_rule;      // material -> room
    std::map<std::string, std::string> location_rule;  // cleanliness -> location
};

/// Requires the reference vocabulary (bowl, cup, plate, wine_glass; glass,
/// plastic, wood; kitchen, bathroom, office; sink, shelf; ...). Deterministic for a seed.
SyntheticWorld generate_world(const FeatureSchema& schema, const SyntheticWorldOptions& options);

}  // namespace locus
