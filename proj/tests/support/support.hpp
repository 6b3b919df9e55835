#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "locus/backend.hpp"
#include "locus/cooccur.hpp"
#include "locus/evidence.hpp"
#include "locus/schema.hpp"

namespace locus::testing {

std::filesystem::path data_dir();
SchemaPtr reference_schema();

/// room/location plus the given queryable single-valued types.
SchemaPtr make_schema(std::vector<std::string> rooms, std::vector<std::string> locations,
                      std::vector<std::pair<std::string, std::vector<std::string>>> features);

EvidenceSet evidence(const FeatureSchema& schema, std::vector<FeatureAssignment> pairs);

/// i1{bowl, dirty -> kitchen/sink}, i2{bowl, clean -> kitchen/shelf},
/// i3{bowl, clean -> dining_room/kitchen_table}
std::vector<ObjectInstance> hand_instances();

/// Naive entropy in nats, written separately from the library's.
double plain_entropy(const std::vector<double>& p);

/// A random joint distribution over room, location and a few single-valued
/// features, exposed through a table backend that stores the exact
/// conditional for every partial assignment.
class JointWorld {
public:
    struct Shape {
        std::size_t rooms = 4;
        std::size_t locations = 3;
        std::vector<std::size_t> feature_sizes = {2, 3};
        double zero_fraction = 0.2;
        bool with_location = true;
    };

    JointWorld(std::mt19937_64& rng, Shape shape);

    const SchemaPtr& schema() const { return schema_; }
    const Backend& backend() const { return *backend_; }
    const std::vector<std::string>& features() const { return features_; }

    /// P(target | known) by direct summation over the joint; uniform when known has no mass.
    std::vector<double> conditional(std::string_view target, const std::map<std::string, std::string>& known) const;

    /// H(base) - mean_v H(target | known, feature = v), all by summation.
    double brute_gain(std::string_view target, const std::map<std::string, std::string>& known, const std::string& feature) const;

    /// Draws a full hidden object (one value per variable) from the joint.
    std::map<std::string, std::string> sample(std::mt19937_64& rng) const;

private:
    std::size_t var_index(std::string_view name) const;

    SchemaPtr schema_;
    std::vector<std::string> features_;
    std::vector<std::string> vars_;           // room, location, features...
    std::vector<std::vector<std::string>> values_;
    std::vector<double> joint_;               // row-major over vars_
    std::unique_ptr<TableBackend> backend_;
};

}  // namespace locus::testing
