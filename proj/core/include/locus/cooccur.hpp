#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locus/backend.hpp"

namespace locus {

inline constexpr std::string_view kNoneSentinel = "none";
inline constexpr std::string_view kNaSentinel = "n_a";

/// True for "none" and "n_a" (also accepts "N/A" after normalization).
bool is_sentinel(std::string_view token) noexcept;

/// One training record. Features map a type to its value list; sentinel
/// values are allowed and carry no counts.
struct ObjectInstance {
    std::string id;
    std::map<std::string, std::vector<std::string>> features;
};

enum class CombineRule {
    additive,  // score(w) = alpha + sum_a counts[a][w]
    product,   // naive Bayes: P(w) * prod_a P(a | w), Laplace-smoothed with alpha
};

struct CoOccurOptions {
    double alpha = 0.1;
    CombineRule rule = CombineRule::additive;
};

/// Frequency table of (feature assignment, target value) co-occurrences for
/// the room and location targets.
class CoOccurModel {
public:
    CoOccurModel(SchemaPtr schema, CoOccurOptions options);

    /// Counts every (assignment, target value) pair once per instance; a
    /// multi-valued feature contributes once per value. The target type itself
    /// is never counted as evidence for its own prediction.
    static CoOccurModel train(SchemaPtr schema, std::span<const ObjectInstance> instances, CoOccurOptions options);

    std::uint64_t count(const FeatureAssignment& a, std::string_view target, std::string_view target_value) const;

    /// Per-target-value counts for one assignment, in schema order; empty when never seen.
    std::span<const std::uint64_t> row(const FeatureAssignment& a, std::string_view target) const;

    /// Sum of all rows for the target (used as the empty-evidence marginal).
    std::vector<std::uint64_t> marginal(std::string_view target) const;

    /// Number of training instances per target value.
    std::span<const std::uint64_t> totals(std::string_view target) const;

    Distribution predict(const EvidenceSet& evidence, std::string_view target) const;

    const CoOccurOptions& options() const noexcept { return options_; }
    const FeatureSchema& schema() const noexcept { return *schema_; }
    const SchemaPtr& schema_ptr() const noexcept { return schema_; }
    std::size_t instance_count() const noexcept { return instances_; }
    std::size_t row_count() const noexcept;
    std::size_t nonzero_cells() const noexcept;

    /// `{"format": "cooccur/1", ...}` count-table document.
    std::string serialize() const;
    static CoOccurModel parse(SchemaPtr schema, std::string_view text);
    void save(const std::filesystem::path& path) const;
    static CoOccurModel load(SchemaPtr schema, const std::filesystem::path& path);

    bool operator==(const CoOccurModel& other) const;

private:
    struct TargetTable {
        std::string target;
        std::vector<std::uint64_t> totals;
        std::map<FeatureAssignment, std::vector<std::uint64_t>, std::less<>> rows;
    };

    const TargetTable& table(std::string_view target) const;
    TargetTable& table(std::string_view target);
    Distribution predict_additive(const EvidenceSet& evidence, const TargetTable& t) const;
    Distribution predict_product(const EvidenceSet& evidence, const TargetTable& t) const;

    SchemaPtr schema_;
    CoOccurOptions options_;
    std::size_t instances_ = 0;
    std::vector<TargetTable> tables_;
};

/// cooccur_predict with the backend precondition checks applied.
Distribution cooccur_predict(const CoOccurModel& model, const EvidenceSet& evidence, std::string_view target);

class CoOccurBackend final : public Backend {
public:
    explicit CoOccurBackend(std::shared_ptr<const CoOccurModel> model);

    std::string name() const override { return "cooccur"; }
    const CoOccurModel& model() const noexcept { return *model_; }

protected:
    Distribution do_predict(const EvidenceSet& evidence, const FeatureType& target) const override;

private:
    std::shared_ptr<const CoOccurModel> model_;
};

}  // namespace locus
