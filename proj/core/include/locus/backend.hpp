#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "locus/evidence.hpp"
#include "locus/schema.hpp"

namespace locus {

/// Native backends compute in-process; external ones sit behind the wire protocol.
/// The kind selects the default confidence threshold.
enum class BackendKind { native, external };

/// Knowledge-embedding contract: (evidence, target type) -> distribution over
/// the target's schema values.
///
/// predict() checks the preconditions (target is room or location, evidence is
/// schema-valid and does not mention the target) and the postcondition (a valid
/// Distribution), so implementations only supply do_predict(). Implementations
/// must be safe to call concurrently.
class Backend {
public:
    explicit Backend(SchemaPtr schema);
    virtual ~Backend() = default;

    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    Distribution predict(const EvidenceSet& evidence, std::string_view target) const;

    virtual BackendKind kind() const noexcept { return BackendKind::native; }
    virtual std::string name() const = 0;

    const FeatureSchema& schema() const noexcept { return *schema_; }
    const SchemaPtr& schema_ptr() const noexcept { return schema_; }

protected:
    virtual Distribution do_predict(const EvidenceSet& evidence, const FeatureType& target) const = 0;

private:
    SchemaPtr schema_;
};

/// Throws InvalidEvidence when (evidence, target) violates the predict() precondition.
void check_predict_inputs(const FeatureSchema& schema, const EvidenceSet& evidence, std::string_view target);

/// Fixture backend: stored distributions keyed by (evidence as a set, target).
class TableBackend final : public Backend {
public:
    enum class Fallback { uniform, error };

    explicit TableBackend(SchemaPtr schema, Fallback fallback = Fallback::uniform);

    /// Stores `probabilities` (schema order) for the evidence set, ignoring assignment order.
    void set(const std::vector<FeatureAssignment>& known, std::string_view target, std::vector<double> probabilities);

    /// Loads `{"fallback": "uniform"|"error", "entries": [{"known": [[t,v],...], "target": t, "probabilities": [...]}]}`.
    static std::unique_ptr<TableBackend> load(SchemaPtr schema, const std::filesystem::path& path);
    static std::unique_ptr<TableBackend> parse(SchemaPtr schema, std::string_view text);

    std::string name() const override { return "table"; }
    std::size_t entry_count() const noexcept { return entries_.size(); }

protected:
    Distribution do_predict(const EvidenceSet& evidence, const FeatureType& target) const override;

private:
    using Key = std::pair<std::vector<FeatureAssignment>, std::string>;
    static Key make_key(std::vector<FeatureAssignment> known, std::string_view target);

    Fallback fallback_;
    std::map<Key, std::vector<double>> entries_;
};

}  // namespace locus
