#pragma once

#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "locus/backend.hpp"

namespace locus {

/// Gains at or below this are treated as "no information".
inline constexpr double kGainEpsilon = 1e-12;

struct ClarifyOptions {
    /// Logarithm base for entropies. Natural log by default; any base > 1
    /// rescales every gain by the same constant.
    double log_base = std::numbers::e;
    /// Query the per-answer distributions concurrently. Results are identical
    /// to sequential evaluation.
    bool parallel = false;
};

/// Expected entropy reduction of the target distribution from asking one
/// feature, with a uniform prior over the feature's schema values.
struct GainEstimate {
    std::string feature_type;
    double gain = 0.0;
    double base_entropy = 0.0;
    std::vector<std::pair<std::string, double>> per_value_entropies;
};

/// Highest probability in the distribution.
double confidence(const Distribution& d);

/// Shannon entropy with 0 * log 0 = 0.
double entropy(const Distribution& d, double log_base = std::numbers::e);
double entropy(std::span<const double> probabilities, double log_base = std::numbers::e);

/// Throws std::invalid_argument if `feature` is a target, non-queryable, or already in evidence.
GainEstimate expected_gain(const Backend& backend, const EvidenceSet& evidence, std::string_view target, std::string_view feature,
                           const ClarifyOptions& options = {});

/// Same, reusing an already computed base distribution for the current evidence.
GainEstimate expected_gain(const Backend& backend, const EvidenceSet& evidence, const Distribution& base, std::string_view feature,
                           const ClarifyOptions& options = {});

/// Queryable types that are neither targets, in the evidence, nor excluded; schema order.
std::vector<std::string> candidate_features(const FeatureSchema& schema, const EvidenceSet& evidence,
                                            const std::set<std::string, std::less<>>& excluded);

/// Gain estimates for every candidate feature, in schema order.
std::vector<GainEstimate> rank_questions(const Backend& backend, const EvidenceSet& evidence, const Distribution& base,
                                         const std::set<std::string, std::less<>>& excluded, const ClarifyOptions& options = {});

/// Feature with the largest positive gain; ties go to the earlier type in
/// schema order. nullopt when no candidate has gain > kGainEpsilon.
std::optional<std::string> select_question(const Backend& backend, const EvidenceSet& evidence, std::string_view target,
                                           const std::set<std::string, std::less<>>& excluded, const ClarifyOptions& options = {});

std::optional<GainEstimate> best_question(const std::vector<GainEstimate>& gains);

}  // namespace locus
