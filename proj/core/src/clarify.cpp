#include "locus/clarify.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

#include "locus/error.hpp"

namespace locus {

double confidence(const Distribution& d) {
    if (d.probabilities.empty()) return 0.0;
    return *std::max_element(d.probabilities.begin(), d.probabilities.end());
}

double entropy(std::span<const double> probabilities, double log_base) {
    if (!(log_base > 1.0)) throw std::invalid_argument("entropy log base must be > 1");
    double h = 0.0;
    for (double p : probabilities)
        if (p > 0.0) h -= p * std::log(p);
    // -0.0 for point masses reads badly in reports.
    if (h <= 0.0) return 0.0;
    return log_base == std::numbers::e ? h : h / std::log(log_base);
}

double entropy(const Distribution& d, double log_base) { return entropy(d.probabilities, log_base); }

namespace {

void check_feature(const FeatureSchema& schema, const EvidenceSet& evidence, std::string_view feature) {
    const auto* ft = schema.find(feature);
    if (ft == nullptr) throw std::invalid_argument("unknown feature type '" + std::string(feature) + "'");
    if (is_target_type(ft->name) || !ft->queryable) throw std::invalid_argument("feature type '" + ft->name + "' is not queryable");
    if (evidence.contains_type(ft->name)) throw std::invalid_argument("feature type '" + ft->name + "' is already known");
}

double conditioned_entropy(const Backend& backend, const EvidenceSet& evidence, const std::string& target, const std::string& feature,
                           const std::string& value, double log_base) {
    EvidenceSet extended = evidence;
    extended.assign(backend.schema(), {feature, value});
    try {
        return entropy(backend.predict(extended, target), log_base);
    } catch (const BackendError& e) {
        throw BackendError(e.kind(), std::string(e.what()) + " (while evaluating " + feature + "=" + value + ")");
    } catch (const InvalidEvidence& e) {
        throw InvalidEvidence(std::string(e.what()) + " (while evaluating " + feature + "=" + value + ")");
    }
}

}  // namespace

GainEstimate expected_gain(const Backend& backend, const EvidenceSet& evidence, const Distribution& base, std::string_view feature,
                           const ClarifyOptions& options) {
    const auto& schema = backend.schema();
    check_feature(schema, evidence, feature);
    const auto& ft = schema.at(feature);

    GainEstimate est;
    est.feature_type = ft.name;
    est.base_entropy = entropy(base, options.log_base);

    std::vector<double> entropies(ft.values.size());
    if (options.parallel && ft.values.size() > 1) {
        std::vector<std::future<double>> jobs;
        jobs.reserve(ft.values.size());
        for (const auto& v : ft.values)
            jobs.push_back(std::async(std::launch::async, [&, v] {
                return conditioned_entropy(backend, evidence, base.target, ft.name, v, options.log_base);
            }));
        for (std::size_t i = 0; i < jobs.size(); ++i) entropies[i] = jobs[i].get();
    } else {
        for (std::size_t i = 0; i < ft.values.size(); ++i)
            entropies[i] = conditioned_entropy(backend, evidence, base.target, ft.name, ft.values[i], options.log_base);
    }

    // Uniform answer prior over the feature's full vocabulary.
    double expected = 0.0;
    for (std::size_t i = 0; i < ft.values.size(); ++i) {
        expected += entropies[i];
        est.per_value_entropies.emplace_back(ft.values[i], entropies[i]);
    }
    expected /= static_cast<double>(ft.values.size());
    est.gain = est.base_entropy - expected;
    return est;
}

GainEstimate expected_gain(const Backend& backend, const EvidenceSet& evidence, std::string_view target, std::string_view feature,
                           const ClarifyOptions& options) {
    check_feature(backend.schema(), evidence, feature);
    return expected_gain(backend, evidence, backend.predict(evidence, target), feature, options);
}

std::vector<std::string> candidate_features(const FeatureSchema& schema, const EvidenceSet& evidence,
                                            const std::set<std::string, std::less<>>& excluded) {
    std::vector<std::string> out;
    for (const auto& t : schema.types()) {
        if (!t.queryable || is_target_type(t.name) || excluded.contains(t.name) || evidence.contains_type(t.name)) continue;
        out.push_back(t.name);
    }
    return out;
}

std::vector<GainEstimate> rank_questions(const Backend& backend, const EvidenceSet& evidence, const Distribution& base,
                                         const std::set<std::string, std::less<>>& excluded, const ClarifyOptions& options) {
    std::vector<GainEstimate> gains;
    for (const auto& f : candidate_features(backend.schema(), evidence, excluded))
        gains.push_back(expected_gain(backend, evidence, base, f, options));
    return gains;
}

std::optional<GainEstimate> best_question(const std::vector<GainEstimate>& gains) {
    const GainEstimate* best = nullptr;
    for (const auto& g : gains) {
        if (!(g.gain > kGainEpsilon)) continue;
        // Strictly larger beyond float noise; earlier schema position wins ties.
        if (best == nullptr || g.gain > best->gain + kGainEpsilon) best = &g;
    }
    if (best == nullptr) return std::nullopt;
    return *best;
}

std::optional<std::string> select_question(const Backend& backend, const EvidenceSet& evidence, std::string_view target,
                                           const std::set<std::string, std::less<>>& excluded, const ClarifyOptions& options) {
    auto base = backend.predict(evidence, target);
    auto best = best_question(rank_questions(backend, evidence, base, excluded, options));
    if (!best) return std::nullopt;
    return best->feature_type;
}

}  // namespace locus
