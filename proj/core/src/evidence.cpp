#include "locus/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "locus/error.hpp"

namespace locus {

EvidenceSet EvidenceSet::from_pairs(const FeatureSchema& schema, const std::vector<FeatureAssignment>& pairs) {
    EvidenceSet e;
    for (const auto& p : pairs) e.assign(schema, {normalize_token(p.type), normalize_token(p.value)});
    return e;
}

std::optional<FeatureAssignment> EvidenceSet::assign(const FeatureSchema& schema, FeatureAssignment a) {
    if (auto v = schema.validate(a)) throw SchemaError(v->message);
    const auto& type = schema.at(a.type);
    if (type.multi_valued) {
        if (!contains(a)) items_.push_back(std::move(a));
        return std::nullopt;
    }
    auto it = std::find_if(items_.begin(), items_.end(), [&](const auto& x) { return x.type == a.type; });
    if (it == items_.end()) {
        items_.push_back(std::move(a));
        return std::nullopt;
    }
    if (it->value == a.value) return std::nullopt;
    FeatureAssignment old = *it;
    it->value = std::move(a.value);
    return old;
}

bool EvidenceSet::contains_type(std::string_view type) const noexcept {
    return std::any_of(items_.begin(), items_.end(), [&](const auto& x) { return x.type == type; });
}

bool EvidenceSet::contains(const FeatureAssignment& a) const noexcept {
    return std::find(items_.begin(), items_.end(), a) != items_.end();
}

std::optional<std::string> EvidenceSet::value_of(std::string_view type) const {
    for (const auto& x : items_)
        if (x.type == type) return x.value;
    return std::nullopt;
}

EvidenceSet EvidenceSet::without(std::string_view type) const {
    EvidenceSet e;
    for (const auto& x : items_)
        if (x.type != type) e.items_.push_back(x);
    return e;
}

Distribution Distribution::from_weights(std::string target, std::vector<std::string> candidates, std::vector<double> weights) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) return uniform(std::move(target), std::move(candidates));
    for (auto& w : weights) w /= total;
    return Distribution{std::move(target), std::move(candidates), std::move(weights)};
}

Distribution Distribution::uniform(std::string target, std::vector<std::string> candidates) {
    std::vector<double> p(candidates.size(), candidates.empty() ? 0.0 : 1.0 / static_cast<double>(candidates.size()));
    return Distribution{std::move(target), std::move(candidates), std::move(p)};
}

double Distribution::probability_of(std::string_view value) const {
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i] == value) return probabilities[i];
    return 0.0;
}

std::optional<std::string> check_distribution(const FeatureSchema& schema, const Distribution& d) {
    const auto* t = schema.find(d.target);
    if (t == nullptr) return "distribution target '" + d.target + "' is not a schema type";
    if (d.candidates != t->values) return "distribution candidates differ from the schema values of '" + d.target + "'";
    if (d.probabilities.size() != d.candidates.size()) return "probability count does not match candidate count";
    double sum = 0.0;
    for (double p : d.probabilities) {
        if (!std::isfinite(p) || p < 0.0) return "distribution contains a negative or non-finite probability";
        sum += p;
    }
    if (std::abs(sum - 1.0) > kDistributionTolerance) return "distribution sums to " + std::to_string(sum);
    return std::nullopt;
}

}  // namespace locus
