#include "locus/cooccur.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "locus/error.hpp"

namespace locus {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kFormat = "cooccur/1";

std::string_view rule_name(CombineRule r) { return r == CombineRule::additive ? "additive" : "product"; }

CombineRule parse_rule(const std::string& s) {
    if (s == "additive") return CombineRule::additive;
    if (s == "product") return CombineRule::product;
    throw DataError("cooccur model: unknown combine rule '" + s + "'");
}

}  // namespace

bool is_sentinel(std::string_view token) noexcept {
    return token == kNoneSentinel || token == kNaSentinel || token == "n/a" || token == "na";
}

CoOccurModel::CoOccurModel(SchemaPtr schema, CoOccurOptions options) : schema_(std::move(schema)), options_(options) {
    if (!schema_) throw std::invalid_argument("cooccur model requires a schema");
    if (!(options_.alpha >= 0.0) || !std::isfinite(options_.alpha))
        throw std::invalid_argument("smoothing alpha must be a finite value >= 0");
    for (auto target : {kRoom, kLocation}) {
        TargetTable t;
        t.target = std::string(target);
        t.totals.assign(schema_->values(target).size(), 0);
        tables_.push_back(std::move(t));
    }
}

const CoOccurModel::TargetTable& CoOccurModel::table(std::string_view target) const {
    for (const auto& t : tables_)
        if (t.target == target) return t;
    throw InvalidEvidence("prediction target must be room or location, got '" + std::string(target) + "'");
}

CoOccurModel::TargetTable& CoOccurModel::table(std::string_view target) {
    return const_cast<TargetTable&>(std::as_const(*this).table(target));
}

CoOccurModel CoOccurModel::train(SchemaPtr schema, std::span<const ObjectInstance> instances, CoOccurOptions options) {
    if (instances.empty()) throw DataError("cooccur training requires at least one instance");
    CoOccurModel model(std::move(schema), options);
    const auto& sch = *model.schema_;

    for (const auto& inst : instances) {
        // Resolve and validate the instance once, dropping sentinels.
        std::vector<FeatureAssignment> features;
        for (const auto& [raw_type, raw_values] : inst.features) {
            auto type = normalize_token(raw_type);
            const auto* ft = sch.find(type);
            if (ft == nullptr) throw DataError("instance '" + inst.id + "': unknown feature type '" + type + "'");
            std::vector<std::string> values;
            for (const auto& rv : raw_values) {
                auto v = normalize_token(rv);
                if (is_sentinel(v)) continue;
                if (!sch.value_index(type, v))
                    throw DataError("instance '" + inst.id + "': unknown value '" + v + "' for feature type '" + type + "'");
                if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(std::move(v));
            }
            if (values.size() > 1 && !ft->multi_valued)
                throw DataError("instance '" + inst.id + "': feature type '" + type + "' is single-valued");
            for (auto& v : values) features.push_back({type, std::move(v)});
        }

        for (auto& t : model.tables_) {
            auto it = std::find_if(features.begin(), features.end(), [&](const auto& a) { return a.type == t.target; });
            if (it == features.end()) continue;
            const auto w = *sch.value_index(t.target, it->value);
            ++t.totals[w];
            for (const auto& a : features) {
                if (a.type == t.target) continue;
                auto& row = t.rows[a];
                if (row.empty()) row.assign(t.totals.size(), 0);
                ++row[w];
            }
        }
        ++model.instances_;
    }
    return model;
}

std::uint64_t CoOccurModel::count(const FeatureAssignment& a, std::string_view target, std::string_view target_value) const {
    auto r = row(a, target);
    auto w = schema_->value_index(target, target_value);
    if (r.empty() || !w) return 0;
    return r[*w];
}

std::span<const std::uint64_t> CoOccurModel::row(const FeatureAssignment& a, std::string_view target) const {
    const auto& t = table(target);
    auto it = t.rows.find(a);
    if (it == t.rows.end()) return {};
    return it->second;
}

std::vector<std::uint64_t> CoOccurModel::marginal(std::string_view target) const {
    const auto& t = table(target);
    std::vector<std::uint64_t> m(t.totals.size(), 0);
    for (const auto& [a, row] : t.rows)
        for (std::size_t w = 0; w < row.size(); ++w) m[w] += row[w];
    return m;
}

std::span<const std::uint64_t> CoOccurModel::totals(std::string_view target) const { return table(target).totals; }

std::size_t CoOccurModel::row_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tables_) n += t.rows.size();
    return n;
}

std::size_t CoOccurModel::nonzero_cells() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tables_)
        for (const auto& [a, row] : t.rows) n += static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](auto c) { return c != 0; }));
    return n;
}

Distribution CoOccurModel::predict(const EvidenceSet& evidence, std::string_view target) const {
    const auto& t = table(target);
    return options_.rule == CombineRule::additive ? predict_additive(evidence, t) : predict_product(evidence, t);
}

Distribution CoOccurModel::predict_additive(const EvidenceSet& evidence, const TargetTable& t) const {
    const auto& candidates = schema_->values(t.target);
    const auto marginal_counts = marginal(t.target);
    std::vector<double> scores(candidates.size(), options_.alpha);

    bool any_count = false;
    if (evidence.empty()) {
        for (std::size_t w = 0; w < scores.size(); ++w) scores[w] += static_cast<double>(marginal_counts[w]);
    } else {
        for (const auto& a : evidence) {
            auto it = t.rows.find(a);
            if (it == t.rows.end()) continue;
            for (std::size_t w = 0; w < scores.size(); ++w) {
                scores[w] += static_cast<double>(it->second[w]);
                any_count = any_count || it->second[w] != 0;
            }
        }
        // alpha = 0 and no evidence row seen: nothing to normalize, use the marginal.
        if (!any_count && options_.alpha == 0.0)
            for (std::size_t w = 0; w < scores.size(); ++w) scores[w] = static_cast<double>(marginal_counts[w]);
    }
    return Distribution::from_weights(t.target, candidates, std::move(scores));
}

Distribution CoOccurModel::predict_product(const EvidenceSet& evidence, const TargetTable& t) const {
    const auto& candidates = schema_->values(t.target);
    const double alpha = options_.alpha;
    const auto n_targets = static_cast<double>(candidates.size());
    double grand_total = 0.0;
    for (auto c : t.totals) grand_total += static_cast<double>(c);

    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    auto safe_log = [&](double num, double den) { return (num > 0.0 && den > 0.0) ? std::log(num / den) : kNegInf; };

    // Sorted so that the floating-point sum does not depend on evidence order.
    std::vector<FeatureAssignment> sorted = evidence.assignments();
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> logs(candidates.size());
    for (std::size_t w = 0; w < candidates.size(); ++w) {
        const double n_w = static_cast<double>(t.totals[w]);
        double lp = safe_log(n_w + alpha, grand_total + alpha * n_targets);
        for (const auto& a : sorted) {
            if (lp == kNegInf) break;
            auto it = t.rows.find(a);
            const double c = it == t.rows.end() ? 0.0 : static_cast<double>(it->second[w]);
            const double n_values = static_cast<double>(schema_->values(a.type).size());
            lp += safe_log(c + alpha, n_w + alpha * n_values);
        }
        logs[w] = lp;
    }

    const double top = *std::max_element(logs.begin(), logs.end());
    std::vector<double> weights(candidates.size(), 0.0);
    if (top == kNegInf) {
        for (std::size_t w = 0; w < weights.size(); ++w) weights[w] = static_cast<double>(t.totals[w]);
    } else {
        for (std::size_t w = 0; w < weights.size(); ++w) weights[w] = logs[w] == kNegInf ? 0.0 : std::exp(logs[w] - top);
    }
    return Distribution::from_weights(t.target, candidates, std::move(weights));
}

Distribution cooccur_predict(const CoOccurModel& model, const EvidenceSet& evidence, std::string_view target) {
    check_predict_inputs(model.schema(), evidence, target);
    return model.predict(evidence, target);
}

std::string CoOccurModel::serialize() const {
    ordered_json doc;
    doc["format"] = kFormat;
    doc["alpha"] = options_.alpha;
    doc["rule"] = rule_name(options_.rule);
    doc["instances"] = instances_;
    ordered_json targets = ordered_json::array();
    for (const auto& t : tables_) {
        ordered_json rows = ordered_json::array();
        for (const auto& [a, counts] : t.rows) rows.push_back({{"type", a.type}, {"value", a.value}, {"counts", counts}});
        targets.push_back({{"target", t.target}, {"candidates", schema_->values(t.target)}, {"totals", t.totals}, {"rows", rows}});
    }
    doc["targets"] = std::move(targets);
    return doc.dump() + "\n";
}

CoOccurModel CoOccurModel::parse(SchemaPtr schema, std::string_view text) {
    try {
        auto doc = json::parse(text);
        if (doc.value("format", std::string{}) != kFormat)
            throw DataError("cooccur model: expected \"format\": \"" + std::string(kFormat) + "\"");
        CoOccurOptions opts{doc.at("alpha").get<double>(), parse_rule(doc.at("rule").get<std::string>())};
        CoOccurModel model(std::move(schema), opts);
        model.instances_ = doc.at("instances").get<std::size_t>();
        for (const auto& jt : doc.at("targets")) {
            auto& t = model.table(jt.at("target").get<std::string>());
            if (jt.at("candidates").get<std::vector<std::string>>() != model.schema_->values(t.target))
                throw DataError("cooccur model: candidates for '" + t.target + "' do not match the schema");
            t.totals = jt.at("totals").get<std::vector<std::uint64_t>>();
            if (t.totals.size() != model.schema_->values(t.target).size())
                throw DataError("cooccur model: totals for '" + t.target + "' have the wrong length");
            for (const auto& jr : jt.at("rows")) {
                FeatureAssignment a{jr.at("type").get<std::string>(), jr.at("value").get<std::string>()};
                if (auto v = model.schema_->validate(a)) throw DataError("cooccur model: " + v->message);
                auto counts = jr.at("counts").get<std::vector<std::uint64_t>>();
                if (counts.size() != t.totals.size())
                    throw DataError("cooccur model: row " + a.type + "=" + a.value + " has the wrong length");
                t.rows[a] = std::move(counts);
            }
        }
        return model;
    } catch (const json::exception& e) {
        throw DataError(std::string("cooccur model: ") + e.what());
    }
}

void CoOccurModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file '" + path.string() + "'");
    out << serialize();
}

CoOccurModel CoOccurModel::load(SchemaPtr schema, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(std::move(schema), buf.str());
}

bool CoOccurModel::operator==(const CoOccurModel& other) const {
    if (*schema_ != *other.schema_ || options_.alpha != other.options_.alpha || options_.rule != other.options_.rule ||
        instances_ != other.instances_ || tables_.size() != other.tables_.size())
        return false;
    for (std::size_t i = 0; i < tables_.size(); ++i) {
        if (tables_[i].target != other.tables_[i].target || tables_[i].totals != other.tables_[i].totals ||
            tables_[i].rows != other.tables_[i].rows)
            return false;
    }
    return true;
}

CoOccurBackend::CoOccurBackend(std::shared_ptr<const CoOccurModel> model)
    : Backend(model ? model->schema_ptr() : nullptr), model_(std::move(model)) {}

Distribution CoOccurBackend::do_predict(const EvidenceSet& evidence, const FeatureType& target) const {
    return model_->predict(evidence, target.name);
}

}  // namespace locus
