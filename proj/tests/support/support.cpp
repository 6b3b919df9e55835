#include "support.hpp"

#include <cmath>
#include <stdexcept>

namespace locus::testing {

std::filesystem::path data_dir() { return LOCUS_TEST_DATA_DIR; }

SchemaPtr reference_schema() {
    static const SchemaPtr schema = std::make_shared<const FeatureSchema>(load_schema(data_dir() / "schema.json"));
    return schema;
}

SchemaPtr make_schema(std::vector<std::string> rooms, std::vector<std::string> locations,
                      std::vector<std::pair<std::string, std::vector<std::string>>> features) {
    std::vector<FeatureType> types;
    types.push_back({"room", false, false, std::move(rooms)});
    types.push_back({"location", false, false, std::move(locations)});
    for (auto& [name, values] : features) types.push_back({name, true, false, std::move(values)});
    return std::make_shared<const FeatureSchema>(std::move(types));
}

EvidenceSet evidence(const FeatureSchema& schema, std::vector<FeatureAssignment> pairs) { return EvidenceSet::from_pairs(schema, pairs); }

std::vector<ObjectInstance> hand_instances() {
    return {
        {"i1", {{"class", {"bowl"}}, {"cleanliness", {"dirty"}}, {"room", {"kitchen"}}, {"location", {"sink"}}}},
        {"i2", {{"class", {"bowl"}}, {"cleanliness", {"clean"}}, {"room", {"kitchen"}}, {"location", {"shelf"}}}},
        {"i3", {{"class", {"bowl"}}, {"cleanliness", {"clean"}}, {"room", {"dining_room"}}, {"location", {"kitchen_table"}}}},
    };
}

double plain_entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h += x * std::log(1.0 / x);
    return h;
}

JointWorld::JointWorld(std::mt19937_64& rng, Shape shape) {
    auto names = [](std::string prefix, std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
        return out;
    };
    std::vector<std::pair<std::string, std::vector<std::string>>> feats;
    for (std::size_t f = 0; f < shape.feature_sizes.size(); ++f) {
        const auto name = "f" + std::to_string(f);
        feats.emplace_back(name, names(name + "_v", shape.feature_sizes[f]));
        features_.push_back(name);
    }
    schema_ = make_schema(names("r", shape.rooms), names("l", shape.locations), feats);

    for (const auto& t : schema_->types()) {
        vars_.push_back(t.name);
        values_.push_back(t.values);
    }
    std::size_t cells = 1;
    for (const auto& v : values_) cells *= v.size();

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    joint_.resize(cells);
    double total = 0.0;
    for (auto& c : joint_) {
        c = unit(rng) < shape.zero_fraction ? 0.0 : std::pow(unit(rng), 2.0);
        total += c;
    }
    if (total == 0.0) joint_[0] = total = 1.0;
    for (auto& c : joint_) c /= total;

    backend_ = std::make_unique<TableBackend>(schema_);

    // Every partial assignment of the features (slot value -1 = absent), plus
    // the room when predicting location.
    auto fill = [&](std::string_view target, bool include_room) {
        std::vector<std::string> slots = features_;
        if (include_room) slots.insert(slots.begin(), "room");
        std::vector<int> state(slots.size(), -1);
        for (;;) {
            std::map<std::string, std::string> known;
            std::vector<FeatureAssignment> pairs;
            for (std::size_t i = 0; i < slots.size(); ++i) {
                if (state[i] < 0) continue;
                const auto& v = values_[var_index(slots[i])][static_cast<std::size_t>(state[i])];
                known[slots[i]] = v;
                pairs.push_back({slots[i], v});
            }
            backend_->set(pairs, target, conditional(target, known));
            std::size_t i = 0;
            for (; i < slots.size(); ++i) {
                if (++state[i] < static_cast<int>(values_[var_index(slots[i])].size())) break;
                state[i] = -1;
            }
            if (i == slots.size()) break;
        }
    };
    fill("room", false);
    if (shape.with_location) fill("location", true);
}

std::size_t JointWorld::var_index(std::string_view name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i] == name) return i;
    throw std::out_of_range("no variable " + std::string(name));
}

std::vector<double> JointWorld::conditional(std::string_view target, const std::map<std::string, std::string>& known) const {
    const auto t = var_index(target);
    std::vector<int> want(vars_.size(), -1);
    for (const auto& [name, value] : known) {
        const auto i = var_index(name);
        for (std::size_t k = 0; k < values_[i].size(); ++k)
            if (values_[i][k] == value) want[i] = static_cast<int>(k);
    }
    // Row-major: the last variable varies fastest. Walk only the cells that match `known`.
    std::vector<std::size_t> stride(vars_.size(), 1);
    for (std::size_t i = vars_.size() - 1; i-- > 0;) stride[i] = stride[i + 1] * values_[i + 1].size();
    std::size_t base = 0;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (want[i] >= 0) base += static_cast<std::size_t>(want[i]) * stride[i];
        else free.push_back(i);
    }
    std::vector<double> out(values_[t].size(), 0.0);
    std::vector<std::size_t> digit(vars_.size(), 0);
    for (std::size_t i = 0; i < vars_.size(); ++i)
        if (want[i] >= 0) digit[i] = static_cast<std::size_t>(want[i]);
    std::size_t cell = base;
    while (true) {
        out[digit[t]] += joint_[cell];
        std::size_t k = free.size();
        while (k-- > 0) {
            const auto i = free[k];
            if (++digit[i] < values_[i].size()) {
                cell += stride[i];
                break;
            }
            cell -= (values_[i].size() - 1) * stride[i];
            digit[i] = 0;
        }
        if (k == static_cast<std::size_t>(-1)) break;
    }
    double sum = 0.0;
    for (double x : out) sum += x;
    for (auto& x : out) x = sum > 0.0 ? x / sum : 1.0 / static_cast<double>(out.size());
    return out;
}

double JointWorld::brute_gain(std::string_view target, const std::map<std::string, std::string>& known, const std::string& feature) const {
    const double base = plain_entropy(conditional(target, known));
    const auto& vals = values_[var_index(feature)];
    double sum = 0.0;
    for (const auto& v : vals) {
        auto k = known;
        k[feature] = v;
        sum += plain_entropy(conditional(target, k));
    }
    return base - sum / static_cast<double>(vals.size());
}

std::map<std::string, std::string> JointWorld::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng), acc = 0.0;
    std::size_t cell = joint_.size() - 1;
    for (std::size_t i = 0; i < joint_.size(); ++i) {
        acc += joint_[i];
        if (u < acc) {
            cell = i;
            break;
        }
    }
    std::map<std::string, std::string> out;
    for (std::size_t i = vars_.size(); i-- > 0;) {
        out[vars_[i]] = values_[i][cell % values_[i].size()];
        cell /= values_[i].size();
    }
    return out;
}

}  // namespace locus::testing
