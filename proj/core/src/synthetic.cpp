#include "locus/synthetic.hpp"

#include <random>

#include "locus/error.hpp"

namespace locus {

namespace {

class Draw {
public:
    explicit Draw(std::uint64_t seed) : rng_(seed) {}

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(rng_() % items.size())];
    }
    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 rng_;
};

const std::vector<std::string> kClasses = {"bowl", "cup", "plate", "wine_glass"};
const std::vector<std::string> kColours = {"red", "blue", "white"};
const std::vector<std::string> kMaterials = {"glass", "plastic", "wood"};
const std::vector<std::string> kRooms = {"kitchen", "bathroom", "office"};
const std::vector<std::string> kCleanliness = {"dirty", "clean"};
const std::vector<std::string> kLocations = {"sink", "shelf"};
const std::vector<std::string> kFullness = {"full", "empty", "half"};

struct Hidden {
    std::string cls, colour, material, cleanliness, fullness, room, location;
};

Hidden sample(Draw& d, const SyntheticWorldOptions& o) {
    Hidden h;
    h.cls = d.pick(kClasses);
    h.colour = d.pick(kColours);
    const auto m = static_cast<std::size_t>(&d.pick(kMaterials) - kMaterials.data());
    h.material = kMaterials[m];
    const auto c = static_cast<std::size_t>(&d.pick(kCleanliness) - kCleanliness.data());
    h.cleanliness = kCleanliness[c];
    h.room = d.unit() < o.room_fidelity ? kRooms[m] : d.pick(kRooms);
    h.location = d.unit() < o.location_fidelity ? kLocations[c] : d.pick(kLocations);
    if (o.noise_features) h.fullness = d.pick(kFullness);
    return h;
}

std::map<std::string, std::vector<std::string>> features_of(const Hidden& h) {
    std::map<std::string, std::vector<std::string>> f{
        {"class", {h.cls}},         {"colour", {h.colour}}, {"material", {h.material}}, {"cleanliness", {h.cleanliness}},
        {"room", {h.room}},         {"location", {h.location}},
    };
    if (!h.fullness.empty()) f["fullness"] = {h.fullness};
    return f;
}

std::string spoken(std::string token) {
    for (auto& ch : token)
        if (ch == '_') ch = ' ';
    return token;
}

}  // namespace

SyntheticWorld generate_world(const FeatureSchema& schema, const SyntheticWorldOptions& options) {
    auto require = [&](std::string_view type, const std::vector<std::string>& values) {
        for (const auto& v : values)
            if (!schema.value_index(type, v))
                throw SchemaError("synthetic world needs value '" + v + "' under feature type '" + std::string(type) + "'");
    };
    require("class", kClasses);
    require("colour", kColours);
    require("material", kMaterials);
    require("cleanliness", kCleanliness);
    require(kRoom, kRooms);
    require(kLocation, kLocations);
    if (options.noise_features) require("fullness", kFullness);
    if (options.annotators == 0) throw std::invalid_argument("synthetic world needs at least one annotator");

    SyntheticWorld world;
    for (std::size_t i = 0; i < kMaterials.size(); ++i) world.room_rule[kMaterials[i]] = kRooms[i];
    for (std::size_t i = 0; i < kCleanliness.size(); ++i) world.location_rule[kCleanliness[i]] = kLocations[i];

    Draw train(options.seed);
    for (std::size_t i = 0; i < options.training_instances; ++i) {
        auto h = sample(train, options);
        world.training.push_back({"train-" + std::to_string(i), features_of(h)});
    }

    Draw eval(options.seed ^ 0x5eed5eed5eed5eedull);
    for (std::size_t i = 0; i < options.objects; ++i) {
        auto h = sample(eval, options);
        const auto id = "obj-" + std::to_string(i);
        for (std::size_t a = 0; a < options.annotators; ++a) world.annotations.push_back({id, "annotator-" + std::to_string(a), features_of(h)});
        for (std::size_t e = 0; e < options.expressions_per_object; ++e) {
            std::string text;
            switch (e % 3) {
                case 0: text = "the " + h.colour + " " + spoken(h.cls); break;
                case 1: text = "find the " + spoken(h.cls); break;
                default: text = "a " + spoken(h.cls) + ", the " + h.colour + " one"; break;
            }
            world.expressions.push_back({id, text, false});
        }
    }
    return world;
}

}  // namespace locus
