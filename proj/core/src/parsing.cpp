#include "locus/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "locus/error.hpp"

namespace locus {

namespace {

const std::vector<FeatureAssignment> kNoEntries;

// Words that close a prepositional phrase before its head noun appears.
bool is_clause_boundary(std::string_view w) {
    static const std::vector<std::string_view> kBoundaries = {",", "that", "which", "and", "but", "with", "is", "it's", "its"};
    return std::find(kBoundaries.begin(), kBoundaries.end(), w) != kBoundaries.end();
}

std::string join_words(const std::vector<std::string>& words, std::size_t pos, std::size_t n) {
    std::string out;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (i != pos) out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::string phrase_of(std::string_view token) {
    std::string s(token);
    std::replace(s.begin(), s.end(), '_', ' ');
    return s;
}

// Regular English plural of the last word.
std::string pluralize(const std::string& phrase) {
    auto ends_with = [&](std::string_view suf) {
        return phrase.size() >= suf.size() && phrase.compare(phrase.size() - suf.size(), suf.size(), suf) == 0;
    };
    auto is_vowel = [](char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; };
    if (ends_with("s") || ends_with("x") || ends_with("z") || ends_with("ch") || ends_with("sh")) return phrase + "es";
    if (phrase.size() >= 2 && phrase.back() == 'y' && !is_vowel(phrase[phrase.size() - 2])) return phrase.substr(0, phrase.size() - 1) + "ies";
    return phrase + "s";
}

std::size_t word_count(std::string_view phrase) {
    return 1 + static_cast<std::size_t>(std::count(phrase.begin(), phrase.end(), ' '));
}

}  // namespace

std::vector<AliasEntry> parse_aliases(std::string_view text, std::string_view source) {
    std::vector<AliasEntry> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 3)
            throw SchemaError(std::string(source) + ":" + std::to_string(lineno) + ": expected surface_form<TAB>type<TAB>value");
        AliasEntry e{normalize_token(fields[0]), {normalize_token(fields[1]), normalize_token(fields[2])}};
        std::replace(e.surface.begin(), e.surface.end(), '_', ' ');
        if (e.surface.empty()) throw SchemaError(std::string(source) + ":" + std::to_string(lineno) + ": empty surface form");
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<AliasEntry> load_aliases(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open alias table '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_aliases(buf.str(), path.string());
}

const std::vector<std::string>& Lexicon::default_prepositions() {
    static const std::vector<std::string> kPrepositions = {"next to", "on", "near", "by", "under", "behind", "beside", "in front of"};
    return kPrepositions;
}

Lexicon::Lexicon(const FeatureSchema& schema, const std::vector<AliasEntry>& aliases, std::vector<std::string> prepositions)
    : schema_(&schema) {
    for (const auto& t : schema.types()) {
        for (const auto& v : t.values) {
            add(phrase_of(v), {t.name, v});
            if (t.name == kClass || t.name == kReferenceObject) add(pluralize(phrase_of(v)), {t.name, v});
        }
    }
    for (const auto& a : aliases) {
        if (auto violation = schema.validate(a.target)) throw SchemaError("alias '" + a.surface + "': " + violation->message);
        add(a.surface, a.target);
    }
    for (auto& p : prepositions) {
        auto words = tokenize(p);
        std::string phrase = join_words(words, 0, words.size());
        max_preposition_words_ = std::max(max_preposition_words_, words.size());
        prepositions_[phrase] = true;
    }
}

void Lexicon::add(std::string_view surface, FeatureAssignment a) {
    auto words = tokenize(surface);
    if (words.empty()) return;
    auto phrase = join_words(words, 0, words.size());
    auto& list = entries_[phrase];
    if (std::find(list.begin(), list.end(), a) == list.end()) list.push_back(std::move(a));
    max_phrase_words_ = std::max(max_phrase_words_, word_count(phrase));
}

const std::vector<FeatureAssignment>& Lexicon::lookup(std::string_view phrase) const {
    auto it = entries_.find(phrase);
    return it == entries_.end() ? kNoEntries : it->second;
}

std::size_t Lexicon::match(const std::vector<std::string>& words, std::size_t pos) const {
    for (std::size_t n = std::min(max_phrase_words_, words.size() - pos); n > 0; --n)
        if (entries_.contains(join_words(words, pos, n))) return n;
    return 0;
}

std::size_t Lexicon::match_preposition(const std::vector<std::string>& words, std::size_t pos) const {
    for (std::size_t n = std::min(max_preposition_words_, words.size() - pos); n > 0; --n)
        if (prepositions_.contains(join_words(words, pos, n))) return n;
    return 0;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) words.push_back(std::move(cur));
        cur.clear();
    };
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc) || c == '\'') {
            cur.push_back(static_cast<char>(std::tolower(uc)));
        } else if (c == '_' || std::isspace(uc) || c == '-') {
            flush();
        } else {
            flush();
            if (c == ',' || c == ';') words.emplace_back(",");
        }
    }
    flush();
    return words;
}

EvidenceSet extract_features(std::string_view text, const Lexicon& lexicon) {
    const auto& schema = lexicon.schema();
    const auto words = tokenize(text);
    EvidenceSet out;
    bool class_set = false;
    bool in_phrase = false;  // inside a spatial prepositional phrase, before its head noun

    auto has = [](const std::vector<FeatureAssignment>& entries, std::string_view type) -> const FeatureAssignment* {
        for (const auto& e : entries)
            if (e.type == type) return &e;
        return nullptr;
    };
    auto add = [&](const FeatureAssignment& a) {
        const auto& ft = schema.at(a.type);
        if (!ft.multi_valued && out.contains_type(a.type)) return;  // first match wins
        out.assign(schema, a);
    };

    std::size_t i = 0;
    while (i < words.size()) {
        if (is_clause_boundary(words[i])) {
            in_phrase = false;
            ++i;
            continue;
        }
        // Prepositions first, so that "on" or "by" never become feature words.
        if (auto n = lexicon.match_preposition(words, i)) {
            in_phrase = true;
            i += n;
            continue;
        }
        auto n = lexicon.match(words, i);
        if (n == 0) {
            ++i;
            continue;
        }
        const auto& entries = lexicon.lookup([&] {
            std::string phrase;
            for (std::size_t k = i; k < i + n; ++k) phrase += (k == i ? "" : " ") + words[k];
            return phrase;
        }());
        i += n;

        const bool is_target_word = std::any_of(entries.begin(), entries.end(), [](const auto& e) { return is_target_type(e.type); });
        const auto* as_class = has(entries, kClass);
        const auto* as_reference = has(entries, kReferenceObject);

        if (in_phrase) {
            if (as_reference) {
                add(*as_reference);
                in_phrase = false;
            } else if (as_class || is_target_word) {
                in_phrase = false;  // head noun without a reference-object reading
            }
            // Attributes before the head describe the reference object.
            continue;
        }
        if (is_target_word) continue;
        if (as_class && !class_set) {
            add(*as_class);
            class_set = true;
            continue;
        }
        const FeatureAssignment* attribute = nullptr;
        for (const auto& e : entries)
            if (e.type != kClass && e.type != kReferenceObject && !is_target_type(e.type)) {
                attribute = &e;
                break;
            }
        if (attribute) add(*attribute);
        else if (as_reference) add(*as_reference);
    }
    return out;
}

}  // namespace locus
