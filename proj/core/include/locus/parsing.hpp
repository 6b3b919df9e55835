#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "locus/evidence.hpp"
#include "locus/schema.hpp"

namespace locus {

struct AliasEntry {
    std::string surface;
    FeatureAssignment target;
};

/// Reads `surface_form<TAB>type<TAB>value` lines; '#' starts a comment line.
std::vector<AliasEntry> parse_aliases(std::string_view text, std::string_view source = "<aliases>");
std::vector<AliasEntry> load_aliases(const std::filesystem::path& path);

/// Phrase table mapping normalized word sequences to schema assignments.
///
/// Built from every schema value (underscores become spaces), the regular
/// plural of class and reference-object values, and the alias table.
class Lexicon {
public:
    static const std::vector<std::string>& default_prepositions();

    Lexicon(const FeatureSchema& schema, const std::vector<AliasEntry>& aliases = {},
            std::vector<std::string> prepositions = default_prepositions());

    /// Entries for an exact phrase ("wine glass"), empty if none.
    const std::vector<FeatureAssignment>& lookup(std::string_view phrase) const;

    /// Longest lexicon phrase starting at words[pos]; returns its word count (0 if none).
    std::size_t match(const std::vector<std::string>& words, std::size_t pos) const;
    /// Longest spatial preposition starting at words[pos]; 0 if none.
    std::size_t match_preposition(const std::vector<std::string>& words, std::size_t pos) const;

    const FeatureSchema& schema() const noexcept { return *schema_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<std::string, std::vector<FeatureAssignment>, std::less<>>& entries() const noexcept { return entries_; }

private:
    void add(std::string_view surface, FeatureAssignment a);

    const FeatureSchema* schema_;
    std::map<std::string, std::vector<FeatureAssignment>, std::less<>> entries_;
    std::map<std::string, bool, std::less<>> prepositions_;
    std::size_t max_phrase_words_ = 1;
    std::size_t max_preposition_words_ = 1;
};

/// Lowercases and splits into words; punctuation separates words and commas
/// are kept as "," tokens (clause boundaries).
std::vector<std::string> tokenize(std::string_view text);

/// Rule-based feature extraction from an object description.
///
/// Longest-match scan. After a spatial preposition, the next noun is the
/// reference object (attributes in between describe it and are dropped); the
/// first class noun outside such a phrase is the class. Room and location
/// words are never evidence. Multi-valued types accumulate, single-valued
/// types keep their first match.
EvidenceSet extract_features(std::string_view text, const Lexicon& lexicon);

}  // namespace locus
