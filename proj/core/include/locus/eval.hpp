#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "locus/backend.hpp"
#include "locus/controller.hpp"
#include "locus/corpus.hpp"
#include "locus/parsing.hpp"

namespace locus {

/// One ablation condition: iterative prediction on/off and a clarification policy.
struct EvalCondition {
    std::string name;
    bool iterative = true;
    ClarificationPolicy::Kind policy = ClarificationPolicy::Kind::informative;

    bool operator==(const EvalCondition&) const = default;
};

/// The four ablation rows: (no iteration, no clarification), (iteration, none),
/// (iteration, random), (iteration, informative).
std::vector<EvalCondition> ablation_conditions();

/// Looks up a preset by name ("no_iter_no_clar", "iter_no_clar", "iter_random",
/// "iter_informative"); "all" expands to every preset. Throws std::invalid_argument.
std::vector<EvalCondition> parse_conditions(std::string_view spec);

struct ConditionReport {
    EvalCondition condition;
    double r_h1 = 0.0;
    double r_h3 = 0.0;
    double l_h1 = 0.0;
    double l_h3 = 0.0;
    double mean_questions = 0.0;  // answered questions per episode
    double mean_asked = 0.0;      // including skipped questions
    std::size_t episodes = 0;
    std::size_t faults = 0;
};

struct EvalReport {
    std::vector<ConditionReport> conditions;
};

/// True iff `truth` is among the first min(k, size) entries.
bool hit_at_k(const std::vector<std::string>& ranked, std::string_view truth, std::size_t k);
bool hit_at_k(const std::vector<RankedValue>& ranked, std::string_view truth, std::size_t k);

struct EvalSettings {
    /// theta, budget and top_k; iterative and policy come from the condition.
    ControllerConfig controller;
    /// Base seed for random conditions; episode i uses a seed derived from (seed, i).
    std::uint64_t seed = 0;
    /// Worker threads for episodes (1 = sequential). Results do not depend on it.
    unsigned threads = 1;
};

/// Runs every non-flagged expression as one episode. Episodes whose backend
/// faults are counted in `faults` and left out of the averages. Throws
/// DataError if an expression names an object missing from the database.
ConditionReport run_condition(const std::vector<ExpressionRecord>& expressions, const ObjectFeaturesDB& db, const Backend& backend,
                              const Lexicon& lexicon, const EvalCondition& condition, const EvalSettings& settings);

EvalReport run_conditions(const std::vector<ExpressionRecord>& expressions, const ObjectFeaturesDB& db, const Backend& backend,
                          const Lexicon& lexicon, const std::vector<EvalCondition>& conditions, const EvalSettings& settings);

/// Seed of episode `index` under base seed `seed` (splitmix64 mix).
std::uint64_t episode_seed(std::uint64_t seed, std::size_t index) noexcept;

enum class ReportFormat { markdown, csv };

/// Columns follow R_H@1, R_H@3, L_H@1, L_H@3. CSV header:
/// condition,r_h1,r_h3,l_h1,l_h3,mean_questions,episodes,faults
std::string render_report(const EvalReport& report, ReportFormat format);

}  // namespace locus
