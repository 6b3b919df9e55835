#include "locus/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "locus/error.hpp"

namespace locus {

std::vector<EvalCondition> ablation_conditions() {
    using K = ClarificationPolicy::Kind;
    return {
        {"no_iter_no_clar", false, K::none},
        {"iter_no_clar", true, K::none},
        {"iter_random", true, K::random},
        {"iter_informative", true, K::informative},
    };
}

std::vector<EvalCondition> parse_conditions(std::string_view spec) {
    const auto presets = ablation_conditions();
    if (spec == "all") return presets;
    std::vector<EvalCondition> out;
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto comma = spec.find(',', start);
        auto name = spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        auto it = std::find_if(presets.begin(), presets.end(), [&](const auto& c) { return c.name == name; });
        if (it == presets.end()) throw std::invalid_argument("unknown condition '" + std::string(name) + "'");
        out.push_back(*it);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool hit_at_k(const std::vector<std::string>& ranked, std::string_view truth, std::size_t k) {
    const auto n = std::min(k, ranked.size());
    return std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), truth) != ranked.begin() + static_cast<std::ptrdiff_t>(n);
}

bool hit_at_k(const std::vector<RankedValue>& ranked, std::string_view truth, std::size_t k) {
    const auto n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i)
        if (ranked[i].value == truth) return true;
    return false;
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t index) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

namespace {

struct EpisodeOutcome {
    bool fault = false;
    bool r1 = false, r3 = false, l1 = false, l3 = false;
    int answered = 0;
    int asked = 0;
};

}  // namespace

ConditionReport run_condition(const std::vector<ExpressionRecord>& expressions, const ObjectFeaturesDB& db, const Backend& backend,
                              const Lexicon& lexicon, const EvalCondition& condition, const EvalSettings& settings) {
    std::vector<const ExpressionRecord*> episodes;
    for (const auto& e : expressions) {
        if (e.flagged) continue;
        if (!db.contains(e.object_id)) throw DataError("expression refers to unknown object '" + e.object_id + "'");
        episodes.push_back(&e);
    }

    ControllerConfig base = settings.controller;
    base.iterative = condition.iterative;
    base.policy.kind = condition.policy;
    base.validate();

    std::vector<EpisodeOutcome> outcomes(episodes.size());
    auto run_one = [&](std::size_t i) {
        const auto& expr = *episodes[i];
        ControllerConfig cfg = base;
        cfg.policy.seed = episode_seed(settings.seed, i);
        Controller controller(backend, cfg);
        auto oracle = [&](std::string_view feature) { return oracle_answer(db, expr.object_id, feature); };
        EpisodeOutcome o;
        try {
            auto result = controller.run_with_oracle(extract_features(expr.text, lexicon), oracle);
            auto [room, location] = ground_truth(db, expr.object_id);
            o.r1 = hit_at_k(result.room_ranked, room, 1);
            o.r3 = hit_at_k(result.room_ranked, room, 3);
            o.l1 = hit_at_k(result.location_ranked, location, 1);
            o.l3 = hit_at_k(result.location_ranked, location, 3);
            o.answered = result.questions_asked;
            o.asked = result.questions_asked + result.questions_skipped;
        } catch (const SessionError& e) {
            if (e.kind() != SessionError::Kind::faulted) throw;
            o.fault = true;
        }
        outcomes[i] = o;
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(settings.threads, static_cast<unsigned>(episodes.size())));
    if (threads <= 1) {
        for (std::size_t i = 0; i < episodes.size(); ++i) run_one(i);
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < episodes.size(); i += threads) run_one(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        pool.clear();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    ConditionReport rep;
    rep.condition = condition;
    std::size_t r1 = 0, r3 = 0, l1 = 0, l3 = 0, answered = 0, asked = 0;
    for (const auto& o : outcomes) {
        if (o.fault) {
            ++rep.faults;
            continue;
        }
        ++rep.episodes;
        r1 += o.r1;
        r3 += o.r3;
        l1 += o.l1;
        l3 += o.l3;
        answered += static_cast<std::size_t>(o.answered);
        asked += static_cast<std::size_t>(o.asked);
    }
    if (rep.episodes > 0) {
        const auto n = static_cast<double>(rep.episodes);
        rep.r_h1 = static_cast<double>(r1) / n;
        rep.r_h3 = static_cast<double>(r3) / n;
        rep.l_h1 = static_cast<double>(l1) / n;
        rep.l_h3 = static_cast<double>(l3) / n;
        rep.mean_questions = static_cast<double>(answered) / n;
        rep.mean_asked = static_cast<double>(asked) / n;
    }
    return rep;
}

EvalReport run_conditions(const std::vector<ExpressionRecord>& expressions, const ObjectFeaturesDB& db, const Backend& backend,
                          const Lexicon& lexicon, const std::vector<EvalCondition>& conditions, const EvalSettings& settings) {
    EvalReport report;
    for (const auto& c : conditions) report.conditions.push_back(run_condition(expressions, db, backend, lexicon, c, settings));
    return report;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string_view policy_label(ClarificationPolicy::Kind k) {
    switch (k) {
        case ClarificationPolicy::Kind::none: return "none";
        case ClarificationPolicy::Kind::random: return "random";
        case ClarificationPolicy::Kind::informative: return "informative";
    }
    return "?";
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::csv) {
        out << "condition,r_h1,r_h3,l_h1,l_h3,mean_questions,episodes,faults\n";
        for (const auto& c : report.conditions) {
            out << c.condition.name << ',' << fixed(c.r_h1, 6) << ',' << fixed(c.r_h3, 6) << ',' << fixed(c.l_h1, 6) << ','
                << fixed(c.l_h3, 6) << ',' << fixed(c.mean_questions, 6) << ',' << c.episodes << ',' << c.faults << '\n';
        }
        return out.str();
    }
    out << "| Condition | Iterative | Clarification | R_H@1 | R_H@3 | L_H@1 | L_H@3 | Questions (answered) | Questions (asked) | Episodes | Faults |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& c : report.conditions) {
        out << "| " << c.condition.name << " | " << (c.condition.iterative ? "yes" : "no") << " | " << policy_label(c.condition.policy)
            << " | " << fixed(c.r_h1, 2) << " | " << fixed(c.r_h3, 2) << " | " << fixed(c.l_h1, 2) << " | " << fixed(c.l_h3, 2) << " | "
            << fixed(c.mean_questions, 2) << " | " << fixed(c.mean_asked, 2) << " | " << c.episodes << " | " << c.faults << " |\n";
    }
    return out.str();
}

}  // namespace locus
