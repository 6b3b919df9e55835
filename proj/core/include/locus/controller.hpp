#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "locus/backend.hpp"
#include "locus/clarify.hpp"

namespace locus {

enum class Stage { room, location, done };

std::string_view to_string(Stage s) noexcept;
/// Target type predicted during a stage (room or location).
std::string_view stage_target(Stage s);

/// How the controller picks follow-up questions when confidence is low.
struct ClarificationPolicy {
    enum class Kind { none, random, informative };

    Kind kind = Kind::informative;
    std::uint64_t seed = 0;  // used by Kind::random only

    static ClarificationPolicy none() { return {Kind::none, 0}; }
    static ClarificationPolicy random(std::uint64_t seed) { return {Kind::random, seed}; }
    static ClarificationPolicy informative() { return {Kind::informative, 0}; }

    bool operator==(const ClarificationPolicy&) const = default;
};

std::string to_string(const ClarificationPolicy& p);

enum class BudgetScope {
    episode,    // one budget shared by the room and location stages
    per_stage,  // the budget is refilled when the location stage starts
};

inline constexpr double kNativeTheta = 0.65;
inline constexpr double kExternalTheta = 0.99;

struct ControllerConfig {
    /// Ask only while confidence <= theta.
    double theta = kNativeTheta;
    int question_budget = 2;
    BudgetScope budget_scope = BudgetScope::episode;
    /// Entries shown in stage-prediction events; results keep the full ranking.
    int top_k = 3;
    ClarificationPolicy policy = ClarificationPolicy::informative();
    /// Commit the predicted room as evidence before predicting the location.
    bool iterative = true;
    ClarifyOptions clarify{};

    static ControllerConfig defaults_for(BackendKind kind);
    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

struct RankedValue {
    std::string value;
    double probability = 0.0;

    bool operator==(const RankedValue&) const = default;
};

/// Sorted by probability descending, ties in schema (candidate) order.
std::vector<RankedValue> rank(const Distribution& d);

/// One line of the session log. Which fields are meaningful depends on `kind`.
struct TranscriptEntry {
    enum class Kind {
        prediction,         // backend prediction for the current stage
        question,           // a question was asked
        answer,             // the outstanding question was answered
        skip,               // the outstanding question was skipped
        evidence_replaced,  // an answer overwrote a single-valued assignment
        stage_prediction,   // a stage concluded with a ranked prediction
        done,
        fault,
    };

    Kind kind = Kind::prediction;
    Stage stage = Stage::room;
    std::string feature_type;
    std::string value;     // answer, replaced value, or committed prediction
    double confidence = 0.0;
    double gain = 0.0;     // informative questions only
    std::vector<RankedValue> ranked;
    std::string message;   // faults

    bool operator==(const TranscriptEntry&) const = default;
};

std::string_view to_string(TranscriptEntry::Kind k) noexcept;

struct PredictionResult {
    std::vector<RankedValue> room_ranked;
    std::vector<RankedValue> location_ranked;
    int questions_asked = 0;    // answered questions
    int questions_skipped = 0;
    std::vector<TranscriptEntry> transcript;

    bool operator==(const PredictionResult&) const = default;
};

struct Event {
    enum class Kind { question, stage_prediction, done, fault };

    Kind kind = Kind::question;
    // question
    std::string feature_type;
    std::string prompt;
    // stage_prediction
    Stage stage = Stage::room;
    std::vector<RankedValue> ranked;
    double confidence = 0.0;
    // done
    std::optional<PredictionResult> result;
    // fault
    std::string message;

    bool operator==(const Event&) const = default;
};

std::string_view to_string(Event::Kind k) noexcept;

/// "What is the object's <type>?"
std::string question_prompt(std::string_view feature_type);

/// What the session is waiting for before it can move on.
enum class Awaiting {
    answer,   // an outstanding question
    proceed,  // acknowledgement of a room stage prediction
    nothing,  // done or faulted
};

struct AskedQuestion {
    Stage stage = Stage::room;
    std::string feature_type;
    std::optional<std::string> answer;  // nullopt when skipped

    bool operator==(const AskedQuestion&) const = default;
};

struct SessionState {
    EvidenceSet evidence;
    Stage stage = Stage::room;
    std::vector<AskedQuestion> asked;
    int budget_remaining = 0;
    std::optional<std::string> predicted_room;
    std::vector<TranscriptEntry> transcript;

    Awaiting awaiting = Awaiting::nothing;
    std::optional<std::string> outstanding;  // feature awaiting an answer
    std::vector<RankedValue> room_ranked;
    std::vector<RankedValue> location_ranked;
    std::optional<std::string> fault;
    std::mt19937_64 rng;  // random policy only

    int answered_count() const noexcept;
    int skipped_count() const noexcept;
    /// Types that may not be asked any more (asked or skipped).
    std::set<std::string, std::less<>> asked_types() const;

    bool operator==(const SessionState&) const = default;
};

struct Answer {
    std::string value;
};
struct Skip {};
struct Proceed {};

using Reply = std::variant<Answer, Skip, Proceed>;

struct Transition {
    SessionState state;
    Event event;
};

/// Simulated user: returns the value of a feature, or nullopt for none/N-A.
using AnswerOracle = std::function<std::optional<std::string>(std::string_view feature_type)>;

/// Iterative room-then-location prediction with budgeted clarification questions.
///
/// Each stage predicts its target; while confidence <= theta, budget remains
/// and the policy yields a feature, the controller asks a question and
/// re-predicts after the reply. A concluded room stage emits a stage
/// prediction (acknowledged with Proceed) and, in iterative mode, commits the
/// top room to the evidence; the location stage ends the session with Done.
///
/// Controller is stateless apart from its configuration; sessions are plain
/// values, so distinct sessions may run concurrently over one backend.
class Controller {
public:
    Controller(const Backend& backend, ControllerConfig config);

    /// Backend failures become fault events, not exceptions.
    Transition start(EvidenceSet evidence) const;

    /// Throws SessionError if the reply does not fit what the state awaits.
    Transition step(SessionState state, const Reply& reply) const;

    /// Drives a session to completion, answering questions with the oracle.
    /// Throws BackendError (or the recorded fault) if the session faults.
    PredictionResult run_with_oracle(EvidenceSet evidence, const AnswerOracle& oracle) const;

    const ControllerConfig& config() const noexcept { return config_; }
    const Backend& backend() const noexcept { return backend_; }

private:
    Event evaluate_stage(SessionState& state) const;
    Event conclude_stage(SessionState& state, const Distribution& d) const;
    std::optional<std::pair<std::string, double>> choose_question(SessionState& state, const Distribution& d) const;
    bool budget_available(const SessionState& state) const noexcept;
    Event fault(SessionState& state, const std::string& message) const;

    const Backend& backend_;
    ControllerConfig config_;
};

/// Replies a completed transcript implies, in order (answers, skips, proceeds).
std::vector<Reply> replies_from_transcript(const std::vector<TranscriptEntry>& transcript);

}  // namespace locus
