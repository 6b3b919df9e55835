#include "locus/controller.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "locus/error.hpp"

namespace locus {

std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::room: return "room";
        case Stage::location: return "location";
        case Stage::done: return "done";
    }
    return "?";
}

std::string_view stage_target(Stage s) {
    switch (s) {
        case Stage::room: return kRoom;
        case Stage::location: return kLocation;
        case Stage::done: break;
    }
    throw std::logic_error("finished sessions have no prediction target");
}

std::string to_string(const ClarificationPolicy& p) {
    switch (p.kind) {
        case ClarificationPolicy::Kind::none: return "none";
        case ClarificationPolicy::Kind::random: return "random(" + std::to_string(p.seed) + ")";
        case ClarificationPolicy::Kind::informative: return "informative";
    }
    return "?";
}

std::string_view to_string(TranscriptEntry::Kind k) noexcept {
    using K = TranscriptEntry::Kind;
    switch (k) {
        case K::prediction: return "prediction";
        case K::question: return "question";
        case K::answer: return "answer";
        case K::skip: return "skip";
        case K::evidence_replaced: return "evidence_replaced";
        case K::stage_prediction: return "stage_prediction";
        case K::done: return "done";
        case K::fault: return "fault";
    }
    return "?";
}

std::string_view to_string(Event::Kind k) noexcept {
    switch (k) {
        case Event::Kind::question: return "question";
        case Event::Kind::stage_prediction: return "stage_prediction";
        case Event::Kind::done: return "done";
        case Event::Kind::fault: return "fault";
    }
    return "?";
}

ControllerConfig ControllerConfig::defaults_for(BackendKind kind) {
    ControllerConfig c;
    c.theta = kind == BackendKind::external ? kExternalTheta : kNativeTheta;
    return c;
}

void ControllerConfig::validate() const {
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in (0, 1]");
    if (question_budget < 0) throw std::invalid_argument("question budget must be >= 0");
    if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
    if (!(clarify.log_base > 1.0)) throw std::invalid_argument("log base must be > 1");
}

std::vector<RankedValue> rank(const Distribution& d) {
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d.probabilities[a] > d.probabilities[b]; });
    std::vector<RankedValue> out;
    out.reserve(order.size());
    for (auto i : order) out.push_back({d.candidates[i], d.probabilities[i]});
    return out;
}

std::string question_prompt(std::string_view feature_type) {
    std::string label(feature_type);
    std::replace(label.begin(), label.end(), '_', ' ');
    return "What is the object's " + label + "?";
}

int SessionState::answered_count() const noexcept {
    return static_cast<int>(std::count_if(asked.begin(), asked.end(), [](const auto& q) { return q.answer.has_value(); }));
}

int SessionState::skipped_count() const noexcept { return static_cast<int>(asked.size()) - answered_count(); }

std::set<std::string, std::less<>> SessionState::asked_types() const {
    std::set<std::string, std::less<>> out;
    for (const auto& q : asked) out.insert(q.feature_type);
    return out;
}

Controller::Controller(const Backend& backend, ControllerConfig config) : backend_(backend), config_(config) { config_.validate(); }

bool Controller::budget_available(const SessionState& state) const noexcept { return state.budget_remaining > 0; }

Event Controller::fault(SessionState& state, const std::string& message) const {
    state.fault = message;
    state.awaiting = Awaiting::nothing;
    state.outstanding.reset();
    TranscriptEntry e;
    e.kind = TranscriptEntry::Kind::fault;
    e.stage = state.stage;
    e.message = message;
    state.transcript.push_back(std::move(e));
    Event ev;
    ev.kind = Event::Kind::fault;
    ev.stage = state.stage;
    ev.message = message;
    return ev;
}

Transition Controller::start(EvidenceSet evidence) const {
    for (const auto& a : evidence) {
        if (auto v = backend_.schema().validate(a)) throw InvalidEvidence(v->message);
        if (is_target_type(a.type)) throw InvalidEvidence("initial evidence may not contain '" + a.type + "'");
    }
    SessionState state;
    state.evidence = std::move(evidence);
    state.stage = Stage::room;
    state.budget_remaining = config_.question_budget;
    state.rng.seed(config_.policy.seed);
    Event ev = evaluate_stage(state);
    return {std::move(state), std::move(ev)};
}

std::optional<std::pair<std::string, double>> Controller::choose_question(SessionState& state, const Distribution& d) const {
    const auto excluded = state.asked_types();
    switch (config_.policy.kind) {
        case ClarificationPolicy::Kind::none: return std::nullopt;
        case ClarificationPolicy::Kind::random: {
            auto candidates = candidate_features(backend_.schema(), state.evidence, excluded);
            if (candidates.empty()) return std::nullopt;
            const auto pick = static_cast<std::size_t>(state.rng() % candidates.size());
            return std::pair{candidates[pick], 0.0};
        }
        case ClarificationPolicy::Kind::informative: {
            auto best = best_question(rank_questions(backend_, state.evidence, d, excluded, config_.clarify));
            if (!best) return std::nullopt;
            return std::pair{best->feature_type, best->gain};
        }
    }
    return std::nullopt;
}

Event Controller::evaluate_stage(SessionState& state) const {
    const auto target = std::string(stage_target(state.stage));
    Distribution d;
    std::optional<std::pair<std::string, double>> question;
    try {
        d = backend_.predict(state.evidence, target);
        TranscriptEntry p;
        p.kind = TranscriptEntry::Kind::prediction;
        p.stage = state.stage;
        p.confidence = confidence(d);
        p.ranked = rank(d);
        state.transcript.push_back(std::move(p));

        if (confidence(d) <= config_.theta && budget_available(state)) question = choose_question(state, d);
    } catch (const BackendError& e) {
        return fault(state, e.what());
    } catch (const InvalidEvidence& e) {
        return fault(state, e.what());
    }

    if (!question) return conclude_stage(state, d);

    state.awaiting = Awaiting::answer;
    state.outstanding = question->first;
    TranscriptEntry q;
    q.kind = TranscriptEntry::Kind::question;
    q.stage = state.stage;
    q.feature_type = question->first;
    q.confidence = confidence(d);
    q.gain = question->second;
    state.transcript.push_back(std::move(q));

    Event ev;
    ev.kind = Event::Kind::question;
    ev.stage = state.stage;
    ev.feature_type = question->first;
    ev.prompt = question_prompt(question->first);
    ev.confidence = confidence(d);
    return ev;
}

Event Controller::conclude_stage(SessionState& state, const Distribution& d) const {
    auto ranked = rank(d);
    const double c = confidence(d);
    const Stage stage = state.stage;

    TranscriptEntry s;
    s.kind = TranscriptEntry::Kind::stage_prediction;
    s.stage = stage;
    s.value = ranked.front().value;
    s.confidence = c;
    s.ranked = ranked;
    state.transcript.push_back(std::move(s));

    if (stage == Stage::room) {
        state.room_ranked = ranked;
        state.predicted_room = ranked.front().value;
        if (config_.iterative) state.evidence.assign(backend_.schema(), {std::string(kRoom), ranked.front().value});
        state.stage = Stage::location;
        if (config_.budget_scope == BudgetScope::per_stage) state.budget_remaining = config_.question_budget;
        state.awaiting = Awaiting::proceed;
        state.outstanding.reset();

        Event ev;
        ev.kind = Event::Kind::stage_prediction;
        ev.stage = Stage::room;
        ev.confidence = c;
        ev.ranked.assign(ranked.begin(), ranked.begin() + std::min<std::ptrdiff_t>(config_.top_k, static_cast<std::ptrdiff_t>(ranked.size())));
        return ev;
    }

    state.location_ranked = std::move(ranked);
    state.stage = Stage::done;
    state.awaiting = Awaiting::nothing;
    state.outstanding.reset();
    TranscriptEntry done;
    done.kind = TranscriptEntry::Kind::done;
    done.stage = Stage::done;
    state.transcript.push_back(std::move(done));

    PredictionResult r;
    r.room_ranked = state.room_ranked;
    r.location_ranked = state.location_ranked;
    r.questions_asked = state.answered_count();
    r.questions_skipped = state.skipped_count();
    r.transcript = state.transcript;

    Event ev;
    ev.kind = Event::Kind::done;
    ev.stage = Stage::done;
    ev.confidence = c;
    ev.result = std::move(r);
    return ev;
}

Transition Controller::step(SessionState state, const Reply& reply) const {
    using SK = SessionError::Kind;
    if (state.fault) throw SessionError(SK::faulted, "session faulted: " + *state.fault);
    if (state.stage == Stage::done) throw SessionError(SK::finished, "session is already done");

    Event ev = std::visit(
        [&](const auto& r) -> Event {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, Proceed>) {
                if (state.awaiting != Awaiting::proceed) throw SessionError(SK::not_awaiting, "session is waiting for an answer, not a proceed");
                state.awaiting = Awaiting::nothing;
                return evaluate_stage(state);
            } else {
                if (state.awaiting != Awaiting::answer || !state.outstanding)
                    throw SessionError(SK::not_awaiting, "no question is outstanding");
                const std::string feature = *state.outstanding;
                if constexpr (std::is_same_v<T, Skip>) {
                    TranscriptEntry e;
                    e.kind = TranscriptEntry::Kind::skip;
                    e.stage = state.stage;
                    e.feature_type = feature;
                    state.transcript.push_back(std::move(e));
                    state.asked.push_back({state.stage, feature, std::nullopt});
                } else {
                    FeatureAssignment a{feature, normalize_token(r.value)};
                    if (!backend_.schema().value_index(a.type, a.value))
                        throw SessionError(SK::invalid_answer, "'" + a.value + "' is not a value of " + feature);
                    auto replaced = state.evidence.assign(backend_.schema(), a);
                    if (replaced) {
                        TranscriptEntry e;
                        e.kind = TranscriptEntry::Kind::evidence_replaced;
                        e.stage = state.stage;
                        e.feature_type = replaced->type;
                        e.value = replaced->value;
                        state.transcript.push_back(std::move(e));
                    }
                    TranscriptEntry e;
                    e.kind = TranscriptEntry::Kind::answer;
                    e.stage = state.stage;
                    e.feature_type = feature;
                    e.value = a.value;
                    state.transcript.push_back(std::move(e));
                    state.asked.push_back({state.stage, feature, a.value});
                    --state.budget_remaining;
                }
                state.awaiting = Awaiting::nothing;
                state.outstanding.reset();
                return evaluate_stage(state);
            }
        },
        reply);
    return {std::move(state), std::move(ev)};
}

PredictionResult Controller::run_with_oracle(EvidenceSet evidence, const AnswerOracle& oracle) const {
    auto t = start(std::move(evidence));
    for (;;) {
        switch (t.event.kind) {
            case Event::Kind::done: return *t.event.result;
            case Event::Kind::fault: throw SessionError(SessionError::Kind::faulted, t.event.message);
            case Event::Kind::stage_prediction: t = step(std::move(t.state), Proceed{}); break;
            case Event::Kind::question: {
                auto answer = oracle(t.event.feature_type);
                if (answer) t = step(std::move(t.state), Answer{*answer});
                else t = step(std::move(t.state), Skip{});
                break;
            }
        }
    }
}

std::vector<Reply> replies_from_transcript(const std::vector<TranscriptEntry>& transcript) {
    std::vector<Reply> out;
    for (const auto& e : transcript) {
        switch (e.kind) {
            case TranscriptEntry::Kind::answer: out.emplace_back(Answer{e.value}); break;
            case TranscriptEntry::Kind::skip: out.emplace_back(Skip{}); break;
            case TranscriptEntry::Kind::stage_prediction:
                if (e.stage == Stage::room) out.emplace_back(Proceed{});
                break;
            default: break;
        }
    }
    return out;
}

}  // namespace locus
