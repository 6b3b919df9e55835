#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "locus/backend.hpp"
#include "locus/cooccur.hpp"
#include "locus/corpus.hpp"
#include "locus/error.hpp"
#include "locus/eval.hpp"
#include "locus/external.hpp"
#include "locus/parsing.hpp"
#include "locus/service.hpp"
#include "locus/synthetic.hpp"
#include "locus/wire.hpp"

namespace fs = std::filesystem;
using namespace locus;

namespace {

enum Exit { ok = 0, usage = 1, missing_file = 2, bad_data = 3, backend_failure = 4 };

struct MissingFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const fs::path& require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw MissingFile("no such file: " + p.string());
    return p;
}

struct Common {
    std::string schema;
    std::string aliases;

    SchemaPtr load() const {
        std::string path = schema;
        if (path.empty()) {
            if (const char* env = std::getenv("CLARIFY_SCHEMA")) path = env;
        }
        if (path.empty()) throw std::invalid_argument("no schema: pass --schema or set CLARIFY_SCHEMA");
        return std::make_shared<const FeatureSchema>(load_schema(require_file(path)));
    }

    std::unique_ptr<Lexicon> lexicon(const FeatureSchema& s) const {
        std::vector<AliasEntry> a;
        if (!aliases.empty()) a = load_aliases(require_file(aliases));
        return std::make_unique<Lexicon>(s, a);
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--schema", schema, "Feature schema JSON (default: $CLARIFY_SCHEMA)");
        cmd->add_option("--aliases", aliases, "Alias table for the description parser");
    }
};

struct BackendArgs {
    std::string kind = "cooccur";
    std::string model;
    std::string endpoint;
    int timeout_ms = 10000;

    void attach(CLI::App* cmd) {
        cmd->add_option("--backend", kind, "cooccur, table or external")->check(CLI::IsMember({"cooccur", "table", "external"}));
        auto* m = cmd->add_option("--model", model, "Co-Occur model file, or a table file for --backend table");
        auto* e = cmd->add_option("--endpoint", endpoint, "External backend address (http://host:port[/path] or tcp://host:port)");
        m->excludes(e);
        cmd->add_option("--timeout-ms", timeout_ms, "External backend timeout")->check(CLI::PositiveNumber);
    }

    std::unique_ptr<Backend> make(const SchemaPtr& schema) const {
        if (kind == "external") {
            if (endpoint.empty()) throw std::invalid_argument("--backend external needs --endpoint");
            return std::make_unique<ExternalBackend>(schema, Endpoint::parse(endpoint), ExternalOptions{std::chrono::milliseconds(timeout_ms)});
        }
        if (!endpoint.empty()) throw std::invalid_argument("--endpoint only applies to --backend external");
        if (model.empty()) throw std::invalid_argument("--backend " + kind + " needs --model");
        if (kind == "table") return TableBackend::load(schema, require_file(model));
        auto m = std::make_shared<const CoOccurModel>(CoOccurModel::load(schema, require_file(model)));
        return std::make_unique<CoOccurBackend>(std::move(m));
    }
};

struct ControllerArgs {
    std::optional<double> theta;
    int budget = 2;
    std::string budget_scope = "episode";
    int top_k = 3;
    std::string policy = "informative";
    std::uint64_t seed = 0;
    bool no_iterative = false;

    void attach(CLI::App* cmd, bool with_policy) {
        cmd->add_option("--theta", theta, "Confidence threshold (default 0.65 native, 0.99 external)")->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--budget", budget, "Question budget")->check(CLI::NonNegativeNumber);
        cmd->add_option("--budget-scope", budget_scope, "episode or per_stage")->check(CLI::IsMember({"episode", "per_stage"}));
        cmd->add_option("--top-k", top_k, "Entries shown in stage predictions")->check(CLI::PositiveNumber);
        if (with_policy) {
            cmd->add_option("--policy", policy, "none, random or informative")->check(CLI::IsMember({"none", "random", "informative"}));
            cmd->add_flag("--no-iterative", no_iterative, "Do not feed the predicted room into location prediction");
        }
        cmd->add_option("--seed", seed, "Seed for the random policy");
    }

    ControllerConfig make(BackendKind kind) const {
        auto c = ControllerConfig::defaults_for(kind);
        if (theta) c.theta = *theta;
        c.question_budget = budget;
        c.budget_scope = budget_scope == "per_stage" ? BudgetScope::per_stage : BudgetScope::episode;
        c.top_k = top_k;
        if (policy == "none") c.policy = ClarificationPolicy::none();
        else if (policy == "random") c.policy = ClarificationPolicy::random(seed);
        else c.policy = ClarificationPolicy::informative();
        c.iterative = !no_iterative;
        c.validate();
        return c;
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

void wait_for_signal() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    int sig = 0;
    sigwait(&set, &sig);
}

void block_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

std::string format_ranked(const std::vector<RankedValue>& ranked, std::size_t k) {
    std::string out;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "  %zu. %-16s %.3f\n", i + 1, ranked[i].value.c_str(), ranked[i].probability);
        out += buf;
    }
    return out;
}

// train

struct TrainArgs {
    Common common;
    std::string instances;
    double alpha = 0.1;
    std::string rule = "additive";
    std::string out;
};

int run_train(const TrainArgs& a) {
    if (a.alpha < 0) throw std::invalid_argument("--alpha must be >= 0");
    auto schema = a.common.load();
    auto instances = load_instances(require_file(a.instances));
    CoOccurOptions opts{a.alpha, a.rule == "product" ? CombineRule::product : CombineRule::additive};
    auto model = CoOccurModel::train(schema, instances, opts);
    model.save(a.out);
    std::cout << "instances: " << model.instance_count() << "\n"
              << "count rows: " << model.row_count() << "\n"
              << "nonzero cells: " << model.nonzero_cells() << "\n"
              << "model: " << a.out << "\n";
    return ok;
}

// eval

struct EvalArgs {
    Common common;
    BackendArgs backend;
    ControllerArgs controller;
    std::string expressions;
    std::string annotations;
    std::string conditions = "all";
    unsigned threads = 1;
    std::string report;
    std::string format;
};

int run_eval(const EvalArgs& a) {
    auto conditions = parse_conditions(a.conditions);
    auto schema = a.common.load();
    auto lexicon = a.common.lexicon(*schema);
    auto backend = a.backend.make(schema);
    auto expressions = load_expressions(require_file(a.expressions), *schema);
    auto db = build_feature_db(schema, load_annotations(require_file(a.annotations)));

    EvalSettings settings;
    settings.controller = a.controller.make(backend->kind());
    settings.seed = a.controller.seed;
    settings.threads = a.threads;
    backend->predict({}, "room");
    auto report = run_conditions(expressions.usable(), db, *backend, *lexicon, conditions, settings);

    auto format = ReportFormat::markdown;
    if (a.format == "csv" || (a.format.empty() && fs::path(a.report).extension() == ".csv")) format = ReportFormat::csv;
    const auto text = render_report(report, format);
    if (a.report.empty()) std::cout << text;
    else write_text(a.report, text);

    std::cerr << "episodes: " << expressions.usable().size() << " (" << expressions.flagged_count() << " flagged, "
              << expressions.dropped_empty << " empty dropped), backend " << backend->name() << ", theta " << settings.controller.theta << "\n";
    return ok;
}

// ask

struct AskArgs {
    Common common;
    BackendArgs backend;
    ControllerArgs controller;
    std::string text;
};

int run_ask(const AskArgs& a) {
    auto schema = a.common.load();
    auto lexicon = a.common.lexicon(*schema);
    auto backend = a.backend.make(schema);
    Controller controller(*backend, a.controller.make(backend->kind()));

    std::string text = a.text;
    if (text.empty()) {
        std::cout << "Describe the object: " << std::flush;
        if (!std::getline(std::cin, text)) return usage;
    }
    auto evidence = extract_features(text, *lexicon);
    std::cout << "Understood:";
    if (evidence.empty()) std::cout << " (nothing)";
    for (const auto& f : evidence) std::cout << " " << f.type << "=" << f.value;
    std::cout << "\n";

    auto t = controller.start(std::move(evidence));
    for (;;) {
        const auto& ev = t.event;
        if (ev.kind == Event::Kind::fault) {
            std::cerr << "backend failure: " << ev.message << "\n";
            return backend_failure;
        }
        if (ev.kind == Event::Kind::done) {
            const auto& r = *ev.result;
            std::cout << "Location:\n" << format_ranked(r.location_ranked, static_cast<std::size_t>(controller.config().top_k));
            std::cout << "Questions answered: " << r.questions_asked << ", skipped: " << r.questions_skipped << "\n";
            return ok;
        }
        if (ev.kind == Event::Kind::stage_prediction) {
            std::cout << "Room:\n" << format_ranked(ev.ranked, ev.ranked.size());
            t = controller.step(std::move(t.state), Proceed{});
            continue;
        }
        std::cout << ev.prompt << " [";
        const auto& values = schema->values(ev.feature_type);
        for (std::size_t i = 0; i < values.size(); ++i) std::cout << (i ? ", " : "") << values[i];
        std::cout << "; empty to skip] " << std::flush;
        std::string line;
        if (!std::getline(std::cin, line)) line.clear();
        auto value = normalize_token(line);
        Reply reply = Skip{};
        if (!value.empty() && value != "skip" && !is_sentinel(value)) reply = Answer{value};
        try {
            t = controller.step(t.state, reply);
        } catch (const SessionError& e) {
            if (e.kind() != SessionError::Kind::invalid_answer) throw;
            std::cout << e.what() << "\n";
        }
    }
}

// serve

struct ServeArgs {
    Common common;
    BackendArgs backend;
    ControllerArgs controller;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
    int idle_minutes = 30;
};

int run_serve(const ServeArgs& a) {
    auto schema = a.common.load();
    auto lexicon = a.common.lexicon(*schema);
    auto backend = a.backend.make(schema);
    SessionService service(*backend, *lexicon, a.controller.make(backend->kind()), ServiceOptions{std::chrono::minutes(a.idle_minutes)});
    std::optional<fs::path> dir;
    if (!a.static_dir.empty()) {
        if (!fs::is_directory(a.static_dir)) throw MissingFile("no such directory: " + a.static_dir);
        dir = a.static_dir;
    }
    block_signals();
    HttpServer server(service, dir);
    const int port = server.bind(a.host, a.port);
    std::cout << "serving on http://" << a.host << ":" << port << " (backend " << backend->name() << ")" << std::endl;
    server.start();
    wait_for_signal();
    server.stop();
    return ok;
}

// backend-serve

struct BackendServeArgs {
    Common common;
    BackendArgs backend;
    std::string listen = "http://127.0.0.1:9090";
};

int run_backend_serve(const BackendServeArgs& a) {
    auto schema = a.common.load();
    if (a.backend.kind == "external") throw std::invalid_argument("backend-serve needs a native backend");
    auto backend = a.backend.make(schema);
    auto endpoint = Endpoint::parse(a.listen, true);
    block_signals();
    if (endpoint.transport == Endpoint::Transport::tcp) {
        LineServer server([&](std::string_view line) { return answer_request(*backend, line); }, endpoint.port, endpoint.host);
        std::cout << "serving " << backend->name() << " on tcp://" << endpoint.host << ":" << server.port() << std::endl;
        wait_for_signal();
        server.stop();
        return ok;
    }
    if (endpoint.path != "/predict") throw std::invalid_argument("http backends are served at /predict");
    BackendHttpServer server(*backend);
    const int port = server.bind(endpoint.host, endpoint.port);
    std::cout << "serving " << backend->name() << " on http://" << endpoint.host << ":" << port << "/predict" << std::endl;
    server.start();
    wait_for_signal();
    server.stop();
    return ok;
}

// synth

struct SynthArgs {
    Common common;
    SyntheticWorldOptions world;
    std::string out_dir = ".";
};

int run_synth(const SynthArgs& a) {
    auto schema = a.common.load();
    auto world = generate_world(*schema, a.world);
    fs::create_directories(a.out_dir);
    const fs::path dir = a.out_dir;
    write_text(dir / "instances.jsonl", to_jsonl(world.training));
    write_text(dir / "annotations.jsonl", to_jsonl(world.annotations));
    write_text(dir / "expressions.jsonl", to_jsonl(world.expressions));
    std::cout << "wrote " << world.training.size() << " instances, " << world.annotations.size() << " annotations, "
              << world.expressions.size() << " expressions to " << dir.string() << "\n";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Room and location prediction with clarification questions"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "Count co-occurrences from training instances");
    train.common.attach(cmd_train);
    cmd_train->add_option("--instances", train.instances, "Instances JSONL")->required();
    cmd_train->add_option("--alpha", train.alpha, "Smoothing constant");
    cmd_train->add_option("--rule", train.rule, "additive or product")->check(CLI::IsMember({"additive", "product"}));
    cmd_train->add_option("--out", train.out, "Model file to write")->required();

    EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "Run ablation conditions over an expression set");
    eval.common.attach(cmd_eval);
    eval.backend.attach(cmd_eval);
    eval.controller.attach(cmd_eval, false);
    cmd_eval->add_option("--expressions", eval.expressions, "Expressions JSONL")->required();
    cmd_eval->add_option("--annotations", eval.annotations, "Annotations JSONL (ground truth and simulated answers)")->required();
    cmd_eval->add_option("--conditions", eval.conditions, "all, or a comma list of condition names");
    cmd_eval->add_option("--threads", eval.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd_eval->add_option("--report", eval.report, "Report file (default stdout)");
    cmd_eval->add_option("--format", eval.format, "markdown or csv (default from the report extension)")
        ->check(CLI::IsMember({"markdown", "csv"}));

    AskArgs ask;
    auto* cmd_ask = app.add_subcommand("ask", "Interactive prediction in the terminal");
    ask.common.attach(cmd_ask);
    ask.backend.attach(cmd_ask);
    ask.controller.attach(cmd_ask, true);
    cmd_ask->add_option("--text", ask.text, "Object description (prompted if absent)");

    ServeArgs serve;
    auto* cmd_serve = app.add_subcommand("serve", "HTTP session service");
    serve.common.attach(cmd_serve);
    serve.backend.attach(cmd_serve);
    serve.controller.attach(cmd_serve, true);
    cmd_serve->add_option("--host", serve.host, "Bind address");
    cmd_serve->add_option("--port", serve.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    cmd_serve->add_option("--static", serve.static_dir, "Directory of static files served at /");
    cmd_serve->add_option("--idle-minutes", serve.idle_minutes, "Idle session eviction")->check(CLI::PositiveNumber);

    BackendServeArgs bserve;
    auto* cmd_bserve = app.add_subcommand("backend-serve", "Serve a native backend over the wire protocol");
    bserve.common.attach(cmd_bserve);
    bserve.backend.attach(cmd_bserve);
    cmd_bserve->add_option("--listen", bserve.listen, "http://host:port or tcp://host:port");

    SynthArgs synth;
    auto* cmd_synth = app.add_subcommand("synth", "Write a synthetic household corpus");
    synth.common.attach(cmd_synth);
    cmd_synth->add_option("--out-dir", synth.out_dir, "Output directory");
    cmd_synth->add_option("--training", synth.world.training_instances, "Training instances");
    cmd_synth->add_option("--objects", synth.world.objects, "Evaluation objects");
    cmd_synth->add_option("--expressions-per-object", synth.world.expressions_per_object, "Descriptions per object");
    cmd_synth->add_option("--room-fidelity", synth.world.room_fidelity)->check(CLI::Range(0.0, 1.0));
    cmd_synth->add_option("--location-fidelity", synth.world.location_fidelity)->check(CLI::Range(0.0, 1.0));
    cmd_synth->add_flag("--noise", synth.world.noise_features, "Add an uninformative hidden feature");
    cmd_synth->add_option("--seed", synth.world.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        if (*cmd_train) return run_train(train);
        if (*cmd_eval) return run_eval(eval);
        if (*cmd_ask) return run_ask(ask);
        if (*cmd_serve) return run_serve(serve);
        if (*cmd_bserve) return run_backend_serve(bserve);
        if (*cmd_synth) return run_synth(synth);
    } catch (const MissingFile& e) {
        std::cerr << "error: " << e.what() << "\n";
        return missing_file;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return backend_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return bad_data;
    }
    return usage;
}
