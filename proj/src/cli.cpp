// SPDX-License-Identifier: Apache-2.0
#include <mrta/backends.hpp>
#include <mrta/cli.hpp>
#include <mrta/error.hpp>
#include <mrta/forge.hpp>
#include <mrta/http_server.hpp>
#include <mrta/manual.hpp>
#include <mrta/metrics.hpp>
#include <mrta/service.hpp>
#include <mrta/text.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

namespace mrta
{

using nlohmann::json;
namespace fs = std::filesystem;

namespace
{
    std::atomic<bool> interrupted {false};

    void on_interrupt(int)
    {
        interrupted = true;
    }

    /// Layered settings: explicit flags win over the config file, which wins over built-in defaults.
    class Settings
    {
      public:
        Settings(const CLI::App& command, json config, fs::path config_dir):
            _command(command), _config(std::move(config)), _config_dir(std::move(config_dir))
        {
        }

        template <typename T>
        void fill(const std::string& flag, const std::string& key, T& value) const
        {
            if (given(flag))
                return;
            if (auto const* node = lookup(key))
            {
                try
                {
                    value = node->get<T>();
                }
                catch (const json::exception&)
                {
                    throw Error(ErrorCode::ConfigError, "config value '" + key + "' has the wrong type");
                }
            }
        }

        void fill_path(const std::string& flag, const std::string& key, std::string& value) const
        {
            if (given(flag))
                return;
            if (auto const* node = lookup(key))
            {
                if (!node->is_string())
                    throw Error(ErrorCode::ConfigError, "config value '" + key + "' must be a path string");
                fs::path path(node->get<std::string>());
                value = (path.is_absolute() ? path : _config_dir / path).string();
            }
        }

      private:
        bool given(const std::string& flag) const
        {
            auto const* option = _command.get_option_no_throw(flag);
            return option && option->count() > 0;
        }

        const json* lookup(const std::string& key) const
        {
            auto const section = _command.get_name();
            if (_config.contains(section) && _config.at(section).is_object() && _config.at(section).contains(key))
                return &_config.at(section).at(key);
            if (_config.contains(key))
                return &_config.at(key);
            return nullptr;
        }

        const CLI::App& _command;
        json _config;
        fs::path _config_dir;
    };

    struct UsageError: std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    void require(const std::string& value, const std::string& what)
    {
        if (value.empty())
            throw UsageError(what + " is required");
    }

    json read_json(const fs::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::IoError, "cannot open " + path.string());
        try
        {
            return json::parse(in);
        }
        catch (const json::parse_error& e)
        {
            throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
        }
    }

    void write_text(const fs::path& path, const std::string& content)
    {
        if (path.has_parent_path())
            fs::create_directories(path.parent_path());
        std::ofstream stream(path, std::ios::binary | std::ios::trunc);
        stream << content;
        if (!stream)
            throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }

    std::vector<InstructionManual> load_manuals_strict(const std::string& dir, std::ostream& err)
    {
        auto loaded = load_manual_directory(dir);
        if (!loaded.failures.empty())
        {
            for (auto const& failure: loaded.failures)
                err << failure.file.string() << ": " << failure.reason << '\n';
            throw Error(ErrorCode::SchemaError,
                        std::to_string(loaded.failures.size()) + " manual file(s) in " + dir + " failed validation");
        }
        if (loaded.manuals.empty())
            throw Error(ErrorCode::EmptyManual, "no manual files (*.json) found in " + dir);
        return std::move(loaded.manuals);
    }

    Backends backends_from_file(const std::string& path)
    {
        auto const config = load_backend_config(path);
        return make_backends(config, config.value("base_dir", std::string(".")));
    }

    /// {"id", "text"} per line, in file order.
    std::vector<std::pair<std::string, std::string>> read_text_jsonl(const fs::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::IoError, "cannot open " + path.string());
        std::vector<std::pair<std::string, std::string>> rows;
        std::string line;
        std::size_t number = 0;
        while (std::getline(in, line))
        {
            ++number;
            if (text::trim(line).empty())
                continue;
            json row;
            try
            {
                row = json::parse(line);
            }
            catch (const json::parse_error& e)
            {
                throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(number) + ": " + e.what());
            }
            if (!row.is_object() || !row.contains("text") || !row.at("text").is_string())
                throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(number) + ": needs string 'text'");
            std::string id = std::to_string(number);
            if (row.contains("id"))
                id = row.at("id").is_string() ? row.at("id").get<std::string>() : row.at("id").dump();
            rows.emplace_back(std::move(id), row.at("text").get<std::string>());
        }
        return rows;
    }

    std::vector<std::string> read_lexicon_file(const fs::path& path)
    {
        auto const node = read_json(path);
        if (!node.is_array())
            throw Error(ErrorCode::SchemaError, path.string() + ": lexicon must be a JSON array of strings");
        std::vector<std::string> out;
        for (auto const& entry: node)
        {
            if (!entry.is_string())
                throw Error(ErrorCode::SchemaError, path.string() + ": lexicon entries must be strings");
            out.push_back(entry.get<std::string>());
        }
        return out;
    }

    // ---- ingest ----

    struct IngestArgs
    {
        std::string manuals;
        std::string out;
        bool json_output = false;
    };

    int cmd_ingest(const IngestArgs& args, std::ostream& out, std::ostream& err)
    {
        require(args.manuals, "--manuals");
        auto const manuals = load_manuals_strict(args.manuals, err);
        auto const stats = corpus_stats(manuals);
        if (args.json_output)
            out << to_json(stats).dump(2) << '\n';
        else
            out << format_corpus_stats(stats);
        if (!args.out.empty())
            write_text(args.out, to_json(stats).dump(2) + "\n");
        return exit_ok;
    }

    // ---- generate ----

    struct GenerateArgs
    {
        std::string manuals;
        std::string backend;
        std::string out;
        std::uint64_t seed = 7;
        std::size_t chunk_size = 10;
        double test_fraction = 0.2;
        std::size_t top_k = 20;
        bool requirements = false;
    };

    int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err)
    {
        require(args.manuals, "--manuals");
        require(args.backend, "--backend");
        require(args.out, "--out");
        if (args.chunk_size == 0)
            throw UsageError("--chunk-size must be positive");
        if (!(args.test_fraction > 0.0 && args.test_fraction < 1.0))
            throw UsageError("--test-fraction must lie strictly between 0 and 1");

        auto const manuals = load_manuals_strict(args.manuals, err);
        auto backends = backends_from_file(args.backend);

        ForgeConfig config;
        config.seed = args.seed;
        config.chunk_size = args.chunk_size;
        config.test_fraction = args.test_fraction;
        config.top_k = args.top_k;
        config.user_requirements = args.requirements;

        auto const output = run_forge(manuals, config, *backends.llm, backends.vlm.get());
        write_forge_output(output, args.out);

        for (auto const& rejected: output.rejected)
        {
            err << "rejected " << rejected.record.conv_id << ':';
            for (auto v: rejected.violations)
                err << ' ' << violation_name(v);
            err << '\n';
        }
        for (auto const& [id, reason]: output.unparseable)
            err << "unparseable " << id << ": " << reason << '\n';

        out << "conversations " << output.conversations.size() << '\n'
            << "rejected " << output.rejected.size() + output.unparseable.size() << '\n'
            << "pairs " << output.pairs.size() << " (train " << output.split.train.size() << ", test "
            << output.split.test.size() << ")\n"
            << "vqa " << output.vqa.pairs.size() << " (dropped " << output.vqa.dropped << ")\n"
            << "written to " << args.out << '\n';
        return exit_ok;
    }

    // ---- eval ----

    struct EvalArgs
    {
        std::string predictions;
        std::string references;
        std::string reports;
        std::string manuals;
        std::string theme_lexicon;
        std::string tool_lexicon;
        std::string model_id = "model";
        std::string rouge = "recall";
        std::string out;
    };

    int eval_reports(const EvalArgs& args, std::ostream& out)
    {
        auto const doc = read_json(args.reports);
        auto const& list = doc.is_object() ? doc.at("reports") : doc;
        double const scale = doc.is_object() ? doc.value("scale", 1.0) : 1.0;
        if (!list.is_array() || !(scale > 0.0))
            throw Error(ErrorCode::SchemaError, args.reports + ": expected a list of reports and a positive scale");
        std::vector<MetricReport> reports;
        for (auto node: list)
        {
            if (node.is_object())
                for (auto const* key: {"bleu4", "rouge1", "rouge2", "rougeL", "tool_acc", "theme_acc"})
                    if (node.contains(key) && node.at(key).is_number())
                        node[key] = node.at(key).get<double>() / scale;
            reports.push_back(report_from_json(node));
        }
        std::optional<MetricDispersion> dispersion;
        if (reports.size() >= 2)
            dispersion = metric_stddev(reports);
        out << format_report_table(reports, dispersion);
        if (!args.out.empty())
        {
            json result = {{"reports", json::array()}};
            for (auto const& r: reports)
                result["reports"].push_back(to_json(r));
            result["stddev"] = dispersion ? to_json(*dispersion) : json(nullptr);
            write_text(args.out, result.dump(2) + "\n");
        }
        return exit_ok;
    }

    int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err)
    {
        if (!args.reports.empty())
            return eval_reports(args, out);
        require(args.predictions, "--predictions (or --reports)");
        require(args.references, "--references");
        if (args.rouge != "recall" && args.rouge != "f1")
            throw UsageError("--rouge must be 'recall' or 'f1'");

        auto const predictions = read_text_jsonl(args.predictions);
        auto const references = read_text_jsonl(args.references);
        if (predictions.size() != references.size())
            throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs "
                                                       + std::to_string(references.size()) + " references");
        std::map<std::string, std::string> by_id;
        for (auto const& [id, text]: predictions)
            if (!by_id.emplace(id, text).second)
                throw Error(ErrorCode::SchemaError, "duplicate prediction id '" + id + "'");
        std::vector<std::string> candidate_texts;
        std::vector<std::string> reference_texts;
        for (auto const& [id, text]: references)
        {
            auto const it = by_id.find(id);
            if (it == by_id.end())
                throw Error(ErrorCode::LengthMismatch, "no prediction for reference id '" + id + "'");
            candidate_texts.push_back(it->second);
            reference_texts.push_back(text);
        }

        Lexicons lexicons;
        if (!args.tool_lexicon.empty())
            lexicons.tools = EntityLexicon(read_lexicon_file(args.tool_lexicon));
        else
        {
            std::vector<std::string> names;
            for (auto const& spec: list_tools())
                names.emplace_back(spec.name);
            lexicons.tools = EntityLexicon(std::move(names));
        }
        if (!args.theme_lexicon.empty())
            lexicons.themes = EntityLexicon(read_lexicon_file(args.theme_lexicon));
        else if (!args.manuals.empty())
            lexicons.themes = EntityLexicon(extract_theme_lexicon(load_manuals_strict(args.manuals, err)));

        EvaluateOptions options;
        options.model_id = args.model_id;
        options.rouge_mode = args.rouge == "f1" ? RougeMode::F1 : RougeMode::Recall;
        auto const report = evaluate(candidate_texts, reference_texts, lexicons, options);
        out << format_report_table(std::span(&report, 1));
        if (!args.out.empty())
            write_text(args.out, to_json(report).dump(2) + "\n");
        return exit_ok;
    }

    // ---- serve ----

    struct ServeArgs
    {
        std::string host = "127.0.0.1";
        int port = 8080;
        std::string manuals;
        std::string backend;
        std::string log_dir;
        std::string web_root;
        int max_iterations = 8;
        std::size_t chunk_size = 10;
    };

    ServiceOptions service_options(int max_iterations, std::size_t chunk_size, const std::string& log_dir)
    {
        if (max_iterations <= 0)
            throw UsageError("--max-iterations must be positive");
        if (chunk_size == 0)
            throw UsageError("--chunk-size must be positive");
        ServiceOptions options;
        options.agent.max_iterations = max_iterations;
        options.chunk_size = chunk_size;
        if (!log_dir.empty())
            options.log_dir = log_dir;
        return options;
    }

    BackendFactory factory_from_file(const std::string& path)
    {
        auto config = load_backend_config(path);
        fs::path const base_dir = config.value("base_dir", std::string("."));
        config.erase("base_dir");
        // Build once up front so configuration mistakes surface before serving.
        static_cast<void>(make_backends(config, base_dir));
        return config_backend_factory(std::move(config), base_dir);
    }

    int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err)
    {
        require(args.manuals, "--manuals");
        require(args.backend, "--backend");
        auto manuals = load_manuals_strict(args.manuals, err);
        SessionService service(std::move(manuals), factory_from_file(args.backend),
                               service_options(args.max_iterations, args.chunk_size, args.log_dir));
        auto const restored = service.restore();

        HttpServerOptions options;
        if (!args.web_root.empty())
            options.web_root = args.web_root;
        HttpServer server(service, options);
        if (!server.bind(args.host, args.port))
        {
            err << "cannot listen on " << args.host << ':' << args.port << " (address in use?)\n";
            return exit_data;
        }

        interrupted = false;
        auto const previous_int = std::signal(SIGINT, on_interrupt);
        auto const previous_term = std::signal(SIGTERM, on_interrupt);
        out << "listening on http://" << args.host << ':' << server.port() << '\n';
        if (restored > 0)
            out << "restored " << restored << " session(s)\n";
        out.flush();

        std::atomic<bool> done {false};
        std::thread watcher([&] {
            while (!done && !interrupted)
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
            server.stop();
        });
        server.run();
        done = true;
        watcher.join();
        service.shutdown();
        std::signal(SIGINT, previous_int);
        std::signal(SIGTERM, previous_term);
        out << "stopped\n";
        return exit_ok;
    }

    // ---- chat ----

    struct ChatArgs
    {
        std::string manuals;
        std::string backend;
        std::string manual;
        std::size_t chunk = 0;
        std::string log_dir;
        int max_iterations = 8;
        std::size_t chunk_size = 10;
    };

    void print_events(const std::vector<Event>& events, std::ostream& out)
    {
        for (auto const& event: events)
        {
            auto const& p = event.payload;
            switch (event.type)
            {
                case EventType::TrainerMessage: out << "Trainer: " << p.value("text", std::string {}) << '\n'; break;
                case EventType::TraineeMessage: break;
                case EventType::ToolCall:
                    out << "  [tool] " << p.value("name", std::string {}) << ' ' << p.value("args", json::object()).dump()
                        << '\n';
                    break;
                case EventType::ToolResponse:
                case EventType::VlmResult: {
                    auto const response = p.value("response", json::object());
                    out << (event.type == EventType::VlmResult ? "  [vision] " : "  [result] ")
                        << (response.value("ok", false) ? "" : "(failed) ") << response.value("message", std::string {})
                        << '\n';
                    break;
                }
                case EventType::Error:
                    out << "  [error] " << p.value("code", std::string {}) << ": " << p.value("message", std::string {})
                        << '\n';
                    break;
                case EventType::State:
                    if (p.value("cause", std::string {}) == "step")
                        out << "  [state] step " << p.value("step", 0) << (p.value("done", false) ? " done" : " not done")
                            << '\n';
                    break;
            }
        }
    }

    int cmd_chat(const ChatArgs& args, std::istream& in, std::ostream& out, std::ostream& err)
    {
        require(args.manuals, "--manuals");
        require(args.backend, "--backend");
        auto manuals = load_manuals_strict(args.manuals, err);
        auto const manual_id = args.manual.empty() ? manuals.front().id : args.manual;
        SessionService service(std::move(manuals), factory_from_file(args.backend),
                               service_options(args.max_iterations, args.chunk_size, args.log_dir));
        auto const view = service.create_session(manual_id, args.chunk);
        std::string const id = view.at("session_id");

        std::uint64_t seen = 0;
        auto flush_events = [&] {
            auto const events = service.events_after(id, seen);
            print_events(events, out);
            if (!events.empty())
                seen = events.back().seq;
            out.flush();
        };
        flush_events();

        std::string line;
        while (std::getline(in, line))
        {
            auto const input = std::string(text::trim(line));
            if (input.empty())
                continue;
            if (input == "/quit")
                break;
            if (input.starts_with("/done ") || input.starts_with("/undo "))
            {
                try
                {
                    auto const step = std::stoi(input.substr(6));
                    static_cast<void>(service.control_step(id, step, input.starts_with("/done ")));
                }
                catch (const Error& e)
                {
                    out << "  [error] " << to_string(e.code()) << ": " << e.detail() << '\n';
                }
                catch (const std::exception&)
                {
                    out << "  [error] usage: /done <step> or /undo <step>\n";
                }
                flush_events();
                continue;
            }
            if (input == "/state")
            {
                out << service.session_view(id).at("state").dump() << '\n';
                continue;
            }
            try
            {
                service.post_message(id, input);
            }
            catch (const Error& e)
            {
                out << "  [error] " << to_string(e.code()) << ": " << e.detail() << '\n';
                continue;
            }
            service.wait_idle(id);
            flush_events();
        }
        service.shutdown();
        return exit_ok;
    }

    int exit_code_for(ErrorCode code)
    {
        if (is_backend_failure(code) || code == ErrorCode::ConfigError || code == ErrorCode::BackendConfigError)
            return exit_backend;
        return exit_data;
    }
} // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err)
{
    CLI::App app("Training-assistant toolkit: manuals, dataset generation, evaluation and live sessions.", "mrta");
    app.require_subcommand(1);
    app.set_version_flag("--version", "mrta 1.0.0");
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; explicit flags override its values")
        ->check(CLI::ExistingFile);

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate a manual directory and print corpus statistics");
    ingest_cmd->add_option("--manuals", ingest.manuals, "Directory of manual JSON files");
    ingest_cmd->add_option("--out", ingest.out, "Also write the statistics as JSON to this file");
    ingest_cmd->add_flag("--json", ingest.json_output, "Print JSON instead of a table");

    GenerateArgs generate;
    auto* generate_cmd = app.add_subcommand("generate", "Run the dataset pipeline and write JSONL outputs");
    generate_cmd->add_option("--manuals", generate.manuals, "Directory of manual JSON files");
    generate_cmd->add_option("--backend", generate.backend, "Backend config JSON ({\"llm\": ..., \"vlm\": ...})");
    generate_cmd->add_option("--out", generate.out, "Output directory");
    generate_cmd->add_option("--seed", generate.seed, "Master RNG seed")->capture_default_str();
    generate_cmd->add_option("--chunk-size", generate.chunk_size, "Steps per manual chunk")->capture_default_str();
    generate_cmd->add_option("--test-fraction", generate.test_fraction, "Share of pairs held out for test")
        ->capture_default_str();
    generate_cmd->add_option("--top-k", generate.top_k, "Tokens listed per frequency slice")->capture_default_str();
    generate_cmd->add_flag("--requirements", generate.requirements, "Also elicit user requirements from the manuals");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against references, or summarize reports");
    eval_cmd->add_option("--predictions", eval.predictions, "Predictions JSONL ({\"id\", \"text\"} per line)");
    eval_cmd->add_option("--references", eval.references, "References JSONL ({\"id\", \"text\"} per line)");
    eval_cmd->add_option("--reports", eval.reports, "Metric reports JSON; prints the table with a StdDev row");
    eval_cmd->add_option("--manuals", eval.manuals, "Manual directory providing the theme lexicon");
    eval_cmd->add_option("--theme-lexicon", eval.theme_lexicon, "JSON array of theme entities");
    eval_cmd->add_option("--tool-lexicon", eval.tool_lexicon, "JSON array of tool names (default: the registry)");
    eval_cmd->add_option("--model-id", eval.model_id, "Row label for the report")->capture_default_str();
    eval_cmd->add_option("--rouge", eval.rouge, "ROUGE variant: recall or f1")->capture_default_str();
    eval_cmd->add_option("--out", eval.out, "Write the report JSON to this file");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the session HTTP service");
    serve_cmd->add_option("--host", serve.host, "Listen address")->capture_default_str();
    serve_cmd->add_option("--port", serve.port, "Listen port (0 picks a free port)")->capture_default_str();
    serve_cmd->add_option("--manuals", serve.manuals, "Directory of manual JSON files");
    serve_cmd->add_option("--backend", serve.backend, "Backend config JSON");
    serve_cmd->add_option("--log-dir", serve.log_dir, "Directory for session event logs");
    serve_cmd->add_option("--web-root", serve.web_root, "Static files served under /");
    serve_cmd->add_option("--max-iterations", serve.max_iterations, "Model completions per trainee message")
        ->capture_default_str();
    serve_cmd->add_option("--chunk-size", serve.chunk_size, "Steps per manual chunk")->capture_default_str();

    ChatArgs chat;
    auto* chat_cmd = app.add_subcommand("chat", "Interactive terminal session (/done N, /undo N, /state, /quit)");
    chat_cmd->add_option("--manuals", chat.manuals, "Directory of manual JSON files");
    chat_cmd->add_option("--backend", chat.backend, "Backend config JSON");
    chat_cmd->add_option("--manual", chat.manual, "Manual id (default: the first manual)");
    chat_cmd->add_option("--chunk", chat.chunk, "Chunk index within the manual")->capture_default_str();
    chat_cmd->add_option("--log-dir", chat.log_dir, "Directory for the session event log");
    chat_cmd->add_option("--max-iterations", chat.max_iterations, "Model completions per trainee message")
        ->capture_default_str();
    chat_cmd->add_option("--chunk-size", chat.chunk_size, "Steps per manual chunk")->capture_default_str();

    std::vector<const char*> argv;
    for (auto const& arg: args)
        argv.push_back(arg.c_str());
    try
    {
        app.parse(static_cast<int>(argv.size()), argv.data());
    }
    catch (const CLI::ParseError& e)
    {
        auto const code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try
    {
        json config = json::object();
        fs::path config_dir = ".";
        if (!config_path.empty())
        {
            config = read_json(config_path);
            if (!config.is_object())
                throw Error(ErrorCode::ConfigError, config_path + ": config must be a JSON object");
            config_dir = fs::absolute(config_path).parent_path();
        }

        if (ingest_cmd->parsed())
        {
            Settings s(*ingest_cmd, config, config_dir);
            s.fill_path("--manuals", "manuals", ingest.manuals);
            s.fill_path("--out", "out", ingest.out);
            s.fill("--json", "json", ingest.json_output);
            return cmd_ingest(ingest, out, err);
        }
        if (generate_cmd->parsed())
        {
            Settings s(*generate_cmd, config, config_dir);
            s.fill_path("--manuals", "manuals", generate.manuals);
            s.fill_path("--backend", "backend", generate.backend);
            s.fill_path("--out", "out", generate.out);
            s.fill("--seed", "seed", generate.seed);
            s.fill("--chunk-size", "chunk_size", generate.chunk_size);
            s.fill("--test-fraction", "test_fraction", generate.test_fraction);
            s.fill("--top-k", "top_k", generate.top_k);
            s.fill("--requirements", "requirements", generate.requirements);
            return cmd_generate(generate, out, err);
        }
        if (eval_cmd->parsed())
        {
            Settings s(*eval_cmd, config, config_dir);
            s.fill_path("--predictions", "predictions", eval.predictions);
            s.fill_path("--references", "references", eval.references);
            s.fill_path("--reports", "reports", eval.reports);
            s.fill_path("--manuals", "manuals", eval.manuals);
            s.fill_path("--theme-lexicon", "theme_lexicon", eval.theme_lexicon);
            s.fill_path("--tool-lexicon", "tool_lexicon", eval.tool_lexicon);
            s.fill("--model-id", "model_id", eval.model_id);
            s.fill("--rouge", "rouge", eval.rouge);
            s.fill_path("--out", "out", eval.out);
            return cmd_eval(eval, out, err);
        }
        if (serve_cmd->parsed())
        {
            Settings s(*serve_cmd, config, config_dir);
            s.fill("--host", "host", serve.host);
            s.fill("--port", "port", serve.port);
            s.fill_path("--manuals", "manuals", serve.manuals);
            s.fill_path("--backend", "backend", serve.backend);
            s.fill_path("--log-dir", "log_dir", serve.log_dir);
            s.fill_path("--web-root", "web_root", serve.web_root);
            s.fill("--max-iterations", "max_iterations", serve.max_iterations);
            s.fill("--chunk-size", "chunk_size", serve.chunk_size);
            return cmd_serve(serve, out, err);
        }
        if (chat_cmd->parsed())
        {
            Settings s(*chat_cmd, config, config_dir);
            s.fill_path("--manuals", "manuals", chat.manuals);
            s.fill_path("--backend", "backend", chat.backend);
            s.fill("--manual", "manual", chat.manual);
            s.fill("--chunk", "chunk", chat.chunk);
            s.fill_path("--log-dir", "log_dir", chat.log_dir);
            s.fill("--max-iterations", "max_iterations", chat.max_iterations);
            s.fill("--chunk-size", "chunk_size", chat.chunk_size);
            return cmd_chat(chat, in, out, err);
        }
    }
    catch (const UsageError& e)
    {
        err << "error: " << e.what() << "\nRun with --help for usage.\n";
        return exit_usage;
    }
    catch (const Error& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    }
    catch (const std::filesystem::filesystem_error& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_data;
    }
    return exit_usage;
}

} // namespace mrta
