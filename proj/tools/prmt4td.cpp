// Command-line front end: train -> calibrate -> detect -> eval -> ablate.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "prmt4td/prmt4td.hpp"

namespace {

using namespace prmt4td;
using Json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kToolVersion = "1.0.0";
constexpr std::string_view kManifestFormat = "prmt4td-manifest";

// ---- run configuration -----------------------------------------------------

struct BackendSettings {
    std::string kind = "http";  // http | replay | record | echo
    std::string endpoint = "https://api.deepseek.com/chat/completions";
    std::string model_name = "deepseek-chat";
    double temperature = 0.0;
    int max_tokens = 1024;
    std::size_t concurrency = 4;
    std::string replay_dir;
    std::string api_key_env = "PRMT4TD_API_KEY";
    double requests_per_second = 0.0;
};

struct RunConfig {
    std::string corpus;
    std::string model;
    std::string calibrator;
    std::string results;
    std::string ratings;
    std::string out;
    std::uint64_t seed = 42;
    double alpha = kDefaultAlpha;
    std::string variant = "full";
    double w_semantic = 1.0 / 3.0;
    double w_lexical = 1.0 / 3.0;
    double w_syntactic = 1.0 / 3.0;
    double train_frac = 0.6;
    double calib_frac = 0.2;
    std::size_t epochs = 300;
    double learning_rate = 1.0;
    double l2 = 1e-4;
    std::size_t batch_size = 0;
    std::size_t per_label = 1;
    bool drop_unparsed = false;
    bool average_includes_unrelated = false;
    std::size_t synth_per_label = 20;
    double synth_noise = 0.0;
    BackendSettings backend;

    Json to_json() const {
        return {
            {"corpus", corpus},
            {"model", model},
            {"calibrator", calibrator},
            {"results", results},
            {"ratings", ratings},
            {"out", out},
            {"seed", seed},
            {"alpha", alpha},
            {"variant", variant},
            {"similarity", {{"semantic", w_semantic}, {"lexical", w_lexical}, {"syntactic", w_syntactic}}},
            {"split", {{"train", train_frac}, {"calibration", calib_frac}}},
            {"train", {{"epochs", epochs}, {"learning_rate", learning_rate}, {"l2", l2}, {"batch_size", batch_size}}},
            {"demos", {{"per_label", per_label}}},
            {"eval", {{"drop_unparsed", drop_unparsed}, {"average_includes_unrelated", average_includes_unrelated}}},
            {"synth", {{"per_label", synth_per_label}, {"noise", synth_noise}}},
            {"backend",
             {{"kind", backend.kind},
              {"endpoint", backend.endpoint},
              {"model_name", backend.model_name},
              {"temperature", backend.temperature},
              {"max_tokens", backend.max_tokens},
              {"concurrency", backend.concurrency},
              {"replay_dir", backend.replay_dir},
              {"api_key_env", backend.api_key_env},
              {"requests_per_second", backend.requests_per_second}}},
        };
    }

    SimilarityWeights weights() const { return SimilarityWeights(w_semantic, w_lexical, w_syntactic); }

    PromptVariant prompt_variant() const {
        const auto v = try_parse_variant(variant);
        if (!v) throw UsageError("unknown prompt variant '" + variant + "'");
        return *v;
    }

    PipelineSettings pipeline() const {
        PipelineSettings s;
        s.variant = prompt_variant();
        s.weights = weights();
        s.per_label = per_label;
        s.seed = seed;
        s.model_name = backend.model_name;
        s.temperature = backend.temperature;
        s.max_tokens = backend.max_tokens;
        s.concurrency = backend.concurrency;
        return s;
    }
};

using ConfigMap = std::map<std::string, std::string>;

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof()) throw UsageError("config key '" + key + "': invalid value '" + text + "'");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = detail::ascii_lower(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw UsageError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

void apply_config(RunConfig& cfg, const ConfigMap& values) {
    for (const auto& [key, v] : values) {
        if (key == "corpus") cfg.corpus = v;
        else if (key == "model") cfg.model = v;
        else if (key == "calibrator") cfg.calibrator = v;
        else if (key == "results") cfg.results = v;
        else if (key == "ratings") cfg.ratings = v;
        else if (key == "out") cfg.out = v;
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "alpha") cfg.alpha = parse_number<double>(key, v);
        else if (key == "variant") cfg.variant = v;
        else if (key == "similarity.semantic") cfg.w_semantic = parse_number<double>(key, v);
        else if (key == "similarity.lexical") cfg.w_lexical = parse_number<double>(key, v);
        else if (key == "similarity.syntactic") cfg.w_syntactic = parse_number<double>(key, v);
        else if (key == "split.train") cfg.train_frac = parse_number<double>(key, v);
        else if (key == "split.calibration") cfg.calib_frac = parse_number<double>(key, v);
        else if (key == "train.epochs") cfg.epochs = parse_number<std::size_t>(key, v);
        else if (key == "train.learning_rate") cfg.learning_rate = parse_number<double>(key, v);
        else if (key == "train.l2") cfg.l2 = parse_number<double>(key, v);
        else if (key == "train.batch_size") cfg.batch_size = parse_number<std::size_t>(key, v);
        else if (key == "demos.per_label") cfg.per_label = parse_number<std::size_t>(key, v);
        else if (key == "eval.drop_unparsed") cfg.drop_unparsed = parse_bool(key, v);
        else if (key == "eval.average_includes_unrelated") cfg.average_includes_unrelated = parse_bool(key, v);
        else if (key == "synth.per_label") cfg.synth_per_label = parse_number<std::size_t>(key, v);
        else if (key == "synth.noise") cfg.synth_noise = parse_number<double>(key, v);
        else if (key == "backend.kind") cfg.backend.kind = v;
        else if (key == "backend.endpoint") cfg.backend.endpoint = v;
        else if (key == "backend.model_name") cfg.backend.model_name = v;
        else if (key == "backend.temperature") cfg.backend.temperature = parse_number<double>(key, v);
        else if (key == "backend.max_tokens") cfg.backend.max_tokens = parse_number<int>(key, v);
        else if (key == "backend.concurrency") cfg.backend.concurrency = parse_number<std::size_t>(key, v);
        else if (key == "backend.replay_dir") cfg.backend.replay_dir = v;
        else if (key == "backend.api_key_env") cfg.backend.api_key_env = v;
        else if (key == "backend.requests_per_second") cfg.backend.requests_per_second = parse_number<double>(key, v);
        else throw UsageError("unknown config key '" + key + "'");
    }
}

void flatten(const Json& j, const std::string& prefix, ConfigMap& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_string()) {
        out[prefix] = j.get<std::string>();
    } else if (j.is_boolean()) {
        out[prefix] = j.get<bool>() ? "true" : "false";
    } else if (j.is_number_unsigned() || j.is_number_integer()) {
        out[prefix] = j.dump();
    } else if (j.is_number_float()) {
        std::ostringstream os;
        os << std::setprecision(17) << j.get<double>();
        out[prefix] = os.str();
    } else if (!j.is_null()) {
        throw UsageError("config key '" + prefix + "' has an unsupported value type");
    }
}

/// JSON (including a previous run's manifest) or TOML, flattened to
/// dotted keys.
ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    ConfigMap values;
    if (fs::path(path).extension() == ".json") {
        Json j;
        try {
            j = Json::parse(in);
        } catch (const Json::exception& e) {
            throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
        }
        if (j.is_object() && j.value("format", "") == kManifestFormat) j = j.at("config");
        flatten(j, "", values);
        return values;
    }
    try {
        for (const auto& item : CLI::ConfigTOML().from_config(in)) {
            if (item.name == "++" || item.name == "--") continue;
            values[item.fullname()] = item.inputs.empty() ? "" : item.inputs.front();
        }
    } catch (const CLI::Error& e) {
        throw UsageError("config file '" + path + "': " + e.what());
    }
    return values;
}

// ---- flags ----------------------------------------------------------------------

struct FlagSpec {
    const char* key;
    const char* flag;
    const char* help;
    bool boolean = false;
};

constexpr FlagSpec kFlags[] = {
    {"corpus", "--corpus", "corpus JSONL file"},
    {"model", "--model", "small-model file"},
    {"calibrator", "--calibrator", "calibrator file"},
    {"results", "--results", "detections JSONL file"},
    {"ratings", "--ratings", "clarity ratings JSONL file"},
    {"out", "--out", "output directory"},
    {"seed", "--seed", "run seed"},
    {"alpha", "--alpha", "conformal miscoverage level"},
    {"variant", "--variant", "prompt variant"},
    {"similarity.semantic", "--w-semantic", "semantic similarity weight"},
    {"similarity.lexical", "--w-lexical", "lexical similarity weight"},
    {"similarity.syntactic", "--w-syntactic", "syntactic similarity weight"},
    {"split.train", "--train-frac", "training fraction when the corpus has no split"},
    {"split.calibration", "--calib-frac", "calibration fraction when the corpus has no split"},
    {"train.epochs", "--epochs", "training epochs"},
    {"train.learning_rate", "--learning-rate", "gradient step size"},
    {"train.l2", "--l2", "weight decay"},
    {"train.batch_size", "--batch-size", "mini-batch size (0 = full batch)"},
    {"demos.per_label", "--per-label", "demonstrations per candidate label"},
    {"eval.drop_unparsed", "--drop-unparsed", "skip unparsed results instead of scoring them as misses", true},
    {"eval.average_includes_unrelated", "--average-includes-unrelated", "include 'unrelated' in the average", true},
    {"synth.per_label", "--examples-per-label", "synthetic examples per label"},
    {"synth.noise", "--label-noise", "synthetic label noise probability"},
    {"backend.kind", "--backend", "http, replay, record or echo"},
    {"backend.endpoint", "--endpoint", "chat-completions URL"},
    {"backend.model_name", "--llm-model", "remote model name"},
    {"backend.temperature", "--temperature", "sampling temperature"},
    {"backend.max_tokens", "--max-tokens", "response token limit"},
    {"backend.concurrency", "--concurrency", "requests in flight"},
    {"backend.replay_dir", "--replay-dir", "replay fixture directory"},
    {"backend.api_key_env", "--api-key-env", "environment variable holding the API key"},
    {"backend.requests_per_second", "--rps", "request rate limit (0 = none)"},
};

/// Options of one subcommand. Flag values are collected as config overrides
/// and applied on top of the config file.
class CommandOptions {
public:
    CommandOptions(CLI::App& sub, const std::vector<std::string_view>& keys) {
        sub.add_option("--config", config_path_, "JSON or TOML config file");
        for (const auto& spec : kFlags) {
            if (std::find(keys.begin(), keys.end(), spec.key) == keys.end()) continue;
            CLI::Option* opt = spec.boolean ? sub.add_flag(spec.flag, spec.help)
                                            : sub.add_option(spec.flag, values_[spec.key], spec.help);
            bound_.emplace_back(opt, spec);
        }
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path_.empty()) apply_config(cfg, load_config_file(config_path_));
        ConfigMap overrides;
        for (const auto& [opt, spec] : bound_) {
            if (opt->count() == 0) continue;
            overrides[spec.key] = spec.boolean ? "true" : values_.at(spec.key);
        }
        apply_config(cfg, overrides);
        if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
        cfg.weights();
        return cfg;
    }

private:
    std::string config_path_;
    std::map<std::string, std::string> values_;
    std::vector<std::pair<CLI::Option*, FlagSpec>> bound_;
};

// ---- helpers -------------------------------------------------------------------

void require(const std::string& value, const char* what) {
    if (value.empty()) throw UsageError(std::string("missing required setting: ") + what);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << content;
}

fs::path output_dir(const RunConfig& cfg) {
    require(cfg.out, "out");
    fs::create_directories(cfg.out);
    return cfg.out;
}

/// Everything needed to re-run the command: the effective config, input
/// digests and versions. No timestamps, so reruns produce identical files.
void write_manifest(const fs::path& dir, std::string_view command, const RunConfig& cfg,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
    const Json config = cfg.to_json();
    Json digests = Json::object();
    for (const auto& path : inputs) {
        if (!path.empty() && fs::is_regular_file(path)) digests[path] = sha256_hex(read_file(path));
    }
    const Json manifest{
        {"format", std::string(kManifestFormat)},
        {"command", std::string(command)},
        {"rerun", "prmt4td " + std::string(command) + " --config " + (dir / "manifest.json").string()},
        {"config", config},
        {"config_hash", sha256_hex(config.dump())},
        {"seed", cfg.seed},
        {"versions",
         {{"tool", std::string(kToolVersion)},
          {"model_format", kModelFormatVersion},
          {"tokenizer", std::string(kTokenizerVersion)}}},
        {"inputs", digests},
        {"outputs", outputs},
    };
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// The corpus with splits; an unsplit corpus is split with the configured
/// fractions and seed.
Corpus load_split_corpus(const RunConfig& cfg) {
    require(cfg.corpus, "corpus");
    Corpus corpus = load_corpus(cfg.corpus);
    const bool has_split = std::any_of(corpus.examples().begin(), corpus.examples().end(),
                                       [](const LabeledExample& ex) { return ex.split != Split::unassigned; });
    return has_split ? corpus : split_corpus(corpus, cfg.train_frac, cfg.calib_frac, cfg.seed);
}

std::vector<LabeledExample> non_empty_split(const Corpus& corpus, Split split) {
    auto examples = corpus.in_split(split);
    if (examples.empty()) throw DataError("corpus has no " + std::string(to_string(split)) + " examples");
    return examples;
}

std::shared_ptr<CompletionBackend> make_backend(const BackendSettings& b) {
    std::shared_ptr<CompletionBackend> backend;
    auto live = [&] {
        const char* key = std::getenv(b.api_key_env.c_str());
        return std::make_shared<ChatCompletionBackend>(b.endpoint, key ? key : "");
    };
    if (b.kind == "echo") {
        backend = std::make_shared<EchoBackend>();
    } else if (b.kind == "replay") {
        require(b.replay_dir, "backend.replay_dir");
        backend = std::make_shared<ReplayBackend>(b.replay_dir);
    } else if (b.kind == "http") {
        backend = live();
    } else if (b.kind == "record") {
        require(b.replay_dir, "backend.replay_dir");
        backend = std::make_shared<RecordingBackend>(live(), b.replay_dir);
    } else {
        throw UsageError("unknown backend kind '" + b.kind + "'");
    }
    if (b.requests_per_second > 0.0) backend = std::make_shared<RateLimitedBackend>(backend, b.requests_per_second);
    return backend;
}

std::string detections_jsonl(const std::vector<DetectionResult>& results) {
    std::string out;
    for (const auto& r : results) out += to_json(r).dump() + "\n";
    return out;
}

Json timings_json(const std::vector<DetectionResult>& results) {
    Json t = Json::object();
    for (const auto& r : results) t[r.input_id] = r.latency_ms;
    return t;
}

Json metrics_report(const ConfusionCounts& counts, const std::vector<MetricsRow>& rows, const RunConfig& cfg) {
    Json metric_rows = Json::array();
    for (const auto& row : rows) metric_rows.push_back(to_json(row));
    return {{"counts", to_json(counts)},
            {"metrics", metric_rows},
            {"unparsed_scoring", cfg.drop_unparsed ? "dropped" : "miss"},
            {"average_includes_unrelated", cfg.average_includes_unrelated}};
}

/// Loads model and calibrator as the first stages of processing `first_id`.
Detector make_detector(const RunConfig& cfg, const Corpus& corpus, const std::string& first_id) {
    require(cfg.model, "model");
    require(cfg.calibrator, "calibrator");
    auto model = run_stage(first_id, "predict", [&] { return std::make_shared<const SmallModel>(load_model(cfg.model)); });
    auto cal = run_stage(first_id, "predict_set", [&] { return load_calibrator(cfg.calibrator); });
    return Detector(std::move(model), std::move(cal), non_empty_split(corpus, Split::train));
}

// ---- commands --------------------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
    const Corpus corpus = load_split_corpus(cfg);
    const auto train_set = non_empty_split(corpus, Split::train);
    TrainingConfig tc;
    tc.epochs = cfg.epochs;
    tc.learning_rate = cfg.learning_rate;
    tc.l2 = cfg.l2;
    tc.batch_size = cfg.batch_size;
    tc.seed = cfg.seed;
    const SmallModel model = train(train_set, tc);
    const fs::path dir = output_dir(cfg);
    save_model((dir / "model.json").string(), model);
    write_manifest(dir, "train", cfg, {cfg.corpus}, {"model.json"});
    std::cout << "trained on " << train_set.size() << " examples, vocabulary " << model.vocabulary().size()
              << " terms -> " << (dir / "model.json").string() << "\n";
    return 0;
}

int cmd_calibrate(const RunConfig& cfg) {
    const Corpus corpus = load_split_corpus(cfg);
    const auto calib_set = non_empty_split(corpus, Split::calibration);
    require(cfg.model, "model");
    const SmallModel model = load_model(cfg.model);
    const Calibrator cal = calibrate(model, calib_set, cfg.alpha);
    const fs::path dir = output_dir(cfg);
    save_calibrator((dir / "calibrator.json").string(), cal);
    write_manifest(dir, "calibrate", cfg, {cfg.corpus, cfg.model}, {"calibrator.json"});
    std::cout << "alpha " << cal.alpha << ", threshold " << cal.threshold << " from " << cal.calib_size
              << " calibration examples\n";
    return 0;
}

int cmd_detect(const RunConfig& cfg) {
    const Corpus corpus = load_split_corpus(cfg);
    const auto test = non_empty_split(corpus, Split::test);
    const Detector detector = make_detector(cfg, corpus, test.front().id);
    const auto backend = make_backend(cfg.backend);
    const auto results = detector.detect(test, *backend, cfg.pipeline());
    const auto counts = score(results, test, ScoreOptions{cfg.drop_unparsed});
    const auto rows = metrics(counts, MetricsOptions{cfg.average_includes_unrelated});

    const fs::path dir = output_dir(cfg);
    write_file(dir / "detections.jsonl", detections_jsonl(results));
    write_file(dir / "metrics.json", metrics_report(counts, rows, cfg).dump(2) + "\n");
    write_file(dir / "metrics.txt", format_metrics_table(rows));
    write_file(dir / "timings.json", timings_json(results).dump(2) + "\n");
    write_manifest(dir, "detect", cfg, {cfg.corpus, cfg.model, cfg.calibrator},
                   {"detections.jsonl", "metrics.json", "metrics.txt", "timings.json"});
    std::cout << format_metrics_table(rows);
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    const Corpus corpus = load_split_corpus(cfg);
    const auto test = non_empty_split(corpus, Split::test);
    const Detector detector = make_detector(cfg, corpus, test.front().id);
    const auto backend = make_backend(cfg.backend);
    const auto report = run_ablation(detector, test, *backend, cfg.pipeline(), ScoreOptions{cfg.drop_unparsed},
                                     MetricsOptions{cfg.average_includes_unrelated});

    const fs::path dir = output_dir(cfg);
    std::vector<std::string> outputs{"ablation.json", "ablation.txt"};
    Json timings = Json::object();
    for (const auto& v : report.variants) {
        const std::string name = "detections_" + std::string(to_string(v.variant)) + ".jsonl";
        write_file(dir / name, detections_jsonl(v.results));
        outputs.push_back(name);
        timings[std::string(to_string(v.variant))] = timings_json(v.results);
    }
    write_file(dir / "ablation.json", to_json(report).dump(2) + "\n");
    write_file(dir / "ablation.txt", format_ablation_table(report));
    write_file(dir / "timings.json", timings.dump(2) + "\n");
    outputs.push_back("timings.json");
    write_manifest(dir, "ablate", cfg, {cfg.corpus, cfg.model, cfg.calibrator}, outputs);
    std::cout << format_ablation_table(report);
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    if (cfg.results.empty() && cfg.ratings.empty()) throw UsageError("eval needs --results and/or --ratings");
    const fs::path dir = output_dir(cfg);
    Json report = Json::object();
    std::vector<std::string> outputs{"metrics.json"};
    if (!cfg.results.empty()) {
        require(cfg.corpus, "corpus");
        const Corpus corpus = load_corpus(cfg.corpus);
        std::vector<DetectionResult> results;
        std::istringstream lines(read_file(cfg.results));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(lines, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            try {
                results.push_back(detection_result_from_json(Json::parse(line)));
            } catch (const Json::exception& e) {
                throw DataError("results line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        const auto counts = score(results, corpus.examples(), ScoreOptions{cfg.drop_unparsed});
        const auto rows = metrics(counts, MetricsOptions{cfg.average_includes_unrelated});
        report = metrics_report(counts, rows, cfg);
        write_file(dir / "metrics.txt", format_metrics_table(rows));
        outputs.push_back("metrics.txt");
        std::cout << format_metrics_table(rows);
    }
    if (!cfg.ratings.empty()) {
        std::ifstream in(cfg.ratings);
        if (!in) throw DataError("cannot open '" + cfg.ratings + "'");
        const auto ratings = parse_clarity_ratings(in);
        std::set<std::string> raters;
        for (const auto& r : ratings) raters.insert(r.rater_id);
        if (raters.size() != 2) throw DataError("agreement test needs exactly two raters, found " +
                                                std::to_string(raters.size()));
        const auto a = *raters.begin();
        const auto b = *std::next(raters.begin());
        const auto table = overlap_contingency(ratings, a, b);
        const auto chi = chi_square(table);
        report["clarity"] = {{"raters", {a, b}},
                             {"table", table},
                             {"columns", {"Clear", "Neutral", "Unclear"}},
                             {"statistic", chi.statistic},
                             {"df", chi.df},
                             {"p_value", chi.p_value}};
        std::cout << "chi-square " << chi.statistic << " (df " << chi.df << "), p = " << chi.p_value << "\n";
    }
    write_file(dir / "metrics.json", report.dump(2) + "\n");
    write_manifest(dir, "eval", cfg, {cfg.corpus, cfg.results, cfg.ratings}, outputs);
    return 0;
}

std::string query_code(const Corpus& corpus, const std::string& id, const std::string& code_file) {
    if (!code_file.empty()) return read_file(code_file);
    if (id.empty()) throw UsageError("give --id or --code-file");
    const auto* ex = corpus.find(id);
    if (ex == nullptr) throw DataError("no example with id '" + id + "'");
    return ex->code;
}

int cmd_prompt_preview(const RunConfig& cfg, const std::string& id, const std::string& code_file) {
    const Corpus corpus = load_split_corpus(cfg);
    LabeledExample input;
    input.id = id.empty() ? code_file : id;
    input.code = query_code(corpus, id, code_file);
    const PipelineSettings settings = cfg.pipeline();
    if (settings.variant == PromptVariant::p_bas || settings.variant == PromptVariant::p_abas) {
        std::cout << assemble_prompt(PromptParts{{}, std::nullopt, input.code, std::nullopt}, settings.variant).rendered;
        return 0;
    }
    const Detector detector = make_detector(cfg, corpus, input.id);
    std::cout << detector.prepare(input, settings).bundle.rendered;
    return 0;
}

int cmd_similarity_explain(const RunConfig& cfg, const std::string& id, const std::string& code_file,
                           std::size_t top) {
    const Corpus corpus = load_split_corpus(cfg);
    require(cfg.model, "model");
    const auto model = std::make_shared<const SmallModel>(load_model(cfg.model));
    const std::string code = query_code(corpus, id, code_file);
    std::vector<LabeledExample> pool;
    for (const auto& ex : non_empty_split(corpus, Split::train)) {
        if (ex.id != id) pool.push_back(ex);
    }
    const CandidatePool index(std::move(pool), [model](std::string_view c) { return model->features(c); });
    const auto ranked = index.rank(index.profile(code), cfg.weights());
    std::cout << std::left << std::setw(24) << "id" << std::setw(14) << "label" << std::right << std::setw(10)
              << "semantic" << std::setw(10) << "lexical" << std::setw(10) << "syntactic" << std::setw(10)
              << "combined" << "\n"
              << std::fixed << std::setprecision(4);
    for (std::size_t i = 0; i < std::min(top, ranked.size()); ++i) {
        const auto& r = ranked[i];
        std::cout << std::left << std::setw(24) << r.example->id << std::setw(14) << to_string(r.example->label)
                  << std::right << std::setw(10) << r.similarity.semantic << std::setw(10) << r.similarity.lexical
                  << std::setw(10) << r.similarity.syntactic << std::setw(10) << r.similarity.combined << "\n";
    }
    return 0;
}

int cmd_corpus_validate(const RunConfig& cfg) {
    require(cfg.corpus, "corpus");
    const Corpus corpus = load_corpus(cfg.corpus);
    std::map<std::string, std::size_t> by_split;
    for (const auto& ex : corpus.examples()) ++by_split[std::string(to_string(ex.split))];
    std::cout << corpus.size() << " examples\n";
    for (auto label : kAllLabels) {
        std::cout << "  " << std::left << std::setw(14) << to_string(label) << corpus.label_counts()[index_of(label)]
                  << "\n";
    }
    for (const auto& [split, n] : by_split) std::cout << "  split " << split << ": " << n << "\n";
    return 0;
}

int cmd_corpus_split(const RunConfig& cfg) {
    require(cfg.corpus, "corpus");
    const Corpus split = split_corpus(load_corpus(cfg.corpus), cfg.train_frac, cfg.calib_frac, cfg.seed);
    const fs::path dir = output_dir(cfg);
    save_corpus((dir / "corpus.jsonl").string(), split);
    write_manifest(dir, "corpus split", cfg, {cfg.corpus}, {"corpus.jsonl"});
    std::cout << "train " << split.in_split(Split::train).size() << ", calibration "
              << split.in_split(Split::calibration).size() << ", test " << split.in_split(Split::test).size()
              << "\n";
    return 0;
}

int cmd_corpus_synth(const RunConfig& cfg) {
    const Corpus corpus(generate_synthetic(SyntheticSpec{cfg.synth_per_label, cfg.synth_noise, cfg.seed}));
    const fs::path dir = output_dir(cfg);
    save_corpus((dir / "corpus.jsonl").string(), corpus);
    write_manifest(dir, "corpus synth", cfg, {}, {"corpus.jsonl"});
    std::cout << corpus.size() << " synthetic examples -> " << (dir / "corpus.jsonl").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Architectural tactic detection with small-model-augmented prompting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    const std::initializer_list<std::string_view> split_keys{"corpus", "seed", "split.train", "split.calibration"};
    const std::initializer_list<std::string_view> backend_keys{
        "backend.kind",       "backend.endpoint",   "backend.model_name",  "backend.temperature",
        "backend.max_tokens", "backend.concurrency", "backend.replay_dir", "backend.api_key_env",
        "backend.requests_per_second"};
    auto keys = [](std::initializer_list<std::initializer_list<std::string_view>> groups) {
        std::vector<std::string_view> all;
        for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
        return all;
    };
    const auto train_keys = keys({split_keys, {"out", "train.epochs", "train.learning_rate", "train.l2",
                                               "train.batch_size"}});
    const auto calib_keys = keys({split_keys, {"out", "model", "alpha"}});
    const auto detect_keys =
        keys({split_keys, backend_keys,
              {"out", "model", "calibrator", "variant", "similarity.semantic", "similarity.lexical",
               "similarity.syntactic", "demos.per_label", "eval.drop_unparsed", "eval.average_includes_unrelated"}});
    const auto eval_keys =
        keys({{"corpus", "results", "ratings", "out", "eval.drop_unparsed", "eval.average_includes_unrelated"}});
    const auto preview_keys = keys({split_keys, {"model", "calibrator", "variant", "similarity.semantic",
                                                 "similarity.lexical", "similarity.syntactic", "demos.per_label",
                                                 "backend.model_name", "backend.temperature", "backend.max_tokens"}});
    const auto explain_keys =
        keys({split_keys, {"model", "similarity.semantic", "similarity.lexical", "similarity.syntactic"}});
    const auto validate_keys = keys({{"corpus"}});
    const auto split_cmd_keys = keys({split_keys, {"out"}});
    const auto synth_keys = keys({{"seed", "out", "synth.per_label", "synth.noise"}});

    auto make = [](CLI::App& sub, const std::vector<std::string_view>& k) {
        return std::make_unique<CommandOptions>(sub, k);
    };

    auto* train_cmd = app.add_subcommand("train", "train the small model");
    auto train_opts = make(*train_cmd, train_keys);
    auto* calib_cmd = app.add_subcommand("calibrate", "fit the conformal threshold");
    auto calib_opts = make(*calib_cmd, calib_keys);
    auto* detect_cmd = app.add_subcommand("detect", "run the detection pipeline on the test split");
    auto detect_opts = make(*detect_cmd, detect_keys);
    auto* eval_cmd = app.add_subcommand("eval", "score detections and/or clarity-rating agreement");
    auto eval_opts = make(*eval_cmd, eval_keys);
    auto* ablate_cmd = app.add_subcommand("ablate", "run the five ablation variants");
    auto ablate_opts = make(*ablate_cmd, detect_keys);

    std::string id;
    std::string code_file;
    std::size_t top = 5;
    auto* prompt_cmd = app.add_subcommand("prompt", "prompt tools");
    prompt_cmd->require_subcommand(1);
    auto* preview_cmd = prompt_cmd->add_subcommand("preview", "render the prompt for one snippet");
    auto preview_opts = make(*preview_cmd, preview_keys);
    preview_cmd->add_option("--id", id, "corpus example id");
    preview_cmd->add_option("--code-file", code_file, "file holding the snippet");

    auto* sim_cmd = app.add_subcommand("similarity", "similarity tools");
    sim_cmd->require_subcommand(1);
    auto* explain_cmd = sim_cmd->add_subcommand("explain", "rank training examples against one snippet");
    auto explain_opts = make(*explain_cmd, explain_keys);
    explain_cmd->add_option("--id", id, "corpus example id");
    explain_cmd->add_option("--code-file", code_file, "file holding the snippet");
    explain_cmd->add_option("--top", top, "rows to show");

    auto* corpus_cmd = app.add_subcommand("corpus", "corpus tools");
    corpus_cmd->require_subcommand(1);
    auto* validate_cmd = corpus_cmd->add_subcommand("validate", "check a corpus file");
    auto validate_opts = make(*validate_cmd, validate_keys);
    auto* split_cmd = corpus_cmd->add_subcommand("split", "assign stratified train/calibration/test splits");
    auto split_opts = make(*split_cmd, split_cmd_keys);
    auto* synth_cmd = corpus_cmd->add_subcommand("synth", "generate a synthetic corpus");
    auto synth_opts = make(*synth_cmd, synth_keys);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_opts->resolve());
        if (calib_cmd->parsed()) return cmd_calibrate(calib_opts->resolve());
        if (detect_cmd->parsed()) return cmd_detect(detect_opts->resolve());
        if (eval_cmd->parsed()) return cmd_eval(eval_opts->resolve());
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_opts->resolve());
        if (preview_cmd->parsed()) return cmd_prompt_preview(preview_opts->resolve(), id, code_file);
        if (explain_cmd->parsed()) return cmd_similarity_explain(explain_opts->resolve(), id, code_file, top);
        if (validate_cmd->parsed()) return cmd_corpus_validate(validate_opts->resolve());
        if (split_cmd->parsed()) return cmd_corpus_split(split_opts->resolve());
        if (synth_cmd->parsed()) return cmd_corpus_synth(synth_opts->resolve());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(classify(e));
    }
    return static_cast<int>(ExitCode::usage);
}
