//*****************************************************************************
// Copyright 2026 The ALEX Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************
// alex: command-line driver for the labeling pipeline.
//
//   prepare -> balance -> train -> predict -> verify -> correct -> evaluate
//   plus viz, review serve, simulate and grid.
//
// Exit codes: 0 success, 1 usage, 2 data, 3 backend/client.

#include <cmath>
#include <csignal>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "alex/alex.hpp"

namespace fs = std::filesystem;
using namespace alex;

namespace {

/// JSON config files for CLI11. Top-level scalars and arrays apply to the
/// subcommand being run; an object keyed by the subcommand's name applies too.
/// Objects keyed by other subcommands are skipped so one file can hold a whole
/// experiment.
class JsonConfig final : public CLI::Config {
public:
    explicit JsonConfig(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override
    {
        json j;
        try {
            j = json::parse(input);
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object())
            throw CLI::ConversionError("config must be a JSON object");

        std::vector<std::string> path;
        const CLI::App* target = root_;
        while (!target->get_subcommands().empty()) {
            target = target->get_subcommands().front();
            path.push_back(target->get_name());
        }
        std::set<std::string> sections;
        collect_names(root_, sections);

        std::vector<CLI::ConfigItem> items;
        auto add = [&](const std::string& key, const json& value, bool shared) {
            if (target->get_option_no_throw("--" + key) == nullptr) {
                if (shared && known_anywhere(root_, key))
                    return;
                throw CLI::ConversionError("config key '" + key + "' is not an option of " +
                                           (path.empty() ? std::string("alex") : path.back()));
            }
            CLI::ConfigItem item;
            item.parents = path;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value)
                    item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            items.push_back(std::move(item));
        };
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                if (!sections.count(key))
                    throw CLI::ConversionError("config section '" + key + "' names no subcommand");
                if (!path.empty() && key == path.back())
                    for (const auto& [k, v] : value.items())
                        add(k, v, false);
                continue;
            }
            add(key, value, true);
        }
        return items;
    }

private:
    static std::string scalar(const json& v)
    {
        if (v.is_string())
            return v.get<std::string>();
        if (v.is_boolean())
            return v.get<bool>() ? "true" : "false";
        if (v.is_object() || v.is_array())
            throw CLI::ConversionError("config values must be scalars or arrays of scalars");
        return v.dump();
    }

    static bool known_anywhere(const CLI::App* app, const std::string& key)
    {
        if (app->get_option_no_throw("--" + key) != nullptr)
            return true;
        for (const auto* sub : app->get_subcommands([](const CLI::App*) { return true; }))
            if (known_anywhere(sub, key))
                return true;
        return false;
    }

    static void collect_names(const CLI::App* app, std::set<std::string>& out)
    {
        for (const auto* sub : app->get_subcommands([](const CLI::App*) { return true; })) {
            out.insert(sub->get_name());
            collect_names(sub, out);
        }
    }

    const CLI::App* root_;
};

ordered_json typed(const std::string& s)
{
    if (s == "true" || s == "false")
        return s == "true";
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size() && std::isfinite(v)) {
        if (s.find_first_of(".eE") == std::string::npos && s.size() < 19)
            return std::stoll(s);
        return v;
    }
    return s;
}

/// Effective option values of a subcommand, wherever they came from.
ordered_json effective_config(const CLI::App& app)
{
    ordered_json j = ordered_json::object();
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->get_lnames().empty())
            continue;
        const auto& name = opt->get_lnames().front();
        if (name == "help" || name == "manifest")
            continue;
        if (opt->get_expected_min() == 0) {
            j[name] = !opt->empty() && opt->as<bool>();
            continue;
        }
        const bool vector = opt->get_expected_max() > 1;
        if (!opt->empty()) {
            ordered_json values = ordered_json::array();
            for (const auto& r : opt->results())
                values.push_back(typed(r));
            j[name] = vector ? values : values.front();
        } else if (vector) {
            j[name] = ordered_json::array();
        } else if (!opt->get_default_str().empty()) {
            j[name] = typed(opt->get_default_str());
        }
    }
    return j;
}

/// Collects the run record for a stage and writes it when the stage succeeds.
class StageRecord {
public:
    StageRecord(const CLI::App& app, std::string stage) : manifest_(std::move(stage)), config_(effective_config(app)) {}

    /// Records a value derived from the options, such as a preset after overrides.
    void resolved(const std::string& key, ordered_json value) { config_[key] = std::move(value); }

    void input(const fs::path& p) { manifest_.add_input(p); }
    void output(const fs::path& p) { manifest_.add_output(p); }
    void seed(const std::string& name, std::uint64_t v) { manifest_.add_seed(name, v); }

    void write(const fs::path& path)
    {
        manifest_.set_config(config_);
        manifest_.write(path);
        std::cerr << "manifest: " << path.string() << "\n";
    }

private:
    Manifest manifest_;
    ordered_json config_;
};

fs::path sibling(const fs::path& p, const std::string& suffix)
{
    auto out = p;
    out += suffix;
    return out;
}

fs::path manifest_path(const std::string& flag, const fs::path& fallback)
{
    return flag.empty() ? fallback : fs::path(flag);
}

std::string fmt(double v, int precision = 4)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(precision);
    os << v;
    return os.str();
}

void print_histogram(const std::string& what, const std::map<int, std::size_t>& hist)
{
    std::cout << what << ":";
    for (const auto& [label, n] : hist)
        std::cout << " " << label << "=" << n;
    std::cout << "\n";
}

std::unordered_map<std::string, std::string> texts_of(const Dataset& d)
{
    std::unordered_map<std::string, std::string> out;
    for (const auto& ex : d.examples)
        out[ex.post.id] = ex.post.text;
    return out;
}

/// id -> label from a JSONL file. The label is read from `key` when given,
/// otherwise from the first of "final", "pred", "label" present on the line.
std::vector<std::pair<std::string, int>> load_labels(const fs::path& path, const std::string& key)
{
    std::vector<std::pair<std::string, int>> out;
    std::set<std::string> seen;
    for_each_jsonl<json>(path, [&](std::size_t line, const json& j) {
        const auto where = path.string() + " line " + std::to_string(line);
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
            throw Error(ErrorKind::MalformedRecord, where + ": missing string \"id\"");
        std::string field = key;
        if (field.empty())
            for (const char* k : {"final", "pred", "label"})
                if (j.contains(k)) {
                    field = k;
                    break;
                }
        if (field.empty() || !j.contains(field) || !j[field].is_number_integer())
            throw Error(ErrorKind::UnlabeledDataset, where + ": no integer label" + (key.empty() ? "" : " under \"" + key + "\""));
        const auto id = j["id"].get<std::string>();
        if (!seen.insert(id).second)
            throw Error(ErrorKind::DuplicateId, where + ": id '" + id + "' repeats");
        out.emplace_back(id, j[field].get<int>());
    });
    if (out.empty())
        throw Error(ErrorKind::EmptyDataset, path.string() + " has no records");
    return out;
}

std::unique_ptr<EncoderBackend> build_encoder(const std::string& id, std::size_t dim, std::uint64_t seed, bool bigrams)
{
    return make_encoder(id, json{{"dim", dim}, {"seed", seed}, {"bigrams", bigrams}});
}

std::vector<std::vector<double>> parse_matrix(const std::string& s)
{
    std::vector<std::vector<double>> rows;
    std::stringstream rs(s);
    std::string row;
    while (std::getline(rs, row, ';')) {
        std::vector<double> values;
        std::stringstream cs(row);
        std::string cell;
        while (std::getline(cs, cell, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos)
                    throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw Error(ErrorKind::ConfigError, "confusion entry '" + cell + "' is not a number");
            }
        }
        rows.push_back(std::move(values));
    }
    return rows;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
    std::string task, in, synthetic, out, out_dir, lexicon_out, manifest;
    std::vector<double> ratios;
    std::uint64_t seed = 7;
};

synthetic::CorpusSpec preset(const std::string& name)
{
    static const std::map<std::string, synthetic::CorpusSpec (*)()> presets = {
        {"keyword_train", synthetic::keyword_train},       {"keyword_test", synthetic::keyword_test},
        {"imbalanced_train", synthetic::imbalanced_train}, {"imbalanced_test", synthetic::imbalanced_test},
        {"correction_train", synthetic::correction_train}, {"correction_eval", synthetic::correction_eval},
    };
    return presets.at(name)();
}

int run_prepare(const CLI::App& app, const PrepareArgs& a)
{
    StageRecord rec(app, "prepare");
    Dataset data;
    if (!a.synthetic.empty()) {
        const auto task = a.task.empty() ? synthetic::binary_task() : load_task(a.task);
        if (!a.task.empty())
            rec.input(a.task);
        data = synthetic::generate(preset(a.synthetic), task);
    } else {
        if (a.task.empty())
            throw Error(ErrorKind::ConfigError, "--task is required with --in");
        const auto task = load_task(a.task);
        rec.input(a.task);
        data = load_dataset(a.in, task);
        rec.input(a.in);
    }
    rec.seed("split", a.seed);
    print_histogram("classes", class_histogram(data));
    if (!a.lexicon_out.empty()) {
        write_file(a.lexicon_out, synthetic::lexicon_to_jsonl(synthetic::lexicon()));
        rec.output(a.lexicon_out);
        std::cout << "wrote synonym lexicon to " << a.lexicon_out << "\n";
    }

    if (!a.out.empty()) {
        if (!a.ratios.empty())
            throw Error(ErrorKind::ConfigError, "--ratios needs --out-dir");
        save_dataset(data, a.out);
        rec.output(a.out);
        std::cout << "wrote " << data.size() << " examples to " << a.out << "\n";
        rec.write(manifest_path(a.manifest, sibling(a.out, ".manifest.json")));
        return 0;
    }
    const auto ratios = a.ratios.empty() ? std::vector<double>{0.8, 0.1, 0.1} : a.ratios;
    auto parts = stratified_split(data, ratios, a.seed);
    std::vector<std::pair<std::string, Split>> names;
    if (parts.size() == 2)
        names = {{"train", Split::train}, {"test", Split::test}};
    else if (parts.size() == 3)
        names = {{"train", Split::train}, {"validation", Split::validation}, {"test", Split::test}};
    else
        for (std::size_t i = 0; i < parts.size(); ++i)
            names.emplace_back("part" + std::to_string(i + 1), Split::unsplit);
    fs::create_directories(a.out_dir);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        parts[i].split = names[i].second;
        const auto path = fs::path(a.out_dir) / (names[i].first + ".jsonl");
        save_dataset(parts[i], path);
        rec.output(path);
        std::cout << "wrote " << parts[i].size() << " examples to " << path.string() << "\n";
    }
    rec.write(manifest_path(a.manifest, fs::path(a.out_dir) / "prepare.manifest.json"));
    return 0;
}

// ---------------------------------------------------------------------------

struct BalanceArgs {
    std::string task, in, out, target = "max", lexicon, manifest;
    std::vector<std::string> ops;
    std::uint64_t seed = 7;
    double per_op_prob = 0.1;
    std::size_t transforms = 4;
    bool no_augment = false, no_duplicate = false, force = false;
};

int run_balance(const CLI::App& app, const BalanceArgs& a)
{
    StageRecord rec(app, "balance");
    const auto task = load_task(a.task);
    rec.input(a.task);
    const auto data = load_dataset(a.in, task);
    rec.input(a.in);

    BalanceConfig cfg;
    if (a.target == "max")
        cfg.target = BalanceTarget::max_class();
    else if (a.target == "min")
        cfg.target = BalanceTarget::min_class();
    else {
        try {
            std::size_t used = 0;
            const long long n = std::stoll(a.target, &used);
            if (used != a.target.size() || n < 1)
                throw std::invalid_argument(a.target);
            cfg.target = BalanceTarget::fixed(static_cast<std::size_t>(n));
        } catch (const std::exception&) {
            throw Error(ErrorKind::ConfigError, "--target must be max, min or a positive count, got '" + a.target + "'");
        }
    }
    cfg.seed = a.seed;
    cfg.augment = !a.no_augment;
    cfg.allow_duplication = !a.no_duplicate;
    cfg.force = a.force;
    cfg.augmentation.seed = a.seed;
    cfg.augmentation.per_op_prob = a.per_op_prob;
    cfg.augmentation.transforms_per_example = a.transforms;
    if (!a.lexicon.empty()) {
        cfg.augmentation.lexicon = load_lexicon(a.lexicon);
        rec.input(a.lexicon);
    }
    if (!a.ops.empty()) {
        static const std::map<std::string, AugmentOp> names = {{"synonym", AugmentOp::synonym_replace},
                                                               {"swap", AugmentOp::random_swap},
                                                               {"delete", AugmentOp::random_delete},
                                                               {"insert", AugmentOp::random_insert}};
        cfg.augmentation.ops.clear();
        for (const auto& op : a.ops)
            cfg.augmentation.ops.insert(names.at(op));
    } else if (cfg.augmentation.lexicon.empty()) {
        cfg.augmentation.ops = {AugmentOp::random_swap, AugmentOp::random_delete};
    }
    rec.seed("balance", a.seed);

    BalanceSummary summary;
    const auto out = balance(data, cfg, &summary);
    save_dataset(out, a.out);
    rec.output(a.out);
    print_histogram("before", summary.before);
    print_histogram("after", summary.after);
    if (!summary.augmented.empty())
        print_histogram("augmented", summary.augmented);
    if (!summary.duplicated.empty())
        print_histogram("duplicated", summary.duplicated);
    if (!summary.undersampled.empty())
        print_histogram("undersampled", summary.undersampled);
    std::cout << "wrote " << out.size() << " examples to " << a.out << "\n";
    rec.write(manifest_path(a.manifest, sibling(a.out, ".manifest.json")));
    return 0;
}

// ---------------------------------------------------------------------------

struct EncoderArgs {
    std::string encoder{HashingEncoder::kIdentifier};
    std::size_t dim = 1024;
    std::uint64_t encoder_seed = 0;
    bool bigrams = false;
};

void add_encoder_options(CLI::App* sub, EncoderArgs& e)
{
    sub->add_option("--encoder", e.encoder, "Encoder backend identifier");
    sub->add_option("--dim", e.dim, "Encoder dimension")->check(CLI::PositiveNumber);
    sub->add_option("--encoder-seed", e.encoder_seed, "Encoder hashing seed");
    sub->add_flag("--bigrams", e.bigrams, "Also hash adjacent word pairs");
}

struct TrainArgs {
    std::string task, train, valid, out, preset = "baseline", manifest;
    EncoderArgs enc;
    std::optional<double> lambda, lr, weight_decay;
    std::optional<std::size_t> batch_size, epochs, warmup;
    std::optional<std::uint64_t> seed;
    bool multiclass_weighting = false;
};

TrainConfig preset_config(const std::string& name)
{
    if (name == "baseline")
        return TrainConfig::baseline();
    if (name == "task4")
        return TrainConfig::task4();
    return TrainConfig::reference();
}

/// Preset values overridden by every hyperparameter flag that was given.
TrainConfig train_config(const CLI::App& app, const TrainArgs& a)
{
    auto c = preset_config(a.preset);
    c.lambda_weight = a.lambda.value_or(c.lambda_weight);
    c.learning_rate = a.lr.value_or(c.learning_rate);
    c.weight_decay = a.weight_decay.value_or(c.weight_decay);
    c.batch_size = a.batch_size.value_or(c.batch_size);
    c.epochs = a.epochs.value_or(c.epochs);
    c.warmup_steps = a.warmup.value_or(c.warmup_steps);
    c.seed = a.seed.value_or(c.seed);
    if (!app.get_option("--multiclass-weighting")->empty())
        c.multiclass_weighting = a.multiclass_weighting;
    c.validate();
    return c;
}

void add_train_options(CLI::App* sub, TrainArgs& a)
{
    sub->add_option("--preset", a.preset, "Hyperparameter preset")
        ->check(CLI::IsMember({"baseline", "task4", "reference"}));
    sub->add_option("--lambda", a.lambda, "Weight on the report label's loss term");
    sub->add_option("--lr", a.lr, "Learning rate");
    sub->add_option("--weight-decay", a.weight_decay, "Decoupled weight decay");
    sub->add_option("--batch-size", a.batch_size, "Mini-batch size");
    sub->add_option("--epochs", a.epochs, "Training epochs");
    sub->add_option("--warmup", a.warmup, "Linear warm-up steps");
    sub->add_option("--seed", a.seed, "Training seed");
    sub->add_flag("--multiclass-weighting", a.multiclass_weighting, "Apply lambda in multi-class tasks too");
    add_encoder_options(sub, a.enc);
}

int run_train(const CLI::App& app, const TrainArgs& a)
{
    StageRecord rec(app, "train");
    const auto task = load_task(a.task);
    rec.input(a.task);
    auto train = load_dataset(a.train, task);
    rec.input(a.train);
    const auto config = train_config(app, a);
    rec.resolved("train_config", to_json(config));
    rec.seed("train", config.seed);
    rec.seed("encoder", a.enc.encoder_seed);
    std::shared_ptr<const EncoderBackend> encoder = build_encoder(a.enc.encoder, a.enc.dim, a.enc.encoder_seed, a.enc.bigrams);

    const auto result = fit(*encoder, train, config, [&](std::size_t epoch, double loss) {
        std::cout << "epoch " << epoch << "/" << config.epochs << " loss " << fmt(loss, 6) << "\n";
    });
    const Model model{encoder, result.head, task, config};
    save_checkpoint(model, a.out);
    rec.output(a.out);
    std::cout << "saved model to " << a.out << "\n";

    if (!a.valid.empty()) {
        const auto valid = load_dataset(a.valid, task);
        rec.input(a.valid);
        const auto gold = detail::gold_labels(valid);
        std::vector<int> pred;
        for (const auto& p : predict_dataset(model, valid))
            pred.push_back(p.pred);
        const auto report = evaluate(gold, pred, task);
        const auto [name, value] = headline(report, task);
        std::cout << "validation " << name << " = " << fmt(value) << "\n";
    }
    rec.write(manifest_path(a.manifest, sibling(a.out, ".manifest.json")));
    return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string model, data, out, manifest;
};

int run_predict(const CLI::App& app, const PredictArgs& a)
{
    StageRecord rec(app, "predict");
    const auto model = load_checkpoint(a.model);
    rec.input(a.model);
    const auto data = load_dataset(a.data, model.task);
    rec.input(a.data);
    const auto preds = predict_dataset(model, data);
    write_file(a.out, predictions_to_jsonl(preds));
    rec.output(a.out);
    std::map<int, std::size_t> hist;
    for (const auto& p : preds)
        ++hist[p.pred];
    print_histogram("predicted", hist);
    std::cout << "wrote " << preds.size() << " predictions to " << a.out << "\n";
    rec.write(manifest_path(a.manifest, sibling(a.out, ".manifest.json")));
    return 0;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::string task, data, pred, tmpl, out, client = "oracle", keywords, cache, llm_model = "gpt-3.5-turbo",
                                                 endpoint = "https://api.openai.com", manifest;
    double oracle_accuracy = 1.0;
    std::size_t max_parallel = 4;
    int retries = 3;
    int backoff_ms = 0;
    std::uint64_t seed = 0;
    bool live = false;
};

int run_verify(const CLI::App& app, const VerifyArgs& a)
{
    StageRecord rec(app, "verify");
    const auto task = load_task(a.task);
    rec.input(a.task);
    const auto data = load_dataset(a.data, task);
    rec.input(a.data);
    const auto preds = load_predictions(a.pred);
    rec.input(a.pred);
    const auto tpl = load_template(a.tmpl);
    rec.input(a.tmpl);

    std::unique_ptr<LLMClient> client;
    if (a.live) {
        ChatClientConfig cc;
        cc.model = a.llm_model;
        cc.endpoint = a.endpoint;
        client = std::make_unique<ChatCompletionsClient>(cc);
    } else if (a.client == "keyword") {
        if (a.keywords.empty())
            throw Error(ErrorKind::ConfigError, "--client keyword needs --keywords");
        std::map<int, std::vector<std::string>> kw;
        for (const auto& [label, words] : read_json_file(a.keywords).items())
            kw[std::stoi(label)] = words.get<std::vector<std::string>>();
        rec.input(a.keywords);
        client = std::make_unique<KeywordMockClient>(std::move(kw));
    } else {
        std::unordered_map<std::string, int> gold;
        for (const auto& ex : data.examples) {
            if (!ex.label)
                throw Error(ErrorKind::UnlabeledDataset, "the oracle mock needs gold labels; '" + ex.post.id + "' has none");
            gold[ex.post.id] = *ex.label;
        }
        client = std::make_unique<OracleMockClient>(std::move(gold), a.oracle_accuracy, a.seed);
        rec.seed("oracle", a.seed);
    }

    const auto texts = texts_of(data);
    std::vector<VerifierRequest> requests;
    for (const auto& p : preds) {
        if (!task.contains(p.pred))
            throw Error(ErrorKind::UnknownLabel, "prediction '" + p.id + "' has label " + std::to_string(p.pred));
        if (!task.in_scope(p.pred))
            continue;
        auto it = texts.find(p.id);
        if (it == texts.end())
            throw Error(ErrorKind::IdMismatch, "no text for prediction '" + p.id + "' in " + a.data);
        requests.push_back(make_request(tpl, task, p.id, it->second, p.pred));
    }

    std::optional<VerdictCache> cache;
    if (!a.cache.empty())
        cache.emplace(a.cache);
    RetryPolicy retry;
    retry.max_attempts = a.retries;
    retry.initial_backoff = std::chrono::milliseconds(a.backoff_ms);
    const auto verdicts = verify_batch(requests, *client, a.max_parallel, retry, cache ? &*cache : nullptr);
    write_file(a.out, verdicts_to_jsonl(verdicts));
    rec.output(a.out);

    std::map<std::string, std::size_t> tally;
    for (const auto& v : verdicts)
        ++tally[std::string(to_string(v.supported))];
    std::cout << "client " << client->identifier() << ": " << requests.size() << " of " << preds.size()
              << " predictions in scope\n";
    for (const auto& [k, n] : tally)
        std::cout << "  " << k << " " << n << "\n";
    std::cout << "wrote verdicts to " << a.out << "\n";
    rec.write(manifest_path(a.manifest, sibling(a.out, ".manifest.json")));
    return 0;
}

// ---------------------------------------------------------------------------

struct CorrectArgs {
    std::string task, pred, verdicts, data, out, fallback = "auto", queue_out, reviewed, manifest;
    std::size_t review_warn = 200;
};

int run_correct(const CLI::App& app, const CorrectArgs& a)
{
    StageRecord rec(app, "correct");
    const auto task = load_task(a.task);
    rec.input(a.task);
    const auto preds = load_predictions(a.pred);
    rec.input(a.pred);
    const CorrectionPolicy policy{task, fallback_from_string(a.fallback)};

    std::vector<FinalLabel> finals;
    if (!a.reviewed.empty()) {
        rec.input(a.reviewed);
        auto queue = load_review_queue(a.reviewed);
        const auto log = default_decisions_log(a.reviewed);
        if (fs::exists(log)) {
            rec.input(log);
            ReviewSession session(task, std::move(queue), preds, log);
            finals = session.merged(policy.pending_fallback);
        } else {
            finals = merge_decisions(preds, queue, policy);
        }
    } else {
        if (a.verdicts.empty())
            throw Error(ErrorKind::ConfigError, "--verdicts is required unless --reviewed is given");
        const auto verdicts = load_verdicts(a.verdicts);
        rec.input(a.verdicts);
        std::unordered_map<std::string, std::string> texts;
        if (!a.data.empty()) {
            texts = texts_of(load_dataset(a.data, task));
            rec.input(a.data);
        } else {
            for (const auto& p : preds)
                texts[p.id];
        }
        const auto queue = build_review_queue(preds, verdicts, texts, task);
        if (!a.queue_out.empty()) {
            write_file(a.queue_out, review_queue_to_jsonl(queue));
            rec.output(a.queue_out);
            std::cout << "wrote " << queue.size() << " review items to " << a.queue_out << "\n";
        }
        if (queue.size() > a.review_warn)
            std::cerr << "warning: " << queue.size() << " items flagged for review (more than " << a.review_warn
                      << "); automatic correction (--fallback auto) may be more practical\n";
        finals = merge_decisions(preds, queue, policy);
    }

    write_file(a.out, final_labels_to_jsonl(finals));
    rec.output(a.out);
    std::map<std::string, std::size_t> tally;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < finals.size(); ++i) {
        ++tally[std::string(to_string(finals[i].provenance))];
        changed += finals[i].final_label != preds[i].pred;
    }
    for (const auto& [k, n] : tally)
        std::cout << k << " " << n << "\n";
    std::cout << "changed " << changed << " of " << finals.size() << " labels; wrote " << a.out << "\n";
    rec.write(manifest_path(a.manifest, sibling(a.out, ".manifest.json")));
    return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string task, gold, gold_key, pred_key, json_out, manifest;
    std::vector<std::string> preds, names;
};

int run_evaluate(const CLI::App& app, const EvaluateArgs& a)
{
    StageRecord rec(app, "evaluate");
    const auto task = load_task(a.task);
    rec.input(a.task);
    const auto gold_rows = load_labels(a.gold, a.gold_key.empty() ? std::string("label") : a.gold_key);
    rec.input(a.gold);
    if (!a.names.empty() && a.names.size() != a.preds.size())
        throw Error(ErrorKind::ConfigError, "--name must be given once per --pred");

    std::vector<int> gold;
    for (const auto& [_, label] : gold_rows)
        gold.push_back(label);

    std::vector<std::pair<std::string, EvalReport>> rows;
    ordered_json reports = ordered_json::object();
    for (std::size_t i = 0; i < a.preds.size(); ++i) {
        const auto pred_rows = load_labels(a.preds[i], a.pred_key);
        rec.input(a.preds[i]);
        std::unordered_map<std::string, int> by_id(pred_rows.begin(), pred_rows.end());
        if (by_id.size() != gold_rows.size())
            throw Error(ErrorKind::IdMismatch, a.preds[i] + " has " + std::to_string(by_id.size()) + " records, " + a.gold +
                                                   " has " + std::to_string(gold_rows.size()));
        std::vector<int> pred;
        for (const auto& [id, _] : gold_rows) {
            auto it = by_id.find(id);
            if (it == by_id.end())
                throw Error(ErrorKind::IdMismatch, "'" + id + "' is missing from " + a.preds[i]);
            pred.push_back(it->second);
        }
        const auto name = a.names.empty() ? fs::path(a.preds[i]).stem().string() : a.names[i];
        auto report = evaluate(gold, pred, task);
        const auto [metric, value] = headline(report, task);
        if (a.preds.size() == 1)
            std::cout << metric << " = " << fmt(value) << "\n";
        else
            std::cout << name << ": " << metric << " = " << fmt(value) << "\n";
        reports[name] = to_json(report);
        rows.emplace_back(name, std::move(report));
    }
    std::cout << "\n" << render_table(rows, task);
    for (const auto& [name, report] : rows)
        std::cout << "\n" << name << "\n" << render_per_label(report, task);

    fs::path manifest = "alex-evaluate.manifest.json";
    if (!a.json_out.empty()) {
        write_file(a.json_out, (a.preds.size() == 1 ? reports.begin().value() : reports).dump(2) + "\n");
        rec.output(a.json_out);
        manifest = sibling(a.json_out, ".manifest.json");
    }
    rec.write(manifest_path(a.manifest, manifest));
    return 0;
}

// ---------------------------------------------------------------------------

struct VizArgs {
    std::string model, data, out, color = "auto", title, manifest;
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    std::uint64_t seed = 7;
};

int run_viz(const CLI::App& app, const VizArgs& a)
{
    StageRecord rec(app, "viz");
    const auto model = load_checkpoint(a.model);
    rec.input(a.model);
    const auto data = load_dataset(a.data, model.task);
    rec.input(a.data);
    rec.seed("tsne", a.seed);

    std::vector<std::vector<double>> x;
    std::vector<std::string> ids;
    for (const auto& ex : data.examples) {
        x.push_back(encode(*model.encoder, ex.post.text).values);
        ids.push_back(ex.post.id);
    }
    ProjectionConfig cfg;
    cfg.perplexity = a.perplexity;
    cfg.iterations = a.iterations;
    cfg.seed = a.seed;
    const auto result = tsne(x, cfg);

    std::optional<std::vector<int>> labels;
    const bool labeled = std::all_of(data.examples.begin(), data.examples.end(), [](const auto& ex) { return ex.label.has_value(); });
    const std::string color = a.color == "auto" ? (labeled ? "gold" : "pred") : a.color;
    if (color == "gold") {
        labels = detail::gold_labels(data);
    } else if (color == "pred") {
        labels.emplace();
        for (const auto& p : predict_dataset(model, data))
            labels->push_back(p.pred);
    }
    std::map<int, std::string> names;
    for (const auto& l : model.task.labels)
        names[l.id] = l.name;

    fs::create_directories(a.out);
    const auto files = export_scatter(result.coords, labels, fs::path(a.out) / "tsne", ids, names,
                                      a.title.empty() ? model.task.task_id : a.title);
    rec.output(files.json);
    rec.output(files.svg);
    std::cout << "perplexity " << fmt(result.perplexity_used, 2) << ", KL " << fmt(result.kl_initial) << " -> "
              << fmt(result.kl_final) << "\nwrote " << files.json.string() << " and " << files.svg.string() << "\n";
    rec.write(manifest_path(a.manifest, fs::path(a.out) / "tsne.manifest.json"));
    return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
    std::string task, queue, pred, host = "127.0.0.1", ui, log, manifest;
    int port = 8808;
};

int run_serve(const CLI::App& app, const ServeArgs& a)
{
    StageRecord rec(app, "review-serve");
    rec.input(a.task);
    rec.input(a.queue);
    rec.input(a.pred);

    // Block the stop signals before any server thread exists so only the waiter sees them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    auto session = ReviewSession::open(a.task, a.queue, a.pred, a.log.empty() ? std::nullopt : std::optional<fs::path>(a.log));
    std::optional<fs::path> ui;
    if (!a.ui.empty()) {
        if (!fs::is_directory(a.ui))
            throw Error(ErrorKind::IoError, "--ui directory " + a.ui + " does not exist");
        ui = a.ui;
    }
    ReviewService service(session, ui);
    rec.write(manifest_path(a.manifest, sibling(a.queue, ".serve.manifest.json")));

    std::jthread waiter([&] {
        int sig = 0;
        sigwait(&stop_signals, &sig);
        service.stop();
    });
    const auto p = session.progress();
    std::cout << "review session " << session.session_id() << ": " << p.pending << " of " << p.total
              << " items pending\nlistening on http://" << a.host << ":" << a.port << std::endl;
    const bool ok = service.listen(a.host, a.port);
    if (!ok) {
        pthread_kill(waiter.native_handle(), SIGTERM);
        throw Error(ErrorKind::IoError, "cannot listen on " + a.host + ":" + std::to_string(a.port));
    }
    std::cout << "stopped; " << session.progress().decided << " decisions recorded" << std::endl;
    return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string task, confusion, base_report, report, json_out, manifest;
    std::vector<double> priors;
    double p_true_correct = 0.9, p_false_incorrect = 0.7;
    std::size_t mc = 100000;
    std::uint64_t seed = 7;
};

int run_simulate(const CLI::App& app, const SimulateArgs& a)
{
    StageRecord rec(app, "simulate");
    const auto task = load_task(a.task);
    rec.input(a.task);
    rec.seed("monte_carlo", a.seed);

    std::vector<double> priors = a.priors;
    std::vector<std::vector<double>> rows;
    if (!a.base_report.empty()) {
        if (!a.confusion.empty() || !a.priors.empty())
            throw Error(ErrorKind::ConfigError, "--base-report replaces --priors and --confusion");
        auto j = read_json_file(a.base_report);
        rec.input(a.base_report);
        if (!j.contains("confusion")) {
            if (!a.report.empty()) {
                if (!j.contains(a.report))
                    throw Error(ErrorKind::ConfigError, a.base_report + " has no report named '" + a.report + "'");
                j = j[a.report];
            } else if (j.is_object() && j.size() == 1) {
                j = j.begin().value();
            } else {
                throw Error(ErrorKind::ConfigError, a.base_report + " holds several reports; pick one with --report");
            }
        }
        const auto counts = j.at("confusion").get<std::vector<std::vector<double>>>();
        double total = 0.0;
        for (const auto& r : counts)
            for (double v : r)
                total += v;
        priors.clear();
        for (const auto& r : counts) {
            double row = 0.0;
            for (double v : r)
                row += v;
            if (row <= 0.0)
                throw Error(ErrorKind::InvalidDistribution, "a gold class has no examples in " + a.base_report);
            priors.push_back(row / total);
            std::vector<double> norm;
            for (double v : r)
                norm.push_back(v / row);
            rows.push_back(std::move(norm));
        }
    } else {
        if (a.confusion.empty() || a.priors.empty())
            throw Error(ErrorKind::ConfigError, "give --priors and --confusion, or --base-report");
        rows = parse_matrix(a.confusion);
    }

    const CorrectionPolicy policy{task, PendingFallback::automatic};
    const auto r = simulate_correction(priors, rows, {a.p_true_correct, a.p_false_incorrect}, policy, a.mc, a.seed);
    std::vector<std::pair<std::string, ExpectedEvalReport>> table = {{"base", r.base}, {"corrected", r.expected}};
    std::cout << render_table(table, task);
    const auto [metric, base_value] = headline(r.base, task);
    const double expected_value = headline(r.expected, task).second;
    std::cout << "\n" << metric << ": base " << fmt(base_value) << ", expected after correction " << fmt(expected_value)
              << " (" << (expected_value >= base_value ? "+" : "") << fmt(expected_value - base_value) << ")\n";
    ordered_json out = {{"base", to_json(r.base)}, {"expected", to_json(r.expected)}};
    if (r.empirical) {
        const double mc_value = headline(*r.empirical, task).second;
        const double se = task.size() == 2 ? r.f1_standard_error.at(task.report_label) : r.accuracy_standard_error;
        std::cout << "Monte Carlo (n=" << a.mc << "): " << fmt(mc_value) << ", standard error " << fmt(se, 5)
                  << ", |difference| = " << fmt(std::abs(mc_value - expected_value) / (se > 0 ? se : 1.0), 2) << " SE\n";
        out["empirical"] = to_json(*r.empirical);
        ordered_json se_json = ordered_json::object();
        for (const auto& [label, v] : r.f1_standard_error)
            se_json[std::to_string(label)] = v;
        out["f1_standard_error"] = se_json;
        out["accuracy_standard_error"] = r.accuracy_standard_error;
    }
    fs::path manifest = "alex-simulate.manifest.json";
    if (!a.json_out.empty()) {
        write_file(a.json_out, out.dump(2) + "\n");
        rec.output(a.json_out);
        manifest = sibling(a.json_out, ".manifest.json");
    }
    rec.write(manifest_path(a.manifest, manifest));
    return 0;
}

// ---------------------------------------------------------------------------

struct GridArgs {
    std::string task, train, valid, out, manifest;
    EncoderArgs enc;
    GridSpace space;
    double lambda = 0.1;
    std::uint64_t seed = 42;
    std::size_t show = 5;
};

int run_grid(const CLI::App& app, const GridArgs& a)
{
    StageRecord rec(app, "grid");
    const auto task = load_task(a.task);
    rec.input(a.task);
    const auto train = load_dataset(a.train, task);
    rec.input(a.train);
    const auto valid = load_dataset(a.valid, task);
    rec.input(a.valid);
    rec.seed("train", a.seed);

    auto base = TrainConfig::baseline();
    base.lambda_weight = a.lambda;
    base.seed = a.seed;
    const auto encoder = build_encoder(a.enc.encoder, a.enc.dim, a.enc.encoder_seed, a.enc.bigrams);
    std::cout << "training " << a.space.cells() << " grid cells\n";
    const auto cells = alex::run_grid(*encoder, train, valid, a.space, base);
    write_file(a.out, grid_to_csv(cells));
    rec.output(a.out);
    const auto csv = grid_to_csv(std::vector<GridCell>(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(std::min(a.show, cells.size()))));
    std::cout << csv << "wrote " << cells.size() << " rows to " << a.out << "\n";
    rec.write(manifest_path(a.manifest, sibling(a.out, ".manifest.json")));
    return 0;
}

int exit_for_parse_error(CLI::App& app, const CLI::ParseError& e)
{
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ALEX: balanced training, LLM verdicts and label correction for imbalanced text classification", "alex"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "JSON file of option values; command-line flags take precedence");
    app.config_formatter(std::make_shared<JsonConfig>(&app));

    auto manifest_opt = [](CLI::App* sub, std::string& target) {
        sub->add_option("--manifest", target, "Where to write the run manifest");
    };

    PrepareArgs prep;
    auto* prepare = app.add_subcommand("prepare", "Load or generate a corpus and write JSONL, optionally split");
    prepare->add_option("--task", prep.task, "Task spec JSON")->check(CLI::ExistingFile);
    auto* prep_in = prepare->add_option("--in", prep.in, "Input corpus (.jsonl, .csv, .tsv)")->check(CLI::ExistingFile);
    auto* prep_syn = prepare->add_option("--synthetic", prep.synthetic, "Generate a bundled synthetic corpus")
                         ->check(CLI::IsMember({"keyword_train", "keyword_test", "imbalanced_train", "imbalanced_test",
                                                "correction_train", "correction_eval"}));
    prep_in->excludes(prep_syn);
    auto* prep_out = prepare->add_option("--out", prep.out, "Write a single JSONL file");
    auto* prep_dir = prepare->add_option("--out-dir", prep.out_dir, "Write stratified split files here");
    prep_out->excludes(prep_dir);
    prepare->add_option("--ratios", prep.ratios, "Split ratios, e.g. 0.8,0.1,0.1")->delimiter(',');
    prepare->add_option("--seed", prep.seed, "Split seed");
    prepare->add_option("--lexicon-out", prep.lexicon_out, "Also write the bundled synonym lexicon")->needs(prep_syn);
    manifest_opt(prepare, prep.manifest);

    BalanceArgs bal;
    auto* balance_cmd = app.add_subcommand("balance", "Equalise class counts by augmentation and resampling");
    balance_cmd->add_option("--task", bal.task, "Task spec JSON")->required()->check(CLI::ExistingFile);
    balance_cmd->add_option("--in", bal.in, "Training JSONL")->required()->check(CLI::ExistingFile);
    balance_cmd->add_option("--out", bal.out, "Balanced JSONL")->required();
    balance_cmd->add_option("--target", bal.target, "max, min or a per-class count");
    balance_cmd->add_option("--seed", bal.seed, "Sampling and augmentation seed");
    balance_cmd->add_option("--lexicon", bal.lexicon, "Synonym lexicon JSONL")->check(CLI::ExistingFile);
    balance_cmd->add_option("--ops", bal.ops, "Augmentation ops: synonym, swap, delete, insert")
        ->delimiter(',')
        ->check(CLI::IsMember({"synonym", "swap", "delete", "insert"}));
    balance_cmd->add_option("--per-op-prob", bal.per_op_prob, "Fraction of tokens an op may touch");
    balance_cmd->add_option("--transforms", bal.transforms, "Variants generated per source example");
    balance_cmd->add_flag("--no-augment", bal.no_augment, "Fill minority classes by duplication only");
    balance_cmd->add_flag("--no-duplicate", bal.no_duplicate, "Fail rather than duplicate when augmentation runs dry");
    balance_cmd->add_flag("--force", bal.force, "Allow balancing a validation or test split");
    manifest_opt(balance_cmd, bal.manifest);

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train a classifier head on a frozen encoder");
    train->add_option("--task", tr.task, "Task spec JSON")->required()->check(CLI::ExistingFile);
    train->add_option("--train", tr.train, "Training JSONL")->required()->check(CLI::ExistingFile);
    train->add_option("--valid", tr.valid, "Validation JSONL, scored after training")->check(CLI::ExistingFile);
    train->add_option("--out", tr.out, "Checkpoint path")->required();
    add_train_options(train, tr);
    manifest_opt(train, tr.manifest);

    PredictArgs pr;
    auto* predict_cmd = app.add_subcommand("predict", "Label a corpus with a trained checkpoint");
    predict_cmd->add_option("--model", pr.model, "Checkpoint")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--data", pr.data, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--out", pr.out, "Predictions JSONL")->required();
    manifest_opt(predict_cmd, pr.manifest);

    VerifyArgs ve;
    auto* verify = app.add_subcommand("verify", "Ask a verifier whether each in-scope prediction is supported");
    verify->add_option("--task", ve.task, "Task spec JSON")->required()->check(CLI::ExistingFile);
    verify->add_option("--data", ve.data, "Corpus JSONL with the post texts")->required()->check(CLI::ExistingFile);
    verify->add_option("--pred", ve.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    verify->add_option("--template", ve.tmpl, "Prompt template")->required()->check(CLI::ExistingFile);
    verify->add_option("--out", ve.out, "Verdicts JSONL")->required();
    verify->add_option("--client", ve.client, "Offline verifier: oracle (uses gold labels) or keyword")
        ->check(CLI::IsMember({"oracle", "keyword"}));
    verify->add_option("--keywords", ve.keywords, "JSON map label -> cue words for the keyword verifier")
        ->check(CLI::ExistingFile);
    verify->add_option("--oracle-accuracy", ve.oracle_accuracy, "Probability the oracle answers correctly")
        ->check(CLI::Range(0.0, 1.0));
    verify->add_flag("--live", ve.live, std::string("Call a chat-completions endpoint (key from ") + kApiKeyEnv + ")");
    verify->add_option("--llm-model", ve.llm_model, "Model name for --live");
    verify->add_option("--endpoint", ve.endpoint, "Endpoint base URL for --live");
    verify->add_option("--max-parallel", ve.max_parallel, "Concurrent verifier calls")->check(CLI::PositiveNumber);
    verify->add_option("--retries", ve.retries, "Attempts per example")->check(CLI::PositiveNumber);
    verify->add_option("--backoff-ms", ve.backoff_ms, "Initial retry back-off")->check(CLI::NonNegativeNumber);
    verify->add_option("--cache", ve.cache, "Response cache JSONL");
    verify->add_option("--seed", ve.seed, "Oracle verifier seed");
    manifest_opt(verify, ve.manifest);

    CorrectArgs co;
    auto* correct = app.add_subcommand("correct", "Apply the correction policy and human review decisions");
    correct->add_option("--task", co.task, "Task spec JSON")->required()->check(CLI::ExistingFile);
    correct->add_option("--pred", co.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    auto* co_verdicts = correct->add_option("--verdicts", co.verdicts, "Verdicts JSONL")->check(CLI::ExistingFile);
    correct->add_option("--data", co.data, "Corpus JSONL (texts for the review queue)")->check(CLI::ExistingFile);
    correct->add_option("--out", co.out, "Final labels JSONL")->required();
    correct->add_option("--fallback", co.fallback, "Pending review items: auto-correct or fail")
        ->check(CLI::IsMember({"auto", "strict"}));
    auto* co_queue = correct->add_option("--queue-out", co.queue_out, "Write the review queue here");
    auto* co_reviewed = correct->add_option("--reviewed", co.reviewed, "Reviewed queue (its decisions log is replayed)")
                            ->check(CLI::ExistingFile);
    co_reviewed->excludes(co_verdicts)->excludes(co_queue);
    correct->add_option("--review-warn", co.review_warn, "Warn when more items than this need review");
    manifest_opt(correct, co.manifest);

    EvaluateArgs ev;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions or final labels against gold");
    evaluate_cmd->add_option("--task", ev.task, "Task spec JSON")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--gold", ev.gold, "Gold JSONL")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--pred", ev.preds, "Predictions, final labels or labeled corpus; repeat to compare")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--name", ev.names, "Row name per --pred");
    evaluate_cmd->add_option("--gold-key", ev.gold_key, "Field holding the gold label (default label)");
    evaluate_cmd->add_option("--pred-key", ev.pred_key, "Field holding the predicted label (default: final, pred, label)");
    evaluate_cmd->add_option("--json", ev.json_out, "Write the full report as JSON");
    manifest_opt(evaluate_cmd, ev.manifest);

    VizArgs vz;
    auto* viz = app.add_subcommand("viz", "t-SNE scatter of encoder embeddings");
    viz->add_option("--model", vz.model, "Checkpoint")->required()->check(CLI::ExistingFile);
    viz->add_option("--data", vz.data, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    viz->add_option("--out", vz.out, "Output directory")->required();
    viz->add_option("--perplexity", vz.perplexity, "t-SNE perplexity")->check(CLI::Range(1.0, 1e6));
    viz->add_option("--iterations", vz.iterations, "Gradient steps");
    viz->add_option("--seed", vz.seed, "Layout seed");
    viz->add_option("--color", vz.color, "Colour points by gold or predicted label")
        ->check(CLI::IsMember({"auto", "gold", "pred", "none"}));
    viz->add_option("--title", vz.title, "Plot title");
    manifest_opt(viz, vz.manifest);

    ServeArgs sv;
    auto* review = app.add_subcommand("review", "Manual review of flagged predictions");
    review->require_subcommand(1);
    auto* serve = review->add_subcommand("serve", "Serve the review API (and UI, if given) over HTTP");
    serve->add_option("--task", sv.task, "Task spec JSON")->required()->check(CLI::ExistingFile);
    serve->add_option("--queue", sv.queue, "Review queue JSONL from `correct --queue-out`")->required()->check(CLI::ExistingFile);
    serve->add_option("--pred", sv.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    serve->add_option("--host", sv.host, "Bind address");
    serve->add_option("--port", sv.port, "Port")->check(CLI::Range(0, 65535));
    serve->add_option("--ui", sv.ui, "Static review UI directory");
    serve->add_option("--log", sv.log, "Decisions log (default: <queue>.decisions.jsonl)");
    manifest_opt(serve, sv.manifest);

    SimulateArgs si;
    auto* simulate = app.add_subcommand("simulate", "Expected effect of correction under a verifier profile");
    simulate->add_option("--task", si.task, "Task spec JSON")->required()->check(CLI::ExistingFile);
    simulate->add_option("--priors", si.priors, "Gold class frequencies, in task label order")->delimiter(',');
    simulate->add_option("--confusion", si.confusion, "Per-class prediction rates, rows by ';', e.g. 0.98,0.02;0.05,0.95");
    simulate->add_option("--base-report", si.base_report, "Take priors and rates from an `evaluate --json` report")
        ->check(CLI::ExistingFile);
    simulate->add_option("--report", si.report, "Report name when --base-report compares several runs");
    simulate->add_option("--p-true-correct", si.p_true_correct, "P(verdict true | prediction correct)")
        ->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--p-false-incorrect", si.p_false_incorrect, "P(verdict false | prediction incorrect)")
        ->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--mc", si.mc, "Monte Carlo samples (0 to skip)");
    simulate->add_option("--seed", si.seed, "Monte Carlo seed");
    simulate->add_option("--json", si.json_out, "Write results as JSON");
    manifest_opt(simulate, si.manifest);

    GridArgs gr;
    auto* grid = app.add_subcommand("grid", "Train every hyperparameter combination and rank them on validation");
    grid->add_option("--task", gr.task, "Task spec JSON")->required()->check(CLI::ExistingFile);
    grid->add_option("--train", gr.train, "Training JSONL")->required()->check(CLI::ExistingFile);
    grid->add_option("--valid", gr.valid, "Validation JSONL")->required()->check(CLI::ExistingFile);
    grid->add_option("--out", gr.out, "Ranked CSV")->required();
    grid->add_option("--batch-size", gr.space.batch_sizes, "Batch sizes")->delimiter(',');
    grid->add_option("--lr", gr.space.learning_rates, "Learning rates")->delimiter(',');
    grid->add_option("--weight-decay", gr.space.weight_decays, "Weight decays")->delimiter(',');
    grid->add_option("--epochs", gr.space.epochs, "Epoch counts")->delimiter(',');
    grid->add_option("--lambda", gr.lambda, "Weight on the report label's loss term");
    grid->add_option("--seed", gr.seed, "Training seed");
    grid->add_option("--show", gr.show, "Rows to print");
    add_encoder_options(grid, gr.enc);
    manifest_opt(grid, gr.manifest);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return exit_for_parse_error(app, e);
    }

    try {
        if (prepare->parsed()) {
            if (prep.in.empty() == prep.synthetic.empty())
                throw Error(ErrorKind::ConfigError, "give exactly one of --in or --synthetic");
            if (prep.out.empty() == prep.out_dir.empty())
                throw Error(ErrorKind::ConfigError, "give exactly one of --out or --out-dir");
            return run_prepare(*prepare, prep);
        }
        if (balance_cmd->parsed())
            return run_balance(*balance_cmd, bal);
        if (train->parsed())
            return run_train(*train, tr);
        if (predict_cmd->parsed())
            return run_predict(*predict_cmd, pr);
        if (verify->parsed())
            return run_verify(*verify, ve);
        if (correct->parsed())
            return run_correct(*correct, co);
        if (evaluate_cmd->parsed())
            return run_evaluate(*evaluate_cmd, ev);
        if (viz->parsed())
            return run_viz(*viz, vz);
        if (serve->parsed())
            return run_serve(*serve, sv);
        if (simulate->parsed())
            return run_simulate(*simulate, si);
        if (grid->parsed())
            return run_grid(*grid, gr);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << "\n";
        return static_cast<int>(ErrorCategory::Data);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorCategory::Data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorCategory::Data);
    }
    return 1;
}
