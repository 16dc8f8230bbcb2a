#include "dcqa/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "dcqa/augment.hpp"
#include "dcqa/config.hpp"
#include "dcqa/gradcheck.hpp"
#include "dcqa/io_util.hpp"
#include "dcqa/tokenizer.hpp"
#include "dcqa/train.hpp"

namespace dcqa {

namespace {

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid JSON in '" + path + "': " + e.what());
    }
    return j;
}

void write_json_atomic(const std::string& path, const nlohmann::json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

SquadDataset load_dataset(const std::string& path) {
    return squad_from_json(load_json_file(path), path);
}

nlohmann::json matrix_json(const Tensor& m) {
    if (m.rank() != 2) throw std::runtime_error("attention matrix is not 2-D");
    nlohmann::json rows = nlohmann::json::array();
    for (int64_t r = 0; r < m.dim(0); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int64_t c = 0; c < m.dim(1); ++c) row.push_back(m.at({r, c}));
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir) {
    RunConfig cfg = RunConfig::from_file(config_path);
    const SquadDataset ds = load_dataset(data_path);

    Tokenizer tok(cfg.vocab_size);
    TokenizeStats stats;
    const auto examples = tokenize_dataset(ds, tok, cfg.max_seq_len, &stats);
    std::printf("loaded %lld examples (%lld dropped misaligned, %lld dropped overlong)\n",
                static_cast<long long>(stats.kept),
                static_cast<long long>(stats.dropped_misaligned),
                static_cast<long long>(stats.dropped_overlong));
    if (examples.empty()) throw ValidationError("train: no usable examples in '" + data_path + "'");

    QaModel model(cfg);
    std::printf("model has %lld parameters\n",
                static_cast<long long>(model.params().total_elements()));
    const TrainResult result = train_model(model, examples, /*max_updates=*/0, &std::cout);

    std::filesystem::create_directories(out_dir);
    model.save_checkpoint(out_dir + "/model.ckpt");
    write_json_atomic(out_dir + "/loss.json",
                      nlohmann::json{{"updates", result.updates}, {"loss_curve", result.loss_curve}});
    std::printf("checkpoint written to %s/model.ckpt (%lld updates)\n", out_dir.c_str(),
                static_cast<long long>(result.updates));
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& pred_out, const std::string& metrics_out,
             const std::string& probs_out, std::optional<double> tau) {
    const QaModel model = QaModel::load_checkpoint(model_path);
    const SquadDataset ds = load_dataset(data_path);
    const ModelPredictions preds = predict_dataset(model, ds, tau);

    write_json_atomic(pred_out, nlohmann::json(preds.answers));
    if (!probs_out.empty()) write_json_atomic(probs_out, nlohmann::json(preds.probabilities));

    const MetricsReport report = evaluate(preds.answers, ds);
    write_json_atomic(metrics_out, report.to_json());
    std::printf("f1 %.4f  em %.4f  (HasAns f1 %.4f over %lld, NoAns f1 %.4f over %lld)\n",
                report.f1, report.em, report.has_ans_f1, static_cast<long long>(report.n_has),
                report.no_ans_f1, static_cast<long long>(report.n_no));
    return 0;
}

int cmd_ensemble(const std::vector<std::string>& pred_paths,
                 const std::vector<std::string>& prob_paths, const std::string& out_path) {
    if (pred_paths.size() != prob_paths.size()) {
        throw ValidationError("ensemble: --preds and --probs counts differ");
    }
    std::vector<ModelPredictions> models;
    models.reserve(pred_paths.size());
    for (size_t i = 0; i < pred_paths.size(); ++i) {
        ModelPredictions mp;
        const nlohmann::json ja = load_json_file(pred_paths[i]);
        const nlohmann::json jp = load_json_file(prob_paths[i]);
        if (!ja.is_object() || !jp.is_object()) {
            throw ValidationError("ensemble: prediction and probability files must be JSON objects");
        }
        for (const auto& [k, v] : ja.items()) mp.answers[k] = v.get<std::string>();
        for (const auto& [k, v] : jp.items()) mp.probabilities[k] = v.get<double>();
        models.push_back(std::move(mp));
    }
    const auto combined = ensemble(models);
    write_json_atomic(out_path, nlohmann::json(combined));
    std::printf("ensemble of %zu models over %zu questions written to %s\n", models.size(),
                combined.size(), out_path.c_str());
    return 0;
}

int cmd_augment(const std::string& data_path, double fraction, uint64_t seed,
                const std::string& translator_name, const std::string& out_path,
                const std::string& pivot, const std::string& endpoint,
                const std::string& cache_path, const std::string& manifest_out) {
    const SquadDataset ds = load_dataset(data_path);

    std::unique_ptr<Translator> translator;
    if (translator_name == "mock") {
        translator = std::make_unique<MockTranslator>(seed);
    } else if (translator_name == "http") {
        if (endpoint.empty()) throw ValidationError("augment: --endpoint is required with http");
        const std::string cache = cache_path.empty() ? out_path + ".cache.json" : cache_path;
        translator = std::make_unique<HttpTranslator>(endpoint, cache);
    } else {
        throw ValidationError("augment: unknown translator '" + translator_name + "'");
    }

    auto [augmented, manifest] = augment_dataset(ds, fraction, *translator, seed, pivot);
    save_squad(augmented, out_path);
    const std::string manifest_path =
        manifest_out.empty() ? out_path + ".manifest.json" : manifest_out;
    write_json_atomic(manifest_path, manifest.to_json());
    std::printf("augmented %lld -> %lld questions (%zu skipped); manifest at %s\n",
                static_cast<long long>(ds.question_count()),
                static_cast<long long>(augmented.question_count()), manifest.skipped.size(),
                manifest_path.c_str());
    return 0;
}

int cmd_dump_attention(const std::string& model_path, const std::string& data_path,
                       const std::string& qid, const std::string& out_path) {
    const QaModel model = QaModel::load_checkpoint(model_path);
    const SquadDataset ds = load_dataset(data_path);
    Tokenizer tok(model.config().vocab_size);
    TokenizeStats stats;
    const auto examples = tokenize_dataset(ds, tok, model.config().max_seq_len, &stats);
    for (const auto& ex : examples) {
        if (ex.id != qid) continue;
        write_json_atomic(out_path, attention_dump_json(model, ex));
        std::printf("attention dump for '%s' written to %s\n", qid.c_str(), out_path.c_str());
        return 0;
    }
    throw ValidationError("dump-attention: question id '" + qid +
                          "' not found (or dropped at tokenization)");
}

int cmd_grad_check(uint64_t seed, double epsilon, double tol) {
    const GradCheckReport rep = run_grad_checks(seed, epsilon);
    for (const auto& e : rep.entries) {
        std::printf("%-18s elements %-6lld max rel err %.3e\n", e.name.c_str(),
                    static_cast<long long>(e.n_elements), e.max_rel_err);
    }
    std::printf("worst %.6e (tolerance %.1e)\n", rep.worst, tol);
    if (!rep.passed(tol)) {
        std::fprintf(stderr, "grad-check: tolerance exceeded\n");
        return 2;
    }
    return 0;
}

}  // namespace

std::vector<std::string> surface_tokens(const TokenizedExample& ex) {
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<size_t>(ex.length()));
    tokens.emplace_back("[CLS]");
    for (const auto& w : split_words(ex.question)) tokens.push_back(w);
    tokens.emplace_back("[SEP]");
    for (const auto& t : ex.context_tokens) tokens.push_back(t.text);
    tokens.emplace_back("[SEP]");
    if (tokens.size() != static_cast<size_t>(ex.length())) {
        throw std::runtime_error("surface tokens out of step with token ids for '" + ex.id + "'");
    }
    return tokens;
}

nlohmann::json attention_dump_json(const QaModel& model, const TokenizedExample& ex) {
    const QaModel::Forward f = model.forward(ex);
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& [c2q, q2c] : f.stack.attention) {
        blocks.push_back({{"c2q", matrix_json(c2q)}, {"q2c", matrix_json(q2c)}});
    }
    return nlohmann::json{
        {"id", ex.id},
        {"tokens", surface_tokens(ex)},
        {"blocks", std::move(blocks)},
        {"start_logits", f.logits.start->value.data},
        {"end_logits", f.logits.end->value.data},
    };
}

ModelPredictions predict_dataset(const QaModel& model, const SquadDataset& ds,
                                 std::optional<double> tau_override) {
    Tokenizer tok(model.config().vocab_size);
    TokenizeStats stats;
    const auto examples = tokenize_dataset(ds, tok, model.config().max_seq_len, &stats);

    ModelPredictions out;
    for (const auto& ex : examples) {
        const QaModel::Prediction p = model.predict(ex, tau_override);
        out.answers[ex.id] = p.answer_text;
        out.probabilities[ex.id] = p.probability;
    }
    // Dropped questions still need an entry; a model that never saw the
    // example can only abstain.
    for (const auto& art : ds.articles) {
        for (const auto& par : art.paragraphs) {
            for (const auto& qa : par.qas) {
                if (out.answers.count(qa.id) == 0) {
                    out.answers[qa.id] = "";
                    out.probabilities[qa.id] = 0.0;
                }
            }
        }
    }
    return out;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"directed coattention QA: train, evaluate, ensemble, augment, inspect"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, model_path;
    std::string pred_out, metrics_out, probs_out;
    std::vector<std::string> pred_paths, prob_paths;
    std::string translator_name = "mock", pivot = "fr", endpoint, cache_path, manifest_out, qid;
    double fraction = 0.35;
    uint64_t seed = 0;
    double tau_value = 0.0;
    uint64_t gc_seed = 1234;
    double gc_epsilon = 1e-5;
    double gc_tol = 1e-4;

    auto* train = app.add_subcommand("train", "train a model from a config and a dataset");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--data", data_path, "training dataset JSON")->required();
    train->add_option("--out", out_path, "output directory for checkpoint and loss curve")
        ->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--model", model_path, "checkpoint file")->required();
    eval->add_option("--data", data_path, "dataset JSON")->required();
    eval->add_option("--pred-out", pred_out, "predictions JSON (id -> answer text)")->required();
    eval->add_option("--metrics-out", metrics_out, "metrics JSON")->required();
    eval->add_option("--probs-out", probs_out, "answer probability sidecar JSON");
    auto* tau_opt = eval->add_option("--tau", tau_value, "no-answer threshold override");

    auto* ens = app.add_subcommand("ensemble", "combine prediction files");
    ens->add_option("--preds", pred_paths, "prediction JSON files, one per model")
        ->required()
        ->expected(-2);
    ens->add_option("--probs", prob_paths, "probability JSON files, one per model")
        ->required()
        ->expected(-2);
    ens->add_option("--out", out_path, "combined predictions JSON")->required();

    auto* aug = app.add_subcommand("augment", "append backtranslated question paraphrases");
    aug->add_option("--data", data_path, "dataset JSON")->required();
    aug->add_option("--fraction", fraction, "fraction of questions to paraphrase, in (0,1]")
        ->required();
    aug->add_option("--seed", seed, "sampling seed")->required();
    aug->add_option("--translator", translator_name, "mock | http")->required();
    aug->add_option("--out", out_path, "augmented dataset JSON")->required();
    aug->add_option("--pivot", pivot, "pivot language code (default fr)");
    aug->add_option("--endpoint", endpoint, "translation endpoint URL (http only)");
    aug->add_option("--cache", cache_path, "translation cache file (http only)");
    aug->add_option("--manifest-out", manifest_out, "manifest JSON path");

    auto* dump = app.add_subcommand("dump-attention", "write one example's attention matrices");
    dump->add_option("--model", model_path, "checkpoint file")->required();
    dump->add_option("--data", data_path, "dataset JSON")->required();
    dump->add_option("--id", qid, "question id")->required();
    dump->add_option("--out", out_path, "dump JSON path")->required();

    auto* gc = app.add_subcommand("grad-check", "finite-difference check of every backward pass");
    gc->add_option("--seed", gc_seed, "probe seed");
    gc->add_option("--epsilon", gc_epsilon, "central-difference step");
    gc->add_option("--tol", gc_tol, "max relative error accepted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the error
        std::fputs(app.help().c_str(), stderr);
        return 1;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, data_path, out_path);
        if (eval->parsed()) {
            std::optional<double> tau;
            if (tau_opt->count() > 0) tau = tau_value;
            return cmd_eval(model_path, data_path, pred_out, metrics_out, probs_out, tau);
        }
        if (ens->parsed()) return cmd_ensemble(pred_paths, prob_paths, out_path);
        if (aug->parsed()) {
            return cmd_augment(data_path, fraction, seed, translator_name, out_path, pivot,
                               endpoint, cache_path, manifest_out);
        }
        if (dump->parsed()) return cmd_dump_attention(model_path, data_path, qid, out_path);
        if (gc->parsed()) return cmd_grad_check(gc_seed, gc_epsilon, gc_tol);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal: %s\n", e.what());
        return 2;
    }
    std::fputs(app.help().c_str(), stderr);
    return 1;
}

}  // namespace dcqa
