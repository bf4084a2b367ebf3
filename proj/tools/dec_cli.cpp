// Command-line surface for the DEC pipeline: corpus indexing, single runs,
// batch runs, instruction-data construction, evaluation and fixture
// generation.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dec/config.hpp"
#include "dec/ek_dataset.hpp"
#include "dec/evaluator.hpp"
#include "dec/fixtures.hpp"
#include "dec/gateway.hpp"
#include "dec/orchestrator.hpp"
#include "dec/remote.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    std::string scripted_path;
    std::string corpus_path;
    std::string index_path;
    std::optional<int> top_n;
    std::optional<int> backup_k;
    std::optional<int> max_chain;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Configuration file (JSON)");
    cmd->add_option("--scripted", args.scripted_path,
                    "Scripted backend file (JSON Lines); replaces the remote endpoint");
    cmd->add_option("--top-n", args.top_n, "Documents retrieved per query");
    cmd->add_option("--backup-k", args.backup_k, "Relevance-backup documents per query");
    cmd->add_option("--max-chain", args.max_chain, "Maximum reasoning-chain length");
}

/// Resolved config: file (or defaults), then flag overrides. The provenance
/// digest is taken after overrides so records reflect what actually ran.
dec::AppConfig resolve_config(const CommonArgs& args) {
    dec::AppConfig cfg;
    if (!args.config_path.empty()) cfg = dec::load_config(args.config_path);
    if (!args.corpus_path.empty()) cfg.paths.corpus = args.corpus_path;
    if (args.top_n) cfg.retrieval.top_n = *args.top_n;
    if (args.backup_k) cfg.retrieval.backup_k = *args.backup_k;
    if (args.max_chain) cfg.orchestrator.max_chain_length = *args.max_chain;
    cfg.validate();
    return cfg;
}

std::shared_ptr<const dec::ChatBackend> resolve_backend(const CommonArgs& args,
                                                        const dec::AppConfig& cfg) {
    if (!args.scripted_path.empty())
        return std::make_shared<dec::ScriptedBackend>(
            std::filesystem::path(args.scripted_path));
    if (args.config_path.empty())
        throw dec::Error(dec::ErrorKind::usage,
                         "no backend configured: pass --config or --scripted");
    dec::RemoteGatewayConfig remote;
    remote.base_url = cfg.gateway.base_url;
    remote.api_key = cfg.api_key();
    remote.concurrency_limit = cfg.gateway.concurrency_limit;
    return std::make_shared<dec::OpenAiClient>(remote);
}

dec::CorpusIndex resolve_index(const CommonArgs& args, const dec::AppConfig& cfg) {
    if (!args.index_path.empty()) return dec::CorpusIndex::load(args.index_path);
    if (!cfg.paths.index_cache.empty() && fs::exists(cfg.paths.index_cache))
        return dec::CorpusIndex::load(cfg.paths.index_cache);
    if (!cfg.paths.corpus.empty()) return dec::CorpusIndex::from_corpus_jsonl(cfg.paths.corpus);
    throw dec::Error(dec::ErrorKind::usage, "no corpus: pass --corpus or --index");
}

std::unique_ptr<dec::Retriever> resolve_retriever(const dec::AppConfig& cfg,
                                                  const dec::CorpusIndex& index) {
    if (cfg.retrieval.mode == "remote")
        return std::make_unique<dec::RemoteRetriever>(cfg.retrieval.remote_url, index);
    return std::make_unique<dec::LexicalRetriever>(index);
}

dec::PromptCatalog resolve_catalog(const dec::AppConfig& cfg) {
    dec::PromptCatalog catalog = dec::PromptCatalog::builtin();
    if (!cfg.paths.prompt_overrides.empty())
        catalog.apply_overrides_file(cfg.paths.prompt_overrides);
    return catalog;
}

dec::PipelineOptions pipeline_options(const dec::AppConfig& cfg) {
    dec::PipelineOptions o;
    o.main = {cfg.gateway.model_main, cfg.gateway.temperature, cfg.gateway.max_output_tokens};
    o.keyword = {cfg.gateway.model_ek, cfg.gateway.temperature, cfg.gateway.max_output_tokens};
    o.top_n = cfg.retrieval.top_n;
    o.backup_k = cfg.retrieval.backup_k;
    o.max_chain_length = cfg.orchestrator.max_chain_length;
    o.unanswerable_token = cfg.orchestrator.unanswerable_token;
    o.config_digest = cfg.digest();
    return o;
}

void print_trace(std::ostream& os, const dec::RunRecord& r) {
    os << "question " << r.question.id << ": " << r.question.text << "\n";
    os << "chain:\n";
    for (const auto& sub : r.chain.subs) os << "  " << sub.index << ". " << sub.text << "\n";
    for (const auto& step : r.steps) {
        os << "step " << step.rewritten.sub_index << ":\n";
        os << "  rewritten: " << step.rewritten.text << "\n";
        os << "  keywords:  " << dec::join_keywords(step.keywords.keywords) << "\n";
        os << "  docs:      ";
        for (std::size_t i = 0; i < step.candidate_doc_ids.size(); ++i)
            os << (i > 0 ? ", " : "") << step.candidate_doc_ids[i];
        os << "\n  answer:    " << step.sub_answer << "\n";
    }
    os << "final answer: " << r.final_answer
       << " (answerable=" << (r.predicted_answerable ? "true" : "false") << ")\n";
    os << "tokens: prompt " << r.total_tokens.prompt << ", completion "
       << r.total_tokens.completion << "\n";
    for (const auto& f : r.flags) os << "flag: " << f << "\n";
    if (r.failed) os << "error: " << r.error << "\n";
}

int cmd_index(const std::string& corpus_path, const std::string& out_path) {
    const dec::CorpusIndex index = dec::CorpusIndex::from_corpus_jsonl(corpus_path);
    index.save(out_path);
    if (index.size() == 0)
        std::cerr << "warning: corpus is empty; retrieval will return nothing\n";
    std::cout << "indexed " << index.size() << " documents -> " << out_path << "\n";
    return 0;
}

int cmd_run(const CommonArgs& args, const std::string& question_id,
            const std::string& question_text) {
    const dec::AppConfig cfg = resolve_config(args);
    auto backend = resolve_backend(args, cfg);
    dec::Gateway gateway(backend);
    const dec::CorpusIndex index = resolve_index(args, cfg);
    auto retriever = resolve_retriever(cfg, index);
    const dec::PromptCatalog catalog = resolve_catalog(cfg);
    dec::Orchestrator orchestrator(gateway, *retriever, catalog, pipeline_options(cfg));

    const dec::RunRecord record = orchestrator.run({question_id, question_text});
    std::cout << dec::to_json(record).dump(2) << "\n";
    print_trace(std::cerr, record);
    return record.failed ? 3 : 0;
}

int cmd_batch(const CommonArgs& args, const std::string& dataset_path,
              const std::string& out_path, int parallelism) {
    const dec::AppConfig cfg = resolve_config(args);
    auto backend = resolve_backend(args, cfg);
    dec::Gateway gateway(backend);
    const dec::CorpusIndex index = resolve_index(args, cfg);
    auto retriever = resolve_retriever(cfg, index);
    const dec::PromptCatalog catalog = resolve_catalog(cfg);
    dec::Orchestrator orchestrator(gateway, *retriever, catalog, pipeline_options(cfg));

    const std::vector<dec::DatasetRecord> dataset = dec::load_dataset_jsonl(dataset_path);

    // Resume support: completed records for a question id are kept, failed
    // or missing ones are executed again. Output stays in dataset order.
    std::unordered_map<std::string, dec::RunRecord> existing;
    if (fs::exists(out_path)) {
        for (auto& r : dec::load_run_records_jsonl(out_path)) {
            if (!r.failed) existing.emplace(r.question.id, std::move(r));
        }
    }
    std::vector<dec::DatasetRecord> pending;
    for (const auto& d : dataset) {
        if (existing.find(d.id) == existing.end()) pending.push_back(d);
    }
    const std::vector<dec::RunRecord> fresh = orchestrator.run_batch(pending, parallelism);
    std::unordered_map<std::string, const dec::RunRecord*> fresh_by_id;
    for (const auto& r : fresh) fresh_by_id[r.question.id] = &r;

    std::vector<dec::RunRecord> ordered;
    ordered.reserve(dataset.size());
    long failed = 0;
    for (const auto& d : dataset) {
        auto it = existing.find(d.id);
        if (it != existing.end()) {
            ordered.push_back(it->second);
        } else {
            ordered.push_back(*fresh_by_id.at(d.id));
        }
        if (ordered.back().failed) ++failed;
    }
    dec::save_run_records_jsonl(out_path, ordered);
    std::cout << "wrote " << ordered.size() << " records (" << fresh.size() << " executed, "
              << existing.size() << " reused, " << failed << " failed) -> " << out_path << "\n";
    return 0;
}

int cmd_build_ek_data(const std::string& runs_path, const std::string& dataset_path,
                      const std::string& corpus_path, const std::string& out_path) {
    const std::vector<dec::RunRecord> runs = dec::load_run_records_jsonl(runs_path);
    const std::vector<dec::DatasetRecord> dataset = dec::load_dataset_jsonl(dataset_path);
    const dec::CorpusIndex corpus = dec::CorpusIndex::from_corpus_jsonl(corpus_path);
    const dec::EkBuildResult result = dec::build_ek_dataset(runs, dataset, corpus);
    dec::save_ek_dataset_jsonl(out_path, result.examples);
    if (result.runs_skipped > 0)
        std::cerr << "warning: " << result.runs_skipped << " runs without gold documents skipped\n";
    std::cout << "pairs seen " << result.pairs_seen << ", emitted " << result.examples.size()
              << " -> " << out_path << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& runs_path,
             const std::string& dataset_path, const std::string& out_path, bool with_judge,
             bool with_answerability) {
    const std::vector<dec::RunRecord> runs = dec::load_run_records_jsonl(runs_path);
    const std::vector<dec::DatasetRecord> dataset = dec::load_dataset_jsonl(dataset_path);

    dec::EvaluateOptions opts;
    opts.with_answerability = with_answerability;

    std::optional<dec::Gateway> gateway;
    std::optional<dec::Judge> judge;
    dec::AppConfig cfg = resolve_config(args);
    dec::PromptCatalog catalog = resolve_catalog(cfg);
    if (with_judge) {
        gateway.emplace(resolve_backend(args, cfg));
        judge.emplace(*gateway, catalog,
                      dec::CallOptions{cfg.gateway.model_judge, cfg.gateway.temperature,
                                       cfg.gateway.max_output_tokens});
        opts.judge = &*judge;
    }

    dec::MetricReport report = dec::evaluate(runs, dataset, opts);
    report.config_digest = cfg.digest();
    dec::ojson j = dec::to_json(report);

    bool any_gold = false;
    for (const auto& d : dataset) any_gold = any_gold || !d.gold_doc_ids.empty();
    std::optional<dec::GoldRecallReport> recall;
    if (any_gold) {
        recall = dec::gold_recall(runs, dataset);
        j["gold_recall"] = dec::to_json(*recall);
    }

    std::ostream& table = out_path.empty() ? std::cerr : std::cout;
    dec::print_table(table, report);
    if (recall) {
        table << "gold recall      docs " << recall->matched_gold_docs << "/"
              << recall->total_gold_docs << " (" << recall->doc_match_ratio * 100.0
              << "%), fully recalled " << recall->fully_recalled_questions << "/"
              << recall->questions_with_gold << " (" << recall->fully_recalled_ratio * 100.0
              << "%)\n";
    }
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        dec::write_text_file(out_path, j.dump(2) + "\n");
        std::cout << "report -> " << out_path << "\n";
    }
    return 0;
}

int cmd_fixtures_generate(std::uint64_t seed, int questions, int hops,
                          const std::string& out_dir, const std::vector<int>& drop_gold,
                          int top_n, int backup_k) {
    dec::fixtures::WorldOptions opts;
    opts.seed = seed;
    opts.n_questions = questions;
    opts.hops = hops;
    opts.top_n = top_n;
    opts.backup_k = backup_k;
    opts.drop_gold_for = drop_gold;
    const dec::fixtures::SyntheticWorld world = dec::fixtures::generate_world(opts);
    const auto paths = dec::fixtures::write_world(world, out_dir);
    std::cout << "world: " << world.corpus.size() << " docs, " << world.dataset.size()
              << " questions, " << world.script.size() << " script entries -> " << out_dir
              << "\n";
    std::cout << "files: " << paths.corpus.filename().string() << " "
              << paths.dataset.filename().string() << " " << paths.script.filename().string()
              << " " << paths.expected.filename().string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DEC: decompose-rewrite-retrieve-answer pipeline for multi-hop QA"};
    app.require_subcommand(1);

    // index
    auto* index_cmd = app.add_subcommand("index", "Build and persist a corpus index");
    std::string index_corpus, index_out;
    index_cmd->add_option("--corpus", index_corpus, "Corpus JSON Lines")->required();
    index_cmd->add_option("--out", index_out, "Index output file")->required();

    // run
    auto* run_cmd = app.add_subcommand("run", "Answer one question and print its run record");
    CommonArgs run_args;
    std::string run_question, run_id = "q0";
    run_cmd->add_option("--question", run_question, "Question text")->required();
    run_cmd->add_option("--id", run_id, "Question id for the record");
    run_cmd->add_option("--corpus", run_args.corpus_path, "Corpus JSON Lines");
    run_cmd->add_option("--index", run_args.index_path, "Prebuilt index file");
    add_common_flags(run_cmd, run_args);

    // batch
    auto* batch_cmd = app.add_subcommand("batch", "Run a dataset and write run records");
    CommonArgs batch_args;
    std::string batch_dataset, batch_out;
    int batch_parallelism = 1;
    batch_cmd->add_option("--dataset", batch_dataset, "Dataset JSON Lines")->required();
    batch_cmd->add_option("--out", batch_out, "Run-record output (JSON Lines)")->required();
    batch_cmd->add_option("--parallelism", batch_parallelism, "Concurrent questions");
    batch_cmd->add_option("--corpus", batch_args.corpus_path, "Corpus JSON Lines");
    batch_cmd->add_option("--index", batch_args.index_path, "Prebuilt index file");
    add_common_flags(batch_cmd, batch_args);

    // build-ek-data
    auto* ek_cmd = app.add_subcommand("build-ek-data",
                                      "Emit keyword-extraction instruction-tuning data");
    std::string ek_runs, ek_dataset, ek_corpus, ek_out;
    ek_cmd->add_option("--runs", ek_runs, "Run records JSON Lines")->required();
    ek_cmd->add_option("--dataset", ek_dataset, "Dataset JSON Lines")->required();
    ek_cmd->add_option("--corpus", ek_corpus, "Corpus JSON Lines (hydrates gold ids)")->required();
    ek_cmd->add_option("--out", ek_out, "Training data output (JSON Lines)")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score run records against a dataset");
    CommonArgs eval_args;
    std::string eval_runs, eval_dataset, eval_out;
    bool with_judge = false, with_answerability = false;
    eval_cmd->add_option("--runs", eval_runs, "Run records JSON Lines")->required();
    eval_cmd->add_option("--dataset", eval_dataset, "Dataset JSON Lines")->required();
    eval_cmd->add_option("--out", eval_out, "Report output file (JSON)");
    eval_cmd->add_flag("--with-judge", with_judge, "Add LLM-judged semantic accuracy and ATC");
    eval_cmd->add_flag("--with-answerability", with_answerability,
                       "Add answerability confusion metrics");
    add_common_flags(eval_cmd, eval_args);

    // fixtures generate (internal tooling, hidden from help)
    auto* fixtures_cmd = app.add_subcommand("fixtures", "");
    fixtures_cmd->group("");
    auto* gen_cmd = fixtures_cmd->add_subcommand("generate", "Generate a synthetic world");
    std::uint64_t gen_seed = 7;
    int gen_questions = 20, gen_hops = 2, gen_top_n = 10, gen_backup_k = 2;
    std::string gen_out;
    std::vector<int> gen_drop;
    gen_cmd->add_option("--seed", gen_seed, "RNG seed");
    gen_cmd->add_option("--questions", gen_questions, "Number of questions");
    gen_cmd->add_option("--hops", gen_hops, "Hops per question (2 or 3)");
    gen_cmd->add_option("--top-n", gen_top_n, "top_n the pipeline will run with");
    gen_cmd->add_option("--backup-k", gen_backup_k, "backup_k the pipeline will run with");
    gen_cmd->add_option("--drop-gold", gen_drop,
                        "Question indices whose final gold doc is removed");
    gen_cmd->add_option("--out-dir", gen_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*index_cmd) return cmd_index(index_corpus, index_out);
        if (*run_cmd) return cmd_run(run_args, run_id, run_question);
        if (*batch_cmd) return cmd_batch(batch_args, batch_dataset, batch_out, batch_parallelism);
        if (*ek_cmd) return cmd_build_ek_data(ek_runs, ek_dataset, ek_corpus, ek_out);
        if (*eval_cmd)
            return cmd_eval(eval_args, eval_runs, eval_dataset, eval_out, with_judge,
                            with_answerability);
        if (*gen_cmd)
            return cmd_fixtures_generate(gen_seed, gen_questions, gen_hops, gen_out, gen_drop,
                                         gen_top_n, gen_backup_k);
    } catch (const dec::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return dec::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    std::cerr << app.help();
    return 1;
}
