// Minimal in-memory walkthrough: build a tiny corpus, script the model
// calls, run one question through the pipeline and print the trace.

#include <iostream>
#include <memory>

#include "dec/fixtures.hpp"
#include "dec/gateway.hpp"
#include "dec/orchestrator.hpp"
#include "dec/retrieval.hpp"

int main() {
    using namespace dec;

    // A generated world bundles corpus, questions and a script that covers
    // every call the pipeline will make.
    fixtures::WorldOptions options;
    options.seed = 42;
    options.n_questions = 1;
    options.hops = 2;
    const fixtures::SyntheticWorld world = fixtures::generate_world(options);

    const CorpusIndex index = CorpusIndex::build(world.corpus);
    const LexicalRetriever retriever(index);
    auto backend = std::make_shared<ScriptedBackend>(world.script);
    Gateway gateway(backend);
    const PromptCatalog catalog = PromptCatalog::builtin();

    Orchestrator orchestrator(gateway, retriever, catalog, PipelineOptions{});
    const RunRecord record =
        orchestrator.run({world.dataset[0].id, world.dataset[0].question});

    std::cout << "question: " << record.question.text << "\n";
    for (const auto& step : record.steps) {
        std::cout << "  step " << step.rewritten.sub_index << ": " << step.rewritten.text
                  << " -> " << step.sub_answer << "\n";
    }
    std::cout << "answer:   " << record.final_answer << " (expected "
              << world.expected[0].final_answer << ")\n";
    std::cout << "tokens:   " << record.total_tokens.total() << "\n";
    return record.final_answer == world.expected[0].final_answer ? 0 : 1;
}
