// Writes the synthetic labeled checker-bug dataset and the rule set built
// from it.
#include "checkguard/io.hpp"
#include "checkguard/taxonomy.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Generate the synthetic checker-bug dataset and few-shot rule set"};
    std::uint64_t seed = 0;
    std::string dataset = "data/checker_bugs.jsonl";
    std::string ruleset = "data/ruleset.json";
    std::size_t per_element = 3;
    app.add_option("--seed", seed, "Generator seed");
    app.add_option("--dataset", dataset, "Dataset output");
    app.add_option("--ruleset", ruleset, "Rule set output");
    app.add_option("--per-element", per_element, "Examples kept per element");
    CLI11_PARSE(app, argc, argv);

    try {
        using namespace checkguard;
        auto bugs = taxonomy::generate_synthetic_dataset(seed);
        taxonomy::write_dataset(dataset, bugs);
        auto rs = taxonomy::build_ruleset(bugs, per_element);
        io::write_file_atomic(ruleset, rs.to_json().dump(2) + "\n");
        std::cout << bugs.size() << " records -> " << dataset << ", rule set -> " << ruleset << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
