// mixshift command-line front end. Every subcommand takes a JSON config; see
// docs/config.md.

#include "mixshift/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Shift-policy effects for continuous exposure mixtures"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Cap on worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

    const std::map<std::string, std::string> blurbs{
        {"ingest-check", "Read the data and summarize it"},
        {"correlate", "Spearman correlations and marginal summaries per time"},
        {"diagnose", "Hull extrapolation report for each policy"},
        {"density", "Pairwise kernel density surfaces with low-density flags"},
        {"estimate", "Shift-policy means and contrasts against the observed mean"},
        {"interaction", "Additive interaction of two single-component shifts"},
        {"simulate", "Draw a dataset from a structural model with its true effects"},
    };
    std::string config;
    for (const auto& name : mixshift::command_names()) {
        const auto it = blurbs.find(name);
        auto* sub = app.add_subcommand(name, it == blurbs.end() ? "" : it->second);
        sub->add_option("config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--threads", threads, "Cap on worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mixshift::kExitConfig;
    }
    mixshift::set_max_threads(threads);
    return mixshift::run_command(app.get_subcommands().front()->get_name(), config, std::cout, std::cerr);
}
