#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "hwlab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hwlab: GI/GI/N many-server queue and diffusion-model simulation lab"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed = -1;
    int threads = 0;
    bool check = false;

    const char* kinds[] = {"simulate-queue", "simulate-diffusion", "stationary",
                           "sweep",          "verify-dist",        "audit"};
    for (const char* kind : kinds) {
        auto* sub = app.add_subcommand(kind);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "master seed (overrides config)");
        sub->add_option("--threads", threads, "worker threads (0 = config/HWLAB_THREADS)");
        sub->add_flag("--check", check, "exit nonzero when an acceptance check fails");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        hwlab::ConfigDoc doc = hwlab::ConfigDoc::parse_file(config_path);
        const std::string kind = app.get_subcommands().front()->get_name();
        doc.set("", "kind", {kind});
        hwlab::ExperimentOverrides ov;
        ov.out_dir = out_dir;
        ov.seed = seed;
        ov.threads = threads;
        ov.check = check;
        const hwlab::ExperimentResult res = hwlab::run_experiment(doc, ov);
        if (res.checks_requested)
            std::printf("%s: checks %s\n", kind.c_str(), res.checks_passed ? "passed" : "FAILED");
        std::printf("wrote %s/results.csv, report.json, manifest.json\n", res.out_dir.c_str());
        return res.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
