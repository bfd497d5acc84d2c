// Command-line front end: generate, solve, eval, ablate, noise-sweep.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nmips/harness.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool no_transfer = false;
    std::string family;
    std::string expr;
    int task = -1;
};

nmips::ExperimentConfig resolve(const Options& o)
{
    nmips::ExperimentConfig cfg = o.config.empty() ? nmips::ExperimentConfig{} : nmips::load_config(o.config);
    if (!o.family.empty()) {
        auto f = nmips::family_from_name(o.family);
        if (!f) {
            for (auto cand : nmips::kAllFamilies) {
                std::string a(nmips::family_name(cand));
                std::string b = o.family;
                for (auto& c : a) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                for (auto& c : b) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                if (a == b) f = cand;
            }
        }
        if (!f) throw nmips::ConfigError("unknown family '" + o.family + "'");
        if (*f != cfg.family) cfg.params.clear();
        cfg.family = *f;
    }
    if (o.seed) cfg.seeds = {*o.seed};
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.no_transfer) cfg.solver.transfer_enabled = false;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multitask symbolic regression for parameterised PDE families"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON experiment configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "single search seed (overrides the config)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--family", o.family, "PDE family (Adv1D, Burgers1D, AdvDiff1D, Adv2D, NS2D, Adv3D)");
    };
    auto* gen = app.add_subcommand("generate", "write the training datasets and manifest");
    common(gen);
    auto* solve = app.add_subcommand("solve", "run the search on generated datasets");
    common(solve);
    solve->add_flag("--no-transfer", o.no_transfer, "disable affine knowledge transfer");
    auto* ev = app.add_subcommand("eval", "score a fixed expression on the held-out grid");
    common(ev);
    ev->add_option("--expr", o.expr, "expression in infix form")->required();
    ev->add_option("--task", o.task, "task index (default: all)");
    auto* ablate = app.add_subcommand("ablate", "matched runs with and without transfer");
    common(ablate);
    auto* sweep = app.add_subcommand("noise-sweep", "solve at each configured noise level");
    common(sweep);
    sweep->add_flag("--no-transfer", o.no_transfer, "disable affine knowledge transfer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const nmips::ExperimentConfig cfg = resolve(o);
        if (gen->parsed()) {
            for (const auto& f : nmips::cmd_generate(cfg)) std::cout << f.string() << '\n';
        } else if (solve->parsed()) {
            const auto rows = nmips::cmd_solve(cfg, &std::cout);
            std::cout << nmips::results_header() << '\n';
            for (const auto& r : rows) std::cout << nmips::to_csv(r) << '\n';
        } else if (ev->parsed()) {
            const auto rows = nmips::cmd_eval(cfg, o.expr, o.task);
            std::cout << nmips::results_header() << '\n';
            for (const auto& r : rows) std::cout << nmips::to_csv(r) << '\n';
        } else if (ablate->parsed()) {
            const auto s = nmips::cmd_ablate(cfg, &std::cout);
            std::printf("avg_mse_with_transfer\t%.6e\navg_mse_without_transfer\t%.6e\n", s.avg_with, s.avg_without);
        } else if (sweep->parsed()) {
            const auto rows = nmips::cmd_noise_sweep(cfg, &std::cout);
            std::cout << "noise_sweep rows: " << rows.size() << '\n';
        }
    } catch (const nmips::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const nmips::ParseError& e) {
        std::cerr << "error: cannot parse expression at offset " << e.position() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
