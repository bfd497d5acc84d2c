#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "nmips/harness.hpp"

using namespace nmips;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "nmips_test_harness" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A run small enough for a unit test.
ExperimentConfig tiny(Family f, const fs::path& out)
{
    ExperimentConfig cfg;
    cfg.family = f;
    cfg.data_points = 120;
    cfg.interior_points = 32;
    cfg.ic_points = 16;
    cfg.bc_points = 16;
    cfg.seeds = {3, 4};
    cfg.head_len = 5;
    cfg.heldout_per_axis = 21;
    cfg.output_dir = out.string();
    cfg.solver.pop_size = 8;
    cfg.solver.generations = 4;
    cfg.solver.max_evals = 100;
    cfg.solver.transfer_interval = 2;
    cfg.solver.transfer_epochs = 5;
    cfg.fitness.opt.max_steps = 5;
    return cfg;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(NMIPS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config parsing")
{
    const auto cfg = parse_config(R"({"family": "ns2d", "seeds": [5, 6], "solver": {"pop_size": 10},
                                      "const_opt": {"max_steps": 7}, "lambda_phys": 0.2})");
    CHECK(cfg.family == Family::NS2D);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{5, 6});
    CHECK(cfg.solver.pop_size == 10);
    CHECK(cfg.fitness.opt.max_steps == 7);
    CHECK(cfg.fitness.lambda_phys == 0.2);
    CHECK(cfg.task_params() == default_params(Family::NS2D));

    CHECK_THROWS_AS(parse_config(R"({"famly": "Adv1D"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"solver": {"popsize": 3}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"const_opt": {"steps": 3}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"family": "Heat"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"data_points": "many"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"data_points": -3})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"params": [[0.1, 0.2]]})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"solver": {"pop_size": 2}})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

    // Round trip through the serialiser.
    const auto again = parse_config(config_to_json(cfg));
    CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("seed resolution")
{
    ExperimentConfig cfg;
    cfg.seeds = {9};
    CHECK(cfg.resolved_seeds() == std::vector<std::uint64_t>{9});
    cfg.seeds.clear();
    ::setenv("NMIPS_SEED", "42", 1);
    CHECK(cfg.resolved_seeds() == std::vector<std::uint64_t>{42});
    ::setenv("NMIPS_SEED", "4x", 1);
    CHECK_THROWS_AS(static_cast<void>(cfg.resolved_seeds()), ConfigError);
    ::unsetenv("NMIPS_SEED");
    CHECK(cfg.resolved_seeds() == std::vector<std::uint64_t>{1});
}

TEST_CASE("generate writes reproducible datasets")
{
    const auto dir = scratch("gen");
    ExperimentConfig cfg;
    cfg.output_dir = dir.string();
    const auto files = cmd_generate(cfg);
    REQUIRE(files.size() == 4);
    for (const auto& f : files) CHECK(load_dataset(f).size() == 1100);
    const std::string first = slurp(files[2]);
    cmd_generate(cfg);
    CHECK(slurp(files[2]) == first);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["family"] == "Adv1D");
    CHECK(manifest["tasks"].size() == 4);
    CHECK(manifest["tasks"][1]["rows"] == 1100);
    CHECK(manifest["tasks"][1]["provenance"] == "analytic");

    const auto ns_dir = scratch("gen_ns");
    ExperimentConfig ns;
    ns.family = Family::NS2D;
    ns.output_dir = ns_dir.string();
    const auto ns_files = cmd_generate(ns);
    for (std::size_t k = 0; k < 4; ++k) {
        const double nu = default_params(Family::NS2D)[k][0];
        const auto d = load_dataset(ns_files[k]);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const Point p = d.points.at(i);
            const double pi = std::numbers::pi;
            const double want = std::sin(2 * pi * p[0]) * std::sin(2 * pi * p[1]) * std::exp(-8 * pi * pi * nu * p[3]);
            CHECK(d.values[i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("solve writes self-consistent results")
{
    const auto dir = scratch("solve");
    auto cfg = tiny(Family::Adv1D, dir);
    CHECK_THROWS_AS(cmd_solve(cfg), DataError);
    cmd_generate(cfg);
    const auto rows = cmd_solve(cfg);
    REQUIRE(rows.size() == 2 * 4);
    const auto back = read_results(dir / "results.csv");
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].expression == rows[i].expression);
        CHECK(back[i].mse == rows[i].mse);
        CHECK(back[i].transfer);
        CHECK(back[i].evals <= cfg.solver.max_evals);
        // Re-parse the expression and score it independently.
        const auto eval_rows = cmd_eval(cfg, rows[i].expression, rows[i].task_id);
        REQUIRE(eval_rows.size() == 1);
        CHECK(std::abs(eval_rows[0].mse - rows[i].mse) <= 1e-10 * std::max(1.0, rows[i].mse));
        CHECK(fs::exists(dir / ("seed" + std::to_string(rows[i].seed) + "_task" + std::to_string(rows[i].task_id)
                                + ".txt")));
    }
    CHECK(fs::exists(dir / "run_manifest.json"));

    cfg.solver.transfer_enabled = false;
    for (const auto& r : cmd_solve(cfg)) CHECK_FALSE(r.transfer);

    auto other = cfg;
    other.data_seed = 77;
    CHECK_THROWS_AS(cmd_solve(other), ConfigError);
}

TEST_CASE("eval scores fixed expressions")
{
    ExperimentConfig cfg;
    cfg.heldout_per_axis = 41;
    const auto tasks = build_tasks(cfg);
    const auto exact = to_infix(exact_solution_tree(tasks[1]).value());
    const auto rows = cmd_eval(cfg, exact, 1);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mse <= 1e-10);
    CHECK(cmd_eval(cfg, "x").size() == 4);
    CHECK_THROWS_AS(cmd_eval(cfg, "x +"), ParseError);
    CHECK_THROWS_AS(cmd_eval(cfg, "x", 4), ConfigError);

    ExperimentConfig ns;
    ns.family = Family::NS2D;
    ns.heldout_per_axis = 31;
    const auto zero = cmd_eval(ns, "0", 3);
    const auto grid = heldout_grid(build_tasks(ns)[3], 31);
    double s = 0.0;
    for (double v : grid.values) s += v * v;
    CHECK(zero[0].mse == doctest::Approx(s / static_cast<double>(grid.node_count())));

    ExperimentConfig burgers;
    burgers.family = Family::Burgers1D;
    const auto b = cmd_eval(burgers, "0.014*(t - x) + 0.024", 0);
    CHECK(std::isfinite(b[0].mse));
}

TEST_CASE("ablation pairs seeds")
{
    const auto dir = scratch("ablate");
    const auto cfg = tiny(Family::Adv1D, dir);
    const auto s = cmd_ablate(cfg);
    REQUIRE(s.rows.size() == 8);
    double with = 0.0, without = 0.0;
    for (const auto& r : s.rows) {
        with += r.mse_with;
        without += r.mse_without;
    }
    CHECK(s.avg_with == doctest::Approx(with / 8));
    CHECK(s.avg_without == doctest::Approx(without / 8));
    std::ifstream in(dir / "ablation.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "family,task_id,seed,mse_with_transfer,mse_without_transfer,delta");
    std::size_t n = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        REQUIRE(f.size() == 6);
        CHECK(std::stoull(f[2]) == s.rows[n].seed);
        CHECK(std::stod(f[5]) == doctest::Approx(std::stod(f[4]) - std::stod(f[3])).epsilon(1e-12));
        ++n;
    }
    CHECK(n == 8);
    CHECK(slurp(dir / "ablation_summary.csv").find("Adv1D,avg,") != std::string::npos);
    CHECK(read_results(dir / "results_no_transfer.csv").size() == 8);
}

TEST_CASE("noise sweep")
{
    const auto dir = scratch("noise");
    auto cfg = tiny(Family::Adv1D, dir);
    cfg.seeds = {3};
    const auto rows = cmd_noise_sweep(cfg);
    CHECK(rows.size() == 4 * 4);
    const auto tasks = build_tasks(cfg);
    const auto clean = build_datasets(cfg, tasks);
    for (const auto& r : rows) {
        CHECK(r.sigma == doctest::Approx(r.level * field_rms(clean[static_cast<std::size_t>(r.result.task_id)])));
    }
    // The zero-noise level matches a plain solve with the same seeds.
    const auto plain = solve_runs(cfg, tasks, clean, build_grids(cfg, tasks), true);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        CHECK(rows[i].level == 0.0);
        CHECK(rows[i].result.mse == plain[i].mse);
        CHECK(rows[i].result.expression == plain[i].expression);
    }
    const auto noisy = load_dataset(dir / "noise_0.15" / "adv1d_task0.csv");
    double s2 = 0.0;
    for (std::size_t i = 0; i < noisy.size(); ++i) s2 += (noisy.values[i] - clean[0].values[i]) * (noisy.values[i] - clean[0].values[i]);
    CHECK(std::sqrt(s2 / static_cast<double>(noisy.size())) == doctest::Approx(0.15 * field_rms(clean[0])).epsilon(0.2));
}

TEST_CASE("command-line exit codes")
{
    const auto dir = scratch("cli");
    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("eval --expr 'x +' --out " + dir.string()) == 1);
    CHECK(run_cli("eval --expr 'x*t' --family Adv1D --task 0") == 0);
    CHECK(run_cli("eval --expr 'x' --family Heat1D") == 1);
    CHECK(run_cli("solve --out " + (dir / "missing").string()) == 2);
    std::ofstream(dir / "bad.json") << R"({"unknown": 1})";
    CHECK(run_cli("generate --config " + (dir / "bad.json").string()) == 1);
}
