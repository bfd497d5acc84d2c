#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nmips/engine.hpp"
#include "nmips/fitness.hpp"
#include "nmips/pdefam.hpp"

using namespace nmips;

namespace {

// Cheap two-task problem: plain RMSE of the decoded expression (constants
// left at 1) against x*t and sin(x) + t on a fixed grid.
class ToyProblem : public Problem {
public:
    ToyProblem()
        : lib_(family_library(Family::Adv1D))
    {
        const std::vector<SymbolLibrary> libs = {lib_, lib_};
        spec_ = build_encoding_space(libs, 6, 1, 2);
        const auto targets = {parse_expr("x*t"), parse_expr("sin(x) + t")};
        for (const auto& target : targets) {
            Dataset d;
            d.variables = {Var::X, Var::T};
            for (int i = 0; i < 8; ++i) {
                for (int k = 0; k < 6; ++k) {
                    const Point p = make_point(i / 7.0, 0, 0, k / 2.5);
                    d.points.push_back(p);
                    d.values.push_back(eval(target, p).value());
                }
            }
            data_.push_back(std::move(d));
        }
    }

    [[nodiscard]] const EncodingSpec& encoding() const override { return spec_; }
    [[nodiscard]] int task_count() const override { return 2; }
    [[nodiscard]] Evaluation evaluate(const Chromosome& c, int task) const override
    {
        auto tree = decode(c, spec_, lib_);
        return {data_loss(tree, data_[static_cast<std::size_t>(task)]), tree};
    }

    // Main gene "x*t" followed by terminal padding.
    [[nodiscard]] Chromosome exact_task0() const
    {
        const int b = spec_.bound_b;
        Chromosome c;
        c.genes.assign(static_cast<std::size_t>(spec_.genome_len()), b);
        c.genes[0] = 2; // Mul
        c.genes[1] = b; // x
        c.genes[2] = b + 1; // t
        return c;
    }

private:
    SymbolLibrary lib_;
    EncodingSpec spec_;
    std::vector<Dataset> data_;
};

SolverConfig small_config(std::uint64_t seed)
{
    SolverConfig cfg;
    cfg.pop_size = 20;
    cfg.generations = 40;
    cfg.max_evals = 700;
    cfg.transfer_interval = 5;
    cfg.transfer_epochs = 20;
    cfg.master_seed = seed;
    return cfg;
}

void check_metrics(const std::vector<Individual>& pop)
{
    std::vector<std::vector<double>> costs(pop.front().costs.size());
    for (std::size_t j = 0; j < costs.size(); ++j) {
        for (const auto& ind : pop) costs[j].push_back(ind.costs[j]);
    }
    const auto table = compute_ranks(costs);
    for (std::size_t i = 0; i < pop.size(); ++i) {
        int min_rank = 1 << 30;
        for (int j = 0; j < table.tasks; ++j) {
            if (is_sentinel(pop[i].costs[static_cast<std::size_t>(j)])) continue;
            min_rank = std::min(min_rank, table.rank(j, static_cast<int>(i)));
        }
        REQUIRE(min_rank < (1 << 30));
        CHECK(pop[i].scalar_fitness == 1.0 / min_rank);
        CHECK(table.rank(pop[i].skill_factor, static_cast<int>(i)) == min_rank);
    }
}

} // namespace

TEST_CASE("config validation")
{
    SolverConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.pop_size = 3;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.rmp = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.max_evals = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.transfer_interval = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("initial population scores every task")
{
    const ToyProblem problem;
    const auto pop = initialize(problem, small_config(1), {problem.exact_task0()});
    CHECK(pop.size() == 20);
    CHECK(pop[0].chromosome == problem.exact_task0());
    CHECK(pop[0].costs[0] == 0.0);
    for (const auto& ind : pop) {
        for (double c : ind.costs) CHECK_FALSE(is_sentinel(c));
    }
    check_metrics(pop);
}

TEST_CASE("generation invariants")
{
    const ToyProblem problem;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto cfg = small_config(seed);
        std::vector<double> last(2, 1e300);
        long last_evals = 0;
        int calls = 0;
        EvolveOptions opt;
        opt.on_generation = [&](const GenerationInfo& info) {
            ++calls;
            CHECK(info.generation == calls - 1);
            CHECK(info.population->size() == 20);
            CHECK(info.evaluations >= last_evals);
            CHECK(info.evaluations <= cfg.max_evals);
            last_evals = info.evaluations;
            for (std::size_t j = 0; j < 2; ++j) {
                CHECK(info.archive->best[j].cost <= last[j]);
                last[j] = info.archive->best[j].cost;
            }
            check_metrics(*info.population);
        };
        const auto res = evolve(problem, cfg, opt);
        CHECK(res.evaluations <= cfg.max_evals);
        CHECK(res.evaluations == last_evals);
        CHECK(calls == res.generations + 1);
        CHECK(res.archive.best.size() == 2);
        for (const auto& e : res.archive.best) {
            REQUIRE(e.tree.has_value());
            CHECK(e.evaluations <= res.evaluations);
        }
        CHECK_FALSE(res.transfers.empty());
    }
}

TEST_CASE("budget is respected exactly")
{
    const ToyProblem problem;
    auto cfg = small_config(3);
    cfg.transfer_enabled = false;
    cfg.max_evals = 2 * 20 + 5 * 20 + 7; // init + five generations, remainder unusable
    const auto res = evolve(problem, cfg);
    CHECK(res.generations == 5);
    CHECK(res.evaluations == 2 * 20 + 5 * 20);
    cfg.max_evals = 10; // initialisation always runs, then no generation fits
    const auto tiny = evolve(problem, cfg);
    CHECK(tiny.generations == 0);
    CHECK(tiny.evaluations == 2 * 20);
}

TEST_CASE("seeded exact chromosome stays in the archive")
{
    const ToyProblem problem;
    EvolveOptions opt;
    opt.initial = {problem.exact_task0()};
    opt.on_generation = [&](const GenerationInfo& info) { CHECK(info.archive->best[0].cost <= 1e-12); };
    const auto res = evolve(problem, small_config(5), opt);
    CHECK(res.archive.best[0].generation == 0);
    CHECK(to_infix(*res.archive.best[0].tree) == "x*t");
}

TEST_CASE("runs are reproducible across worker counts")
{
    const ToyProblem problem;
    auto cfg = small_config(11);
    std::ostringstream log1, log3;
    EvolveOptions o1;
    o1.log = &log1;
    const auto r1 = evolve(problem, cfg, o1);
    cfg.workers = 3;
    EvolveOptions o3;
    o3.log = &log3;
    const auto r3 = evolve(problem, cfg, o3);
    CHECK(log1.str() == log3.str());
    CHECK(r1.evaluations == r3.evaluations);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(r1.archive.best[j].cost == r3.archive.best[j].cost);
        CHECK(to_infix(*r1.archive.best[j].tree) == to_infix(*r3.archive.best[j].tree));
    }
    for (std::size_t i = 0; i < r1.population.size(); ++i) {
        CHECK(r1.population[i].chromosome == r3.population[i].chromosome);
    }
    cfg.master_seed = 12;
    const auto other = evolve(problem, cfg);
    bool differs = false;
    for (std::size_t i = 0; i < other.population.size(); ++i) {
        differs = differs || !(other.population[i].chromosome == r1.population[i].chromosome);
    }
    CHECK(differs);
}

TEST_CASE("progress log format")
{
    const ToyProblem problem;
    auto cfg = small_config(2);
    cfg.generations = 3;
    std::ostringstream log;
    EvolveOptions opt;
    opt.log = &log;
    evolve(problem, cfg, opt);
    std::istringstream in(log.str());
    std::string line;
    int gens = 0;
    while (std::getline(in, line)) {
        if (line.rfind("gen\t", 0) == 0) {
            ++gens;
            int tabs = 0;
            for (char c : line) tabs += c == '\t';
            CHECK(tabs == 4); // gen, g, evals, two task costs
        }
    }
    CHECK(gens == 4);
}
