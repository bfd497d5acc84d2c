#include "nmips/engine.hpp"

#include <atomic>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "nmips/fitness.hpp"

namespace nmips {

void SolverConfig::validate() const
{
    if (pop_size < 4 || pop_size % 2 != 0) throw std::invalid_argument("pop_size must be even and at least 4");
    if (!(rmp >= 0.0 && rmp <= 1.0)) throw std::invalid_argument("rmp must lie in [0, 1]");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) throw std::invalid_argument("mutation_prob must lie in [0, 1]");
    if (!(de_crossover_rate >= 0.0 && de_crossover_rate <= 1.0)) {
        throw std::invalid_argument("de_crossover_rate must lie in [0, 1]");
    }
    if (generations < 0) throw std::invalid_argument("generations must be >= 0");
    if (max_evals < 0) throw std::invalid_argument("max_evals must be >= 0");
    if (transfer_interval < 1) throw std::invalid_argument("transfer_interval must be >= 1");
    if (transfer_epochs < 0) throw std::invalid_argument("transfer_epochs must be >= 0");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

namespace {

    // Stream tags (first hash word) for the different random consumers.
    constexpr std::uint64_t kInitTag = 0;
    constexpr std::uint64_t kNetTag = 1ULL << 40;
    constexpr std::uint64_t kTransferTag = 1ULL << 41;

    template <class Fn>
    void parallel_for(std::size_t count, int workers, Fn&& fn)
    {
        if (workers <= 1 || count <= 1) {
            for (std::size_t i = 0; i < count; ++i) fn(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::atomic<bool> failed{false};
        auto body = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(body);
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    Individual blank(Chromosome c, int k)
    {
        Individual ind;
        ind.chromosome = std::move(c);
        ind.costs.assign(static_cast<std::size_t>(k), kSentinelCost);
        ind.trees.assign(static_cast<std::size_t>(k), std::nullopt);
        return ind;
    }

    void score(const Problem& problem, Individual& ind, int task)
    {
        Evaluation e = problem.evaluate(ind.chromosome, task);
        const auto t = static_cast<std::size_t>(task);
        ind.costs[t] = is_sentinel(e.cost) ? kSentinelCost : e.cost;
        ind.trees[t] = std::move(e.tree);
    }

    void update_archive(Archive& archive, const Individual& ind, int generation, long evals)
    {
        for (std::size_t j = 0; j < archive.best.size(); ++j) {
            auto& entry = archive.best[j];
            if (ind.trees[j] && ind.costs[j] < entry.cost) {
                entry.cost = ind.costs[j];
                entry.tree = ind.trees[j];
                entry.generation = generation;
                entry.evaluations = evals;
            }
        }
    }

    void log_generation(std::ostream& os, int generation, long evals, const Archive& archive)
    {
        char buf[64];
        os << "gen\t" << generation << '\t' << evals;
        for (const auto& e : archive.best) {
            std::snprintf(buf, sizeof(buf), "\t%.6e", e.cost);
            os << buf;
        }
        os << '\n';
    }

    void log_transfer(std::ostream& os, const TransferReport& r)
    {
        if (r.skipped) {
            os << "transfer\t" << r.generation << "\tskipped\t" << r.reason << '\n';
            return;
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "transfer\t%d\t%d<->%d\t%.6e->%.6e\t%.6e->%.6e\t%d/%d\n", r.generation,
                      r.task_a, r.task_b, r.loss_before_a, r.loss_after_a, r.loss_before_b, r.loss_after_b,
                      r.admitted, r.transformed);
        os << buf;
    }

} // namespace

std::vector<Individual> initialize(const Problem& problem, const SolverConfig& cfg,
                                   const std::vector<Chromosome>& seeds)
{
    cfg.validate();
    const auto& spec = problem.encoding();
    const int k = problem.task_count();
    if (seeds.size() > static_cast<std::size_t>(cfg.pop_size)) {
        throw std::invalid_argument("initialize: more seed chromosomes than pop_size");
    }
    std::vector<Individual> pop;
    for (int i = 0; i < cfg.pop_size; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (idx < seeds.size()) {
            validate_chromosome(seeds[idx], spec);
            pop.push_back(blank(seeds[idx], k));
        } else {
            auto rng = derived_stream(cfg.master_seed, kInitTag, idx);
            pop.push_back(blank(random_chromosome(spec, rng), k));
        }
    }
    const auto jobs = pop.size() * static_cast<std::size_t>(k);
    parallel_for(jobs, cfg.workers, [&](std::size_t job) {
        score(problem, pop[job / static_cast<std::size_t>(k)], static_cast<int>(job % static_cast<std::size_t>(k)));
    });
    assign_metrics(pop);
    return pop;
}

EvolveResult evolve(const Problem& problem, const SolverConfig& cfg, const EvolveOptions& options)
{
    cfg.validate();
    const auto& spec = problem.encoding();
    const int k = problem.task_count();
    if (k < 1) throw std::invalid_argument("evolve: no tasks");
    const auto n = static_cast<std::size_t>(cfg.pop_size);

    EvolveResult res;
    res.archive.best.assign(static_cast<std::size_t>(k), ArchiveEntry{});
    res.population = initialize(problem, cfg, options.initial);
    res.evaluations = static_cast<long>(n) * k;
    for (const auto& ind : res.population) update_archive(res.archive, ind, 0, res.evaluations);
    auto& pop = res.population;

    auto report = [&](int g, const TransferReport* tr) {
        if (options.log) {
            if (tr) log_transfer(*options.log, *tr);
            log_generation(*options.log, g, res.evaluations, res.archive);
        }
        if (options.on_generation) {
            GenerationInfo info{g, res.evaluations, &pop, &res.archive, tr};
            options.on_generation(info);
        }
    };
    report(0, nullptr);

    std::vector<TransferNet> nets;
    for (int j = 0; j < k; ++j) {
        auto rng = derived_stream(cfg.master_seed, kNetTag, static_cast<std::uint64_t>(j));
        nets.emplace_back(spec.genome_len(), rng);
    }
    const ReproductionConfig rcfg{cfg.rmp, cfg.mutation_prob, cfg.de_scale, cfg.de_crossover_rate};
    const TransferConfig tcfg{cfg.transfer_epochs, cfg.transfer_learning_rate, kStabilityEpsilon};

    for (int g = 1; g <= cfg.generations; ++g) {
        if (res.evaluations + static_cast<long>(n) > cfg.max_evals) break;
        std::vector<Individual> offspring(n);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            auto rng = derived_stream(cfg.master_seed, static_cast<std::uint64_t>(g), i);
            Offspring o = reproduce(i, pop, spec, rcfg, rng);
            Individual ind = blank(std::move(o.chromosome), k);
            ind.skill_factor = o.skill_factor;
            score(problem, ind, o.skill_factor);
            offspring[i] = std::move(ind);
        });
        for (const auto& ind : offspring) {
            ++res.evaluations;
            update_archive(res.archive, ind, g, res.evaluations);
        }

        std::vector<bool> redundant(n);
        for (std::size_t i = 0; i < n; ++i) redundant[i] = is_redundant(pop, i);
        std::vector<Individual> merged = pop;
        merged.insert(merged.end(), offspring.begin(), offspring.end());
        assign_metrics(merged);
        for (std::size_t i = 0; i < n; ++i) {
            if (offspring_survives(merged[i].scalar_fitness, merged[n + i].scalar_fitness, redundant[i])) {
                pop[i] = std::move(merged[n + i]);
            }
        }
        assign_metrics(pop);

        std::optional<TransferReport> tr;
        if (cfg.transfer_enabled && k >= 2 && g % cfg.transfer_interval == 0
            && res.evaluations + static_cast<long>(n) <= cfg.max_evals) {
            auto rng = derived_stream(cfg.master_seed, kTransferTag, static_cast<std::uint64_t>(g));
            auto evaluator = [&](std::vector<Individual>& batch) {
                parallel_for(batch.size(), cfg.workers,
                             [&](std::size_t i) { score(problem, batch[i], batch[i].skill_factor); });
                for (const auto& ind : batch) {
                    ++res.evaluations;
                    update_archive(res.archive, ind, g, res.evaluations);
                }
            };
            tr = transfer_event(pop, spec, nets, tcfg, rng, evaluator);
            tr->generation = g;
            res.transfers.push_back(*tr);
        }
        res.generations = g;
        report(g, tr ? &*tr : nullptr);
    }
    return res;
}

} // namespace nmips
