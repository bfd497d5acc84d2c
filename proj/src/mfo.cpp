#include "nmips/mfo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nmips/fitness.hpp"

namespace nmips {

RankTable compute_ranks(const std::vector<std::vector<double>>& costs)
{
    RankTable t;
    t.tasks = static_cast<int>(costs.size());
    t.size = costs.empty() ? 0 : static_cast<int>(costs[0].size());
    t.ranks.assign(static_cast<std::size_t>(t.tasks) * static_cast<std::size_t>(t.size), 0);
    std::vector<int> order(static_cast<std::size_t>(t.size));
    for (int j = 0; j < t.tasks; ++j) {
        const auto& c = costs[static_cast<std::size_t>(j)];
        if (static_cast<int>(c.size()) != t.size) throw std::invalid_argument("compute_ranks: ragged cost matrix");
        std::iota(order.begin(), order.end(), 0);
        // Sentinels (and NaN) sort after every finite cost.
        auto key = [&](int i) { return is_sentinel(c[static_cast<std::size_t>(i)]) ? kSentinelCost : c[static_cast<std::size_t>(i)]; };
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
        for (int r = 0; r < t.size; ++r) {
            t.ranks[static_cast<std::size_t>(j) * static_cast<std::size_t>(t.size)
                    + static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r + 1;
        }
    }
    return t;
}

RankTable assign_metrics(std::vector<Individual>& population)
{
    if (population.empty()) return {};
    const std::size_t k = population[0].costs.size();
    std::vector<std::vector<double>> costs(k, std::vector<double>(population.size()));
    for (std::size_t i = 0; i < population.size(); ++i) {
        if (population[i].costs.size() != k) throw std::invalid_argument("assign_metrics: inconsistent task count");
        for (std::size_t j = 0; j < k; ++j) costs[j][i] = population[i].costs[j];
    }
    RankTable t = compute_ranks(costs);
    for (std::size_t i = 0; i < population.size(); ++i) {
        auto& ind = population[i];
        bool any_finite = false;
        for (double c : ind.costs) any_finite = any_finite || !is_sentinel(c);
        int best_task = -1;
        int best_rank = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (any_finite && is_sentinel(ind.costs[j])) continue;
            const int r = t.rank(static_cast<int>(j), static_cast<int>(i));
            if (best_task < 0 || r < best_rank) {
                best_task = static_cast<int>(j);
                best_rank = r;
            }
        }
        ind.skill_factor = best_task;
        ind.scalar_fitness = 1.0 / best_rank;
    }
    return t;
}

int best_index(const std::vector<Individual>& population)
{
    int best = 0;
    for (std::size_t i = 1; i < population.size(); ++i) {
        if (population[i].scalar_fitness > population[static_cast<std::size_t>(best)].scalar_fitness) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

bool is_redundant(const std::vector<Individual>& population, std::size_t index)
{
    for (std::size_t i = 0; i < index; ++i) {
        if (population[i].chromosome == population[index].chromosome) return true;
    }
    return false;
}

bool offspring_survives(double phi_parent, double phi_offspring, bool parent_redundant)
{
    return phi_offspring > phi_parent || parent_redundant;
}

std::int32_t repair_gene(double raw, const GeneDomain& domain)
{
    const long long size = domain.size();
    if (size <= 0) throw ContractError("repair_gene: empty domain");
    if (!std::isfinite(raw)) raw = 0.0;
    raw = std::clamp(raw, -1e15, 1e15);
    const long long r = std::llround(raw);
    if (r >= INT32_MIN && r <= INT32_MAX && domain.contains(static_cast<int>(r))) return static_cast<std::int32_t>(r);
    const long long lo = domain.intervals.front().first;
    long long k = (r - lo) % size;
    if (k < 0) k += size;
    return domain.at(static_cast<int>(k));
}

namespace {

    int uniform_other(std::size_t n, std::size_t exclude_a, std::size_t exclude_b, std::mt19937_64& rng)
    {
        for (;;) {
            const auto r = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
            if (r != exclude_a && r != exclude_b) return static_cast<int>(r);
        }
    }

} // namespace

Offspring reproduce(std::size_t parent, const std::vector<Individual>& population, const EncodingSpec& spec,
                    const ReproductionConfig& cfg, std::mt19937_64& rng)
{
    const std::size_t n = population.size();
    if (n < 4) throw std::invalid_argument("reproduce: population must have at least 4 individuals");
    if (parent >= n) throw std::out_of_range("reproduce: parent index");
    const auto& zi = population[parent].chromosome.genes;
    const std::size_t len = zi.size();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Offspring off;
    off.chromosome.genes = zi;
    auto& genes = off.chromosome.genes;

    if (unit(rng) < cfg.rmp) {
        off.from_crossover = true;
        const auto r1 = static_cast<std::size_t>(uniform_other(n, parent, parent, rng));
        const auto& zr = population[r1].chromosome.genes;
        const std::size_t cut = len > 1 ? std::uniform_int_distribution<std::size_t>(1, len - 1)(rng) : 0;
        std::copy(zr.begin() + static_cast<std::ptrdiff_t>(cut), zr.end(),
                  genes.begin() + static_cast<std::ptrdiff_t>(cut));
        for (std::size_t p = 0; p < len; ++p) {
            if (unit(rng) < cfg.mutation_prob) {
                const GeneDomain dom = spec.domain(static_cast<int>(p));
                genes[p] = dom.at(std::uniform_int_distribution<int>(0, dom.size() - 1)(rng));
            }
        }
        off.skill_factor = unit(rng) < 0.5 ? population[parent].skill_factor : population[r1].skill_factor;
        return off;
    }

    const auto& zb = population[static_cast<std::size_t>(best_index(population))].chromosome.genes;
    const auto r1 = static_cast<std::size_t>(uniform_other(n, parent, parent, rng));
    const auto r2 = static_cast<std::size_t>(uniform_other(n, parent, r1, rng));
    const auto& za = population[r1].chromosome.genes;
    const auto& zc = population[r2].chromosome.genes;
    const std::size_t forced = std::uniform_int_distribution<std::size_t>(0, len - 1)(rng);
    for (std::size_t p = 0; p < len; ++p) {
        const bool take = unit(rng) < cfg.de_crossover_rate || p == forced;
        if (!take) continue;
        const double mutant = zb[p] + cfg.de_scale * (static_cast<double>(za[p]) - static_cast<double>(zc[p]));
        genes[p] = repair_gene(mutant, spec.domain(static_cast<int>(p)));
    }
    off.skill_factor = population[parent].skill_factor;
    return off;
}

namespace {

    std::uint64_t splitmix(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

} // namespace

std::mt19937_64 derived_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    const std::uint64_t h = splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x9e3779b97f4a7c15ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

} // namespace nmips
