#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "nmips/expr.hpp"
#include "nmips/genome.hpp"

namespace nmips {

/// Result of scoring one chromosome on one task.
struct Evaluation {
    double cost = 0.0;
    ExprTree tree; // constant-tuned expression
};

/// A set of K tasks sharing one encoding. Implementations must be pure and
/// safe to call concurrently.
class Problem {
public:
    virtual ~Problem() = default;
    [[nodiscard]] virtual const EncodingSpec& encoding() const = 0;
    [[nodiscard]] virtual int task_count() const = 0;
    [[nodiscard]] virtual Evaluation evaluate(const Chromosome& chromosome, int task) const = 0;
};

struct Individual {
    Chromosome chromosome;
    std::vector<double> costs;                // sentinel where not evaluated
    std::vector<std::optional<ExprTree>> trees; // tuned tree per evaluated task
    int skill_factor = 0;
    double scalar_fitness = 0.0;
};

/// Factorial ranks, stored task-major: rank(j, i) for task j, individual i.
struct RankTable {
    int tasks = 0;
    int size = 0;
    std::vector<int> ranks;

    [[nodiscard]] int rank(int task, int individual) const
    {
        return ranks[static_cast<std::size_t>(task) * static_cast<std::size_t>(size)
                     + static_cast<std::size_t>(individual)];
    }
};

/// costs[j][i]: ascending per task, ties to the lower index.
RankTable compute_ranks(const std::vector<std::vector<double>>& costs);

/// Ranks the population and sets every skill factor and scalar fitness.
/// Only tasks with a non-sentinel cost compete for the skill factor (all
/// tasks if there is none); argmin ties go to the lower task index.
RankTable assign_metrics(std::vector<Individual>& population);

/// Index of the highest scalar fitness, ties to the lower index.
int best_index(const std::vector<Individual>& population);

/// True if some lower-indexed individual has an identical chromosome.
bool is_redundant(const std::vector<Individual>& population, std::size_t index);

/// Offspring wins on strictly higher scalar fitness or a redundant parent.
bool offspring_survives(double phi_parent, double phi_offspring, bool parent_redundant);

struct ReproductionConfig {
    double rmp = 0.2;
    double mutation_prob = 0.002;
    double de_scale = 0.5;
    double de_crossover_rate = 0.5;
};

struct Offspring {
    Chromosome chromosome;
    int skill_factor = 0;
    bool from_crossover = false; // GA branch taken
};

/// With probability rmp: one-point crossover with a random partner plus
/// uniform mutation, skill factor inherited from either parent. Otherwise
/// DE/best/1 with binomial crossover and modulo repair, skill factor of the
/// parent.
Offspring reproduce(std::size_t parent, const std::vector<Individual>& population, const EncodingSpec& spec,
                    const ReproductionConfig& cfg, std::mt19937_64& rng);

/// Nearest integer, then wrapped into the position's legal domain.
std::int32_t repair_gene(double raw, const GeneDomain& domain);

/// Independent random stream for (seed, a, b).
std::mt19937_64 derived_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

} // namespace nmips
