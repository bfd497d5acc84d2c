#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nmips/mfo.hpp"
#include "nmips/transfer.hpp"

namespace nmips {

struct SolverConfig {
    int pop_size = 50;
    double rmp = 0.2;
    double mutation_prob = 0.002;
    int generations = 100;
    long max_evals = 5000;
    int transfer_interval = 10;
    double de_scale = 0.5;
    double de_crossover_rate = 0.5;
    std::uint64_t master_seed = 1;
    bool transfer_enabled = true;
    int transfer_epochs = 100;
    double transfer_learning_rate = 0.01;
    int workers = 1; // evaluation threads; results do not depend on it

    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
};

struct ArchiveEntry {
    std::optional<ExprTree> tree;
    double cost = 1e30;
    int generation = -1;
    long evaluations = 0; // evaluation counter when the entry was found
};

struct Archive {
    std::vector<ArchiveEntry> best; // one per task
};

struct GenerationInfo {
    int generation = 0; // 0 is the initial population
    long evaluations = 0;
    const std::vector<Individual>* population = nullptr;
    const Archive* archive = nullptr;
    const TransferReport* transfer = nullptr; // set when an event ran this generation
};

struct EvolveOptions {
    std::vector<Chromosome> initial; // seeds the first individuals of the population
    std::ostream* log = nullptr;     // tab-separated progress lines
    std::function<void(const GenerationInfo&)> on_generation;
};

struct EvolveResult {
    Archive archive;
    std::vector<Individual> population;
    long evaluations = 0;
    int generations = 0; // completed generations after initialisation
    std::vector<TransferReport> transfers;
};

/// N random individuals, each scored on every task, ranked.
std::vector<Individual> initialize(const Problem& problem, const SolverConfig& cfg,
                                   const std::vector<Chromosome>& seeds = {});

/// The multifactorial loop with periodic affine transfer.
EvolveResult evolve(const Problem& problem, const SolverConfig& cfg, const EvolveOptions& options = {});

} // namespace nmips
