#pragma once

#include <filesystem>
#include <random>
#include <stdexcept>
#include <vector>

#include "nmips/exprcalc.hpp"
#include "nmips/pdefam.hpp"

namespace nmips {

enum class Provenance : std::uint8_t { Analytic, FDM, CrankNicolson };

std::string_view provenance_name(Provenance p);

struct Dataset {
    std::vector<Var> variables; // column order of the points
    PointSet points;
    std::vector<double> values;
    Provenance provenance = Provenance::Analytic;
    int task_id = 0;
    double noise_sigma_frac = 0.0;

    [[nodiscard]] std::size_t size() const { return values.size(); }
};

inline constexpr std::size_t kDefaultDataPoints = 1100;

/// Dense solution on a tensor grid; the last axis varies fastest.
struct SolutionGrid {
    std::vector<Var> axis_vars;
    std::vector<std::vector<double>> axes;
    std::vector<double> values;
    double dx = 0.0;
    double dt = 0.0;

    [[nodiscard]] std::size_t node_count() const { return values.size(); }
    [[nodiscard]] Point node(std::size_t flat_index) const;
    [[nodiscard]] PointSet all_points() const;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform samples of the closed-form solution.
Dataset gen_analytic(const TaskSpec& task, std::size_t n_points, std::mt19937_64& rng);

struct BurgersOptions {
    int nx = 100;
    int nt = 1000;
    int store_every = 1; // keep every k-th time level (the last is always kept)
};

/// Conservative explicit scheme: Rusanov (local Lax-Friedrichs) flux for
/// u^2/2, central second difference for (nu/pi) u_xx, forward Euler, periodic.
SolutionGrid solve_burgers_fdm(const TaskSpec& task, const BurgersOptions& opt = {});

struct CrankNicolsonOptions {
    int nx = 100;
    int nt = 100;
    int store_every = 1; // keep every k-th time level (the last is always kept)
};

/// Crank-Nicolson in time, centred differences in space, periodic BCs
/// (cyclic tridiagonal solve per step).
SolutionGrid solve_adv_diff_cn(const TaskSpec& task, const CrankNicolsonOptions& opt = {});

/// Total variation of one time level of a periodic 1D grid.
double total_variation(const SolutionGrid& grid, std::size_t time_level);

/// Distinct grid nodes drawn uniformly without replacement.
Dataset sample_grid(const SolutionGrid& grid, std::size_t n_points, std::mt19937_64& rng);

/// Root-mean-square of the dataset values (noise scale base).
double field_rms(const Dataset& data);

/// u~ = u + N(0, (sigma_frac * rms)^2); points untouched.
Dataset add_noise(const Dataset& data, double sigma_frac, std::mt19937_64& rng);

/// CSV with header naming the variable columns then u; 17 significant digits.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
/// If `expected` is non-empty the header must name exactly those variables.
Dataset load_dataset(const std::filesystem::path& path, const std::vector<Var>& expected = {});

/// Generates the training dataset for a task (analytic or numerical).
Dataset generate_dataset(const TaskSpec& task, std::size_t n_points, std::mt19937_64& rng);

/// Held-out grid for test MSE: `per_axis` nodes per axis, reduced uniformly so
/// the node count stays below `max_nodes`. Numerical families use the solver
/// grid with time levels thinned to at most `per_axis`.
SolutionGrid heldout_grid(const TaskSpec& task, int per_axis = 101, std::size_t max_nodes = 2'000'000);

} // namespace nmips
