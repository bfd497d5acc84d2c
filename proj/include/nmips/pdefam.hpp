#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "nmips/exprcalc.hpp"
#include "nmips/genome.hpp"

namespace nmips {

enum class Family : std::uint8_t { Adv1D, Burgers1D, AdvDiff1D, Adv2D, NS2D, Adv3D };

inline constexpr std::array<Family, 6> kAllFamilies = {Family::Adv1D, Family::Burgers1D, Family::AdvDiff1D,
                                                       Family::Adv2D, Family::NS2D, Family::Adv3D};

std::string_view family_name(Family f);
std::optional<Family> family_from_name(std::string_view name);

/// Independent variables in canonical order (spatial axes, then t).
std::vector<Var> family_variables(Family f);
std::vector<Var> family_spatial_variables(Family f);
/// Number of entries in a task's parameter vector.
std::size_t family_param_count(Family f);
/// Advection families use {+,-,*,sin}; the others add exp and log.
SymbolLibrary family_library(Family f);
/// The four parameter vectors of the benchmark task tables.
std::vector<std::vector<double>> default_params(Family f);
/// Whether the solution is known in closed form (data generated analytically).
bool family_is_analytic(Family f);

enum class IcMode : std::uint8_t { SineSum, SineProduct, TaylorGreen };

struct SineComponent {
    double amplitude = 1.0;
    int wavenumber = 1; // n_i; k_i = 2*pi*n_i on the unit domain
    double phase = 0.0;
};

struct ICSpec {
    IcMode mode = IcMode::SineSum;
    std::vector<SineComponent> components;
    int n_max = 8;
};

inline constexpr int kIcMaxWavenumber = 8;
inline constexpr int kIcComponents1D = 2;

/// Random IC for a family: two-term sine sum in 1D, unit-amplitude sine
/// product in 2D/3D advection, the fixed Taylor-Green field for NS2D.
ICSpec draw_ic(Family f, std::mt19937_64& rng);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

struct TaskSpec {
    Family family = Family::Adv1D;
    std::vector<double> params;
    std::array<Interval, kNumVars> domain{};
    ICSpec ic;
    SymbolLibrary library;
    int task_id = 0;

    [[nodiscard]] std::vector<Var> variables() const { return family_variables(family); }
    [[nodiscard]] std::vector<Var> spatial_variables() const { return family_spatial_variables(family); }
    [[nodiscard]] const Interval& bounds(Var v) const { return domain[static_cast<std::size_t>(v)]; }
};

/// Validates parameters (count, positivity) and fills domain and library.
TaskSpec make_task(Family f, std::vector<double> params, ICSpec ic, int task_id);

/// One task per parameter vector; each draws its own IC unless `shared_ic`.
std::vector<TaskSpec> make_family_tasks(Family f, const std::vector<std::vector<double>>& params,
                                        std::mt19937_64& rng, bool shared_ic = false);

/// PDE operator applied to a candidate u, as an expression tree over the same
/// constants as u.
ExprTree residual_tree(const TaskSpec& task, const ExprTree& u);

/// Residual at one point; nullopt when u (or a derivative) is invalid there.
std::optional<double> residual(const TaskSpec& task, const ExprTree& u, const Point& point);

/// u0 at a spatial point (t ignored).
double ic_value(const TaskSpec& task, const Point& point);

/// Closed-form solution value for analytic families.
double analytic_value(const TaskSpec& task, const Point& point);

/// Expression tree of the closed-form solution (analytic families only).
std::optional<ExprTree> exact_solution_tree(const TaskSpec& task);

struct ConditionSet {
    PointSet interior;
    PointSet ic_points;
    std::vector<double> ic_values;
    // Paired points differing only on one spatial axis (lower vs upper bound).
    PointSet bc_lower;
    PointSet bc_upper;
};

/// Uniform collocation sets. Periodic BCs are sampled as n_bc pairs per
/// spatial axis.
ConditionSet sample_conditions(const TaskSpec& task, std::size_t n_interior, std::size_t n_ic, std::size_t n_bc,
                               std::mt19937_64& rng);

inline constexpr std::size_t kDefaultInterior = 256;
inline constexpr std::size_t kDefaultIc = 64;
inline constexpr std::size_t kDefaultBc = 64;

} // namespace nmips
