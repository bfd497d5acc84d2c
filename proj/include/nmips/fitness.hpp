#pragma once

#include <utility>

#include "nmips/datagen.hpp"
#include "nmips/exprcalc.hpp"
#include "nmips/pdefam.hpp"

namespace nmips {

/// Cost assigned to candidates whose evaluation produced a non-finite value.
inline constexpr double kSentinelCost = 1e30;

inline bool is_sentinel(double cost) { return !(cost < kSentinelCost); }

struct LossBreakdown {
    double data_loss = kSentinelCost;
    double residual_loss = kSentinelCost;
    double ic_loss = kSentinelCost;
    double bc_loss = kSentinelCost;
    double total = kSentinelCost;

    [[nodiscard]] bool poisoned() const { return is_sentinel(total); }
};

struct ConstOptConfig {
    int max_steps = 50;
    double learning_rate = 0.05;
    bool include_physics_terms = true;
};

struct FitnessConfig {
    double lambda_phys = 0.1;
    ConstOptConfig opt;
};

struct PhysicsLoss {
    double residual = 0.0;
    double ic = 0.0;
    double bc = 0.0;
};

/// RMSE of the expression against the records; kSentinelCost if poisoned.
double data_loss(const ExprTree& u, const Dataset& data);

/// RMS of the PDE residual, the IC mismatch and the periodic BC mismatch.
/// Every field is kSentinelCost when the expression is poisoned.
PhysicsLoss physics_loss(const ExprTree& u, const TaskSpec& task, const ConditionSet& cond);

/// data_loss + lambda_phys * (residual + ic + bc).
LossBreakdown combined_loss(const ExprTree& u, const TaskSpec& task, const Dataset& data, const ConditionSet& cond,
                            const FitnessConfig& cfg);

/// Gradient descent on the constants. A step that raises the loss (or
/// poisons the expression) is rejected and the step size halved; accepted
/// steps grow it by 20%.
ExprTree optimize_constants(const ExprTree& u, const TaskSpec& task, const Dataset& data, const ConditionSet& cond,
                            const FitnessConfig& cfg);

/// Tunes the constants, then scores the tuned tree.
std::pair<LossBreakdown, ExprTree> factorial_cost(const ExprTree& u, const TaskSpec& task, const Dataset& data,
                                                  const ConditionSet& cond, const FitnessConfig& cfg);

/// Mean squared error over every node of a solution grid.
double test_mse(const ExprTree& u, const SolutionGrid& grid);
/// test_mse against the task's held-out grid.
double test_mse(const ExprTree& u, const TaskSpec& task);

} // namespace nmips
