#include "nmips/pdefam.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nmips {

namespace {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

std::string_view family_name(Family f)
{
    switch (f) {
    case Family::Adv1D: return "Adv1D";
    case Family::Burgers1D: return "Burgers1D";
    case Family::AdvDiff1D: return "AdvDiff1D";
    case Family::Adv2D: return "Adv2D";
    case Family::NS2D: return "NS2D";
    case Family::Adv3D: return "Adv3D";
    }
    return "?";
}

std::optional<Family> family_from_name(std::string_view name)
{
    for (Family f : kAllFamilies) {
        if (family_name(f) == name) return f;
    }
    return std::nullopt;
}

std::vector<Var> family_spatial_variables(Family f)
{
    switch (f) {
    case Family::Adv1D:
    case Family::Burgers1D:
    case Family::AdvDiff1D:
        return {Var::X};
    case Family::Adv2D:
    case Family::NS2D:
        return {Var::X, Var::Y};
    case Family::Adv3D:
        return {Var::X, Var::Y, Var::Z};
    }
    return {};
}

std::vector<Var> family_variables(Family f)
{
    auto vars = family_spatial_variables(f);
    vars.push_back(Var::T);
    return vars;
}

std::size_t family_param_count(Family f)
{
    switch (f) {
    case Family::Adv1D:
    case Family::Burgers1D:
    case Family::NS2D:
        return 1;
    case Family::AdvDiff1D:
    case Family::Adv2D:
        return 2;
    case Family::Adv3D:
        return 3;
    }
    return 0;
}

SymbolLibrary family_library(Family f)
{
    std::vector<Op> fns{Op::Add, Op::Sub, Op::Mul, Op::Sin};
    if (f == Family::Burgers1D || f == Family::AdvDiff1D || f == Family::NS2D) {
        fns.push_back(Op::Exp);
        fns.push_back(Op::Log);
    }
    const auto vars = family_variables(f);
    return make_library(std::move(fns), vars);
}

std::vector<std::vector<double>> default_params(Family f)
{
    switch (f) {
    case Family::Adv1D: return {{0.1}, {0.4}, {0.7}, {1.0}};
    case Family::Burgers1D: return {{0.001}, {0.004}, {0.007}, {0.01}};
    // (beta, alpha): advection speed, diffusion coefficient
    case Family::AdvDiff1D: return {{0.1, 0.001}, {0.4, 0.002}, {0.7, 0.001}, {1.0, 0.004}};
    case Family::Adv2D: return {{0.1, 0.842}, {0.4, 0.349}, {0.7, 0.969}, {1.0, 0.186}};
    case Family::NS2D: return {{0.005}, {0.02}, {0.035}, {0.05}};
    case Family::Adv3D:
        return {{0.1, 0.983, 0.548}, {0.4, 0.579, 0.573}, {0.7, 0.818, 0.951}, {1.0, 0.697, 0.204}};
    }
    return {};
}

bool family_is_analytic(Family f)
{
    return f == Family::Adv1D || f == Family::Adv2D || f == Family::Adv3D || f == Family::NS2D;
}

ICSpec draw_ic(Family f, std::mt19937_64& rng)
{
    ICSpec ic;
    std::uniform_real_distribution<double> amp(0.0, 1.0);
    std::uniform_int_distribution<int> wave(1, kIcMaxWavenumber);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    switch (f) {
    case Family::Adv1D:
    case Family::Burgers1D:
    case Family::AdvDiff1D:
        ic.mode = IcMode::SineSum;
        for (int i = 0; i < kIcComponents1D; ++i) {
            SineComponent c;
            c.amplitude = amp(rng);
            c.wavenumber = wave(rng);
            c.phase = phase(rng);
            ic.components.push_back(c);
        }
        break;
    case Family::Adv2D:
    case Family::Adv3D:
        ic.mode = IcMode::SineProduct;
        for (std::size_t i = 0; i < family_spatial_variables(f).size(); ++i) {
            SineComponent c;
            c.amplitude = 1.0;
            c.wavenumber = wave(rng);
            c.phase = phase(rng);
            ic.components.push_back(c);
        }
        break;
    case Family::NS2D:
        ic.mode = IcMode::TaylorGreen;
        break;
    }
    return ic;
}

TaskSpec make_task(Family f, std::vector<double> params, ICSpec ic, int task_id)
{
    if (params.size() != family_param_count(f)) {
        throw std::invalid_argument(std::string(family_name(f)) + " expects " + std::to_string(family_param_count(f))
                                    + " parameters, got " + std::to_string(params.size()));
    }
    for (double p : params) {
        if (!(p > 0.0) || !std::isfinite(p)) {
            throw std::invalid_argument(std::string(family_name(f)) + ": parameters must be strictly positive");
        }
    }
    const auto spatial = family_spatial_variables(f);
    if (ic.mode == IcMode::SineProduct && ic.components.size() != spatial.size()) {
        throw std::invalid_argument("sine-product IC needs one component per spatial axis");
    }
    TaskSpec t;
    t.family = f;
    t.params = std::move(params);
    t.ic = std::move(ic);
    t.library = family_library(f);
    t.task_id = task_id;
    for (Var v : spatial) t.domain[static_cast<std::size_t>(v)] = {0.0, 1.0};
    const double t_end = (f == Family::Adv2D || f == Family::Adv3D) ? 1.0 : 2.0;
    t.domain[static_cast<std::size_t>(Var::T)] = {0.0, t_end};
    return t;
}

std::vector<TaskSpec> make_family_tasks(Family f, const std::vector<std::vector<double>>& params,
                                        std::mt19937_64& rng, bool shared_ic)
{
    std::vector<TaskSpec> tasks;
    std::optional<ICSpec> shared;
    for (std::size_t i = 0; i < params.size(); ++i) {
        ICSpec ic;
        if (shared_ic) {
            if (!shared) shared = draw_ic(f, rng);
            ic = *shared;
        } else {
            ic = draw_ic(f, rng);
        }
        tasks.push_back(make_task(f, params[i], std::move(ic), static_cast<int>(i)));
    }
    return tasks;
}

namespace {

    // Shift per spatial axis at time t for the advection families.
    std::array<double, 3> advection_speeds(const TaskSpec& task)
    {
        switch (task.family) {
        case Family::Adv1D: return {task.params[0], 0.0, 0.0};
        case Family::Adv2D: return {task.params[0], task.params[1], 0.0};
        case Family::Adv3D: return {task.params[0], task.params[1], task.params[2]};
        default: return {0.0, 0.0, 0.0};
        }
    }

} // namespace

double ic_value(const TaskSpec& task, const Point& p)
{
    const auto& ic = task.ic;
    switch (ic.mode) {
    case IcMode::SineSum: {
        double s = 0.0;
        for (const auto& c : ic.components) {
            s += c.amplitude * std::sin(kTwoPi * c.wavenumber * p[0] + c.phase);
        }
        return s;
    }
    case IcMode::SineProduct: {
        const auto spatial = task.spatial_variables();
        double prod = 1.0;
        for (std::size_t j = 0; j < ic.components.size(); ++j) {
            const auto& c = ic.components[j];
            prod *= c.amplitude * std::sin(kTwoPi * c.wavenumber * p[static_cast<std::size_t>(spatial[j])] + c.phase);
        }
        return prod;
    }
    case IcMode::TaylorGreen:
        return std::sin(kTwoPi * p[0]) * std::sin(kTwoPi * p[1]);
    }
    return 0.0;
}

double analytic_value(const TaskSpec& task, const Point& p)
{
    if (!family_is_analytic(task.family)) {
        throw std::invalid_argument(std::string(family_name(task.family)) + " has no closed-form solution");
    }
    const double t = p[static_cast<std::size_t>(Var::T)];
    if (task.family == Family::NS2D) {
        const double nu = task.params[0];
        return ic_value(task, p) * std::exp(-8.0 * std::numbers::pi * std::numbers::pi * nu * t);
    }
    const auto speed = advection_speeds(task);
    Point shifted = p;
    for (std::size_t a = 0; a < 3; ++a) shifted[a] = p[a] - speed[a] * t;
    return ic_value(task, shifted);
}

std::optional<ExprTree> exact_solution_tree(const TaskSpec& task)
{
    if (!family_is_analytic(task.family)) return std::nullopt;
    using namespace build;
    const NodePtr t = make_variable(Var::T);
    if (task.family == Family::NS2D) {
        const double nu = task.params[0];
        NodePtr sx = sin(mul(lit(kTwoPi), make_variable(Var::X)));
        NodePtr sy = sin(mul(lit(kTwoPi), make_variable(Var::Y)));
        NodePtr decay = exp(mul(lit(-8.0 * std::numbers::pi * std::numbers::pi * nu), t));
        return ExprTree(mul(mul(sx, sy), decay), {});
    }
    const auto speed = advection_speeds(task);
    const auto spatial = task.spatial_variables();
    auto wave = [&](const SineComponent& c, Var axis) {
        const double k = kTwoPi * c.wavenumber;
        NodePtr arg = sub(make_variable(axis), mul(lit(speed[static_cast<std::size_t>(axis)]), t));
        return mul(lit(c.amplitude), sin(add(mul(lit(k), arg), lit(c.phase))));
    };
    NodePtr root;
    if (task.ic.mode == IcMode::SineSum) {
        for (const auto& c : task.ic.components) root = root ? add(root, wave(c, Var::X)) : wave(c, Var::X);
    } else {
        for (std::size_t j = 0; j < task.ic.components.size(); ++j) {
            NodePtr w = wave(task.ic.components[j], spatial[j]);
            root = root ? mul(root, w) : w;
        }
    }
    if (!root) root = lit(0.0);
    return ExprTree(root, {});
}

ExprTree residual_tree(const TaskSpec& task, const ExprTree& u)
{
    using namespace build;
    const ExprTree flat = u.inlined();
    auto d1 = [&](Var v) { return differentiate(flat, v, 1).root(); };
    auto d2 = [&](Var v) { return differentiate(flat, v, 2).root(); };
    const auto& p = task.params;
    NodePtr r = d1(Var::T);
    switch (task.family) {
    case Family::Adv1D:
        r = add(r, mul(lit(p[0]), d1(Var::X)));
        break;
    case Family::Burgers1D:
        r = sub(add(r, mul(flat.root(), d1(Var::X))), mul(lit(p[0] / std::numbers::pi), d2(Var::X)));
        break;
    case Family::AdvDiff1D:
        r = sub(add(r, mul(lit(p[0]), d1(Var::X))), mul(lit(p[1]), d2(Var::X)));
        break;
    case Family::Adv2D:
        r = add(add(r, mul(lit(p[0]), d1(Var::X))), mul(lit(p[1]), d1(Var::Y)));
        break;
    case Family::NS2D:
        // Taylor-Green regime: the advection term u . grad(omega) vanishes.
        r = sub(r, mul(lit(p[0]), add(d2(Var::X), d2(Var::Y))));
        break;
    case Family::Adv3D:
        r = add(add(add(r, mul(lit(p[0]), d1(Var::X))), mul(lit(p[1]), d1(Var::Y))), mul(lit(p[2]), d1(Var::Z)));
        break;
    }
    return ExprTree(r, flat.constants());
}

std::optional<double> residual(const TaskSpec& task, const ExprTree& u, const Point& point)
{
    if (!eval(u, point)) return std::nullopt;
    return eval(residual_tree(task, u), point);
}

ConditionSet sample_conditions(const TaskSpec& task, std::size_t n_interior, std::size_t n_ic, std::size_t n_bc,
                               std::mt19937_64& rng)
{
    const auto vars = task.variables();
    const auto spatial = task.spatial_variables();
    auto uniform = [&](Var v) {
        const auto& b = task.bounds(v);
        return std::uniform_real_distribution<double>(b.lo, b.hi)(rng);
    };
    ConditionSet cs;
    for (std::size_t i = 0; i < n_interior; ++i) {
        Point p{};
        for (Var v : vars) p[static_cast<std::size_t>(v)] = uniform(v);
        cs.interior.push_back(p);
    }
    for (std::size_t i = 0; i < n_ic; ++i) {
        Point p{};
        for (Var v : spatial) p[static_cast<std::size_t>(v)] = uniform(v);
        p[static_cast<std::size_t>(Var::T)] = task.bounds(Var::T).lo;
        cs.ic_points.push_back(p);
        cs.ic_values.push_back(ic_value(task, p));
    }
    for (Var axis : spatial) {
        for (std::size_t i = 0; i < n_bc; ++i) {
            Point p{};
            for (Var v : vars) p[static_cast<std::size_t>(v)] = uniform(v);
            Point lo = p;
            Point hi = p;
            lo[static_cast<std::size_t>(axis)] = task.bounds(axis).lo;
            hi[static_cast<std::size_t>(axis)] = task.bounds(axis).hi;
            cs.bc_lower.push_back(lo);
            cs.bc_upper.push_back(hi);
        }
    }
    return cs;
}

} // namespace nmips
