#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nmips/fitness.hpp"

using namespace nmips;

namespace {

TaskSpec seeded_task(Family f, std::size_t k, std::uint64_t seed = 2024)
{
    std::mt19937_64 rng(seed);
    return make_family_tasks(f, default_params(f), rng)[k];
}

Dataset make_data(const std::vector<Point>& pts, const std::vector<double>& vals)
{
    Dataset d;
    d.variables = {Var::X, Var::T};
    for (const auto& p : pts) d.points.push_back(p);
    d.values = vals;
    return d;
}

FitnessConfig data_only(int steps = 50)
{
    FitnessConfig cfg;
    cfg.lambda_phys = 0.0;
    cfg.opt.include_physics_terms = false;
    cfg.opt.max_steps = steps;
    return cfg;
}

// Solves the symmetric system A w = b by Gaussian elimination with pivoting.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> w(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * w[k];
        w[i] = s / a[i][i];
    }
    return w;
}

} // namespace

TEST_CASE("data loss")
{
    const auto d = make_data({make_point(1, 0, 0, 0), make_point(2, 0, 0, 0)}, {1.0, 4.0});
    CHECK(data_loss(parse_expr("x"), d) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(data_loss(parse_expr("x*x"), d) == 0.0);
    CHECK(is_sentinel(data_loss(parse_expr("log(x - 1.5)"), d)));
    CHECK_THROWS(data_loss(parse_expr("x"), Dataset{}));

    // Independent two-pass RMSE.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> pts;
    std::vector<double> vals;
    for (int i = 0; i < 777; ++i) {
        pts.push_back(make_point(u(rng), 0, 0, 2 * u(rng)));
        vals.push_back(u(rng));
    }
    const auto tree = parse_expr("sin(3*x - t)*exp(-t) + 0.2");
    std::vector<double> sq;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double e = eval(tree, pts[i]).value() - vals[i];
        sq.push_back(e * e);
    }
    const double want = std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(sq.size()));
    CHECK(data_loss(tree, make_data(pts, vals)) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("physics loss")
{
    std::mt19937_64 rng(5);
    const auto task = seeded_task(Family::Adv1D, 2);
    const auto cond = sample_conditions(task, 256, 64, 64, rng);
    const auto exact = exact_solution_tree(task).value();
    const auto pl = physics_loss(exact, task, cond);
    CHECK(pl.residual <= 1e-8);
    CHECK(pl.ic <= 1e-10);
    CHECK(pl.bc <= 1e-10);

    const auto zero = physics_loss(parse_expr("0*x"), task, cond);
    CHECK(zero.residual == 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < cond.ic_points.size(); ++i) {
        const double v = ic_value(task, cond.ic_points.at(i));
        s += v * v;
    }
    CHECK(zero.ic == doctest::Approx(std::sqrt(s / static_cast<double>(cond.ic_points.size()))));
    CHECK(zero.bc == 0.0);

    ConditionSet empty = cond;
    empty.interior = PointSet{};
    CHECK(physics_loss(parse_expr("x*t"), task, empty).residual == 0.0);

    // u = x breaks periodicity by exactly one at every BC pair.
    CHECK(physics_loss(parse_expr("x"), task, cond).bc == doctest::Approx(1.0));
    CHECK(is_sentinel(physics_loss(parse_expr("log(x - 2)"), task, cond).residual));
}

TEST_CASE("combined loss assembly")
{
    std::mt19937_64 rng(6);
    const auto task = seeded_task(Family::Adv1D, 0);
    const auto cond = sample_conditions(task, 64, 16, 16, rng);
    const auto data = generate_dataset(task, 200, rng);
    FitnessConfig cfg;
    const auto u = parse_expr("sin(6*x) + 0.5*t");
    const auto lb = combined_loss(u, task, data, cond, cfg);
    const auto pl = physics_loss(u, task, cond);
    CHECK(lb.data_loss == doctest::Approx(data_loss(u, data)));
    CHECK(lb.total == doctest::Approx(lb.data_loss + 0.1 * (pl.residual + pl.ic + pl.bc)));
    CHECK_FALSE(lb.poisoned());
    CHECK(combined_loss(parse_expr("log(x - 3)"), task, data, cond, cfg).poisoned());
}

TEST_CASE("constant tuning on simple fits")
{
    std::vector<Point> pts;
    std::vector<double> threes, twox;
    for (int i = 1; i <= 20; ++i) {
        const double x = i / 20.0;
        pts.push_back(make_point(x, 0, 0, 0));
        threes.push_back(3.0);
        twox.push_back(2.0 * x);
    }
    const auto task = seeded_task(Family::Adv1D, 0);
    const ConditionSet cond;
    const auto c = optimize_constants(parse_expr("1"), task, make_data(pts, threes), cond, data_only());
    REQUIRE(c.num_constants() == 1);
    CHECK(c.constants()[0] == doctest::Approx(3.0).epsilon(1e-3));
    const auto cx = optimize_constants(parse_expr("1*x"), task, make_data(pts, twox), cond, data_only());
    CHECK(cx.constants()[0] == doctest::Approx(2.0).epsilon(1e-3));

    // No constants: unchanged.
    const auto xt = parse_expr("x*t");
    CHECK(optimize_constants(xt, task, make_data(pts, twox), cond, data_only()).root() == xt.root());
}

TEST_CASE("constant tuning reaches the least-squares solution")
{
    const std::vector<std::string> basis = {"x", "t", "x*t", "x*x*x", "log(x)"};
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(make_point(u(rng), 0, 0, u(rng)));
    const auto task = seeded_task(Family::Adv1D, 0);
    for (int trial = 0; trial < 20; ++trial) {
        // c0*f_a + c1*f_b + c2 with distinct basis functions.
        std::vector<std::size_t> idx(basis.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::string fa = basis[idx[0]];
        const std::string fb = basis[idx[1]];
        const auto tree = parse_expr("1*(" + fa + ") + 1*(" + fb + ") + 1");
        REQUIRE(tree.num_constants() >= 3);
        std::vector<double> vals;
        for (const auto& p : pts) vals.push_back(std::sin(4 * p[0]) + p[3] * p[3] + 0.1 * u(rng));
        const auto tuned = optimize_constants(tree, task, make_data(pts, vals), {}, data_only(5000));

        // Normal equations on the design matrix [f_a, f_b, 1].
        const auto ta = parse_expr(fa);
        const auto tb = parse_expr(fb);
        std::vector<std::vector<double>> a(3, std::vector<double>(3, 0.0));
        std::vector<double> b(3, 0.0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double row[3] = {eval(ta, pts[i]).value(), eval(tb, pts[i]).value(), 1.0};
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) a[r][c] += row[r] * row[c];
                b[r] += row[r] * vals[i];
            }
        }
        const auto w = solve_dense(a, b);
        // Compare predictions rather than raw coefficients where literals in
        // the basis (e.g. exp(-t)) also became tunable constants.
        const auto oracle = make_data(pts, vals);
        double sse_oracle = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double pred = w[0] * eval(ta, pts[i]).value() + w[1] * eval(tb, pts[i]).value() + w[2];
            sse_oracle += (pred - vals[i]) * (pred - vals[i]);
        }
        const double rmse_oracle = std::sqrt(sse_oracle / static_cast<double>(pts.size()));
        const double rmse_tuned = data_loss(tuned, oracle);
        CHECK(rmse_tuned <= rmse_oracle + 1e-4);
        if (tree.num_constants() == 3) {
            for (int k = 0; k < 3; ++k) CHECK(tuned.constants()[k] == doctest::Approx(w[k]).epsilon(1e-2).scale(1.0));
        }
    }
}

TEST_CASE("factorial cost")
{
    std::mt19937_64 rng(7);
    const auto task = seeded_task(Family::Adv1D, 1);
    const auto cond = sample_conditions(task, 256, 64, 64, rng);
    const auto data = generate_dataset(task, 1100, rng);
    FitnessConfig cfg;
    const auto [lb, tuned] = factorial_cost(exact_solution_tree(task).value(), task, data, cond, cfg);
    CHECK(lb.total <= 1e-6);
    const auto [bad, bad_tree] = factorial_cost(parse_expr("log(0 - 1 - x*x)"), task, data, cond, cfg);
    CHECK(bad.total == kSentinelCost);
    CHECK(bad.poisoned());

    // Never worse than the untuned tree; invariant under record order.
    const auto cand = parse_expr("0.5*sin(10*x - 2*t) + 0.1");
    const auto [c1, t1] = factorial_cost(cand, task, data, cond, cfg);
    CHECK(c1.total <= combined_loss(cand, task, data, cond, cfg).total);
    CHECK(to_infix(t1.with_constants(cand.constants())) == to_infix(cand));
    Dataset shuffled = data;
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.points.set(i, data.points.at(perm[i]));
        shuffled.values[i] = data.values[perm[i]];
    }
    const auto [c2, t2] = factorial_cost(cand, task, shuffled, cond, cfg);
    CHECK(c2.total == doctest::Approx(c1.total).epsilon(1e-9));
}

TEST_CASE("test MSE on held-out grids")
{
    const auto task = seeded_task(Family::NS2D, 1);
    CHECK(test_mse(exact_solution_tree(task).value(), task) <= 1e-10);
    const auto grid = heldout_grid(task, 21);
    double s = 0.0;
    for (double v : grid.values) s += v * v;
    CHECK(test_mse(parse_expr("0*x"), grid) == doctest::Approx(s / static_cast<double>(grid.node_count())));
    CHECK(is_sentinel(test_mse(parse_expr("log(x - 0.5)"), grid)));
}
