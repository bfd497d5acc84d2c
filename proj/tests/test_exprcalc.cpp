#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "nmips/exprcalc.hpp"
#include "nmips/genome.hpp"
#include "nmips/pdefam.hpp"

using namespace nmips;

namespace {

constexpr double kPi = std::numbers::pi;

double ev(const ExprTree& t, const Point& p)
{
    auto v = eval(t, p);
    REQUIRE(v.has_value());
    return *v;
}

// Random decoded trees with random constants, skipping ones that are
// invalid or huge at the probe point.
struct TreeSampler {
    Family family;
    SymbolLibrary lib;
    EncodingSpec spec;
    std::mt19937_64 rng;

    explicit TreeSampler(Family f, std::uint64_t seed)
        : family(f)
        , lib(family_library(f))
        , rng(seed)
    {
        const std::vector<SymbolLibrary> libs = {lib};
        spec = build_encoding_space(libs, 6, 1, 2);
    }

    ExprTree next()
    {
        auto t = decode(random_chromosome(spec, rng), spec, lib);
        std::uniform_real_distribution<double> cu(-2.0, 2.0);
        std::vector<double> cs(t.num_constants());
        for (double& c : cs) c = cu(rng);
        return t.with_constants(cs);
    }

    Point point()
    {
        std::uniform_real_distribution<double> u(0.1, 0.9);
        return make_point(u(rng), u(rng), u(rng), u(rng));
    }
};

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}); }

} // namespace

TEST_CASE("scalar evaluation")
{
    CHECK(ev(parse_expr("0.014*(t - x) + 0.024"), make_point(0, 0, 0, 0)) == doctest::Approx(0.024));
    const auto tg = parse_expr("sin(2*pi*x)*sin(2*pi*y)*exp(-8*pi*pi*0.05*t)");
    CHECK(ev(tg, make_point(0.25, 0.25, 0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(eval(parse_expr("log(x)"), make_point(0, 0, 0, 0)).has_value());
    CHECK_FALSE(eval(parse_expr("log(x - 2)"), make_point(1, 0, 0, 0)).has_value());
    CHECK_FALSE(eval(parse_expr("exp(exp(exp(x)))"), make_point(10, 0, 0, 0)).has_value());
    // Poisoning: an invalid branch multiplied by zero is still invalid.
    CHECK_FALSE(eval(parse_expr("0*log(x)"), make_point(-1, 0, 0, 0)).has_value());
}

TEST_CASE("symbolic derivatives on hand examples")
{
    const auto wave = parse_expr("sin(x - 0.4*t)");
    const auto dx = differentiate(wave, Var::X);
    for (double x : {0.1, 0.5, 0.9}) {
        CHECK(ev(dx, make_point(x, 0, 0, 0.3)) == doctest::Approx(std::cos(x - 0.4 * 0.3)));
    }
    const auto xx = parse_expr("x*x");
    CHECK(ev(differentiate(xx, Var::X, 2), make_point(0.3, 0, 0, 0)) == doctest::Approx(2.0));
    CHECK(ev(differentiate(xx, Var::T, 1), make_point(0.3, 0, 0, 0)) == 0.0);
    const auto lg = parse_expr("log(x)");
    CHECK(ev(differentiate(lg, Var::X), make_point(0.5, 0, 0, 0)) == doctest::Approx(2.0));
    CHECK_THROWS(differentiate(xx, Var::X, 0));
}

TEST_CASE("derivatives match central finite differences")
{
    for (Family f : kAllFamilies) {
        TreeSampler s(f, 100 + static_cast<std::uint64_t>(f));
        const auto vars = family_variables(f);
        int compared = 0;
        for (int i = 0; i < 60; ++i) {
            const auto tree = s.next();
            for (Var v : vars) {
                const auto d1 = differentiate(tree, v, 1);
                const auto d2 = differentiate(tree, v, 2);
                const auto d11 = differentiate(d1, v, 1);
                for (int k = 0; k < 5; ++k) {
                    Point p = s.point();
                    const auto f0 = eval(tree, p);
                    if (!f0 || std::abs(*f0) > 1e4) continue;
                    const double h = 1e-4;
                    Point pp = p, pm = p;
                    pp[static_cast<std::size_t>(v)] += h;
                    pm[static_cast<std::size_t>(v)] -= h;
                    const auto fp = eval(tree, pp);
                    const auto fm = eval(tree, pm);
                    const auto g1 = eval(d1, p);
                    const auto g2 = eval(d2, p);
                    if (!fp || !fm || !g1 || !g2) continue;
                    const double fd1 = (*fp - *fm) / (2 * h);
                    const double fd2 = (*fp - 2 * *f0 + *fm) / (h * h);
                    CHECK(close(*g1, fd1, 1e-5));
                    CHECK(close(*g2, fd2, 1e-3));
                    CHECK(close(*g2, ev(d11, p), 1e-12));
                    ++compared;
                }
            }
        }
        CHECK(compared > 100);
    }
}

TEST_CASE("derivative linearity and absent variables")
{
    TreeSampler s(Family::AdvDiff1D, 5);
    for (int i = 0; i < 50; ++i) {
        const auto a = s.next();
        const auto b = s.next();
        // 2.5*a + b, sharing constants by concatenation.
        std::vector<double> cs = a.inlined().constants();
        const auto bi = b.inlined();
        const int offset = static_cast<int>(cs.size());
        cs.insert(cs.end(), bi.constants().begin(), bi.constants().end());
        // Shift b's constant indices.
        std::function<NodePtr(const NodePtr&)> shift = [&](const NodePtr& n) -> NodePtr {
            if (n->kind == NodeKind::Constant) return make_constant(n->index + offset);
            if (n->children.empty()) return n;
            std::vector<NodePtr> kids;
            for (const auto& c : n->children) kids.push_back(shift(c));
            return make_function(n->op, kids);
        };
        const ExprTree sum(make_function(Op::Add, {make_function(Op::Mul, {make_literal(2.5), a.inlined().root()}),
                                                   shift(bi.root())}),
                           cs);
        const auto ds = differentiate(sum, Var::X);
        const auto da = differentiate(a, Var::X);
        const auto db = differentiate(b, Var::X);
        const Point p = s.point();
        const auto vs = eval(ds, p);
        const auto va = eval(da, p);
        const auto vb = eval(db, p);
        if (vs && va && vb) CHECK(close(*vs, 2.5 * *va + *vb, 1e-12));
        const auto dz = differentiate(a, Var::Z);
        if (eval(a, p)) CHECK(ev(dz, p) == 0.0);
    }
}

TEST_CASE("constant gradients")
{
    const auto cx = parse_expr("2*x");
    auto g = grad_constants(cx, make_point(3, 0, 0, 0));
    REQUIRE(g.has_value());
    CHECK(g->size() == 1);
    CHECK((*g)[0] == doctest::Approx(3.0));
    g = grad_constants(parse_expr("x*t"), make_point(3, 0, 0, 1));
    REQUIRE(g.has_value());
    CHECK(g->empty());
    CHECK_FALSE(grad_constants(parse_expr("log(x - 5)"), make_point(1, 0, 0, 0)).has_value());

    for (Family f : kAllFamilies) {
        TreeSampler s(f, 300 + static_cast<std::uint64_t>(f));
        for (int i = 0; i < 60; ++i) {
            const auto tree = s.next();
            const Point p = s.point();
            const auto gr = grad_constants(tree, p);
            const auto f0 = eval(tree, p);
            if (!gr || !f0 || std::abs(*f0) > 1e4) continue;
            for (std::size_t j = 0; j < tree.num_constants(); ++j) {
                const double h = 1e-6;
                auto cp = tree.constants();
                auto cm = cp;
                cp[j] += h;
                cm[j] -= h;
                const auto fp = eval(tree.with_constants(cp), p);
                const auto fm = eval(tree.with_constants(cm), p);
                if (!fp || !fm) continue;
                CHECK(close((*gr)[j], (*fp - *fm) / (2 * h), 1e-5));
                const auto sym = eval(differentiate_constant(tree, static_cast<int>(j)), p);
                REQUIRE(sym.has_value());
                CHECK(close((*gr)[j], *sym, 1e-10));
            }
        }
    }
}

TEST_CASE("compiled programs agree with scalar evaluation")
{
    for (Family f : kAllFamilies) {
        TreeSampler s(f, 500 + static_cast<std::uint64_t>(f));
        for (int i = 0; i < 50; ++i) {
            const auto tree = s.next();
            const Program prog = compile(tree.inlined());
            PointSet ps;
            std::vector<Point> pts;
            for (int k = 0; k < 16; ++k) {
                pts.push_back(s.point());
                ps.push_back(pts.back());
            }
            std::vector<double> out;
            const bool ok = prog.evaluate(ps, tree.constants(), out);
            bool all = true;
            for (const auto& p : pts) all = all && eval(tree, p).has_value();
            CHECK(ok == all);
            if (!ok) continue;
            for (std::size_t k = 0; k < pts.size(); ++k) CHECK(out[k] == doctest::Approx(ev(tree, pts[k])).epsilon(1e-14));

            std::vector<double> out2, grad;
            REQUIRE(prog.evaluate_with_gradient(ps, tree.constants(), out2, grad));
            CHECK(out2 == out);
            for (std::size_t k = 0; k < pts.size(); ++k) {
                const auto g = grad_constants(tree, pts[k]);
                REQUIRE(g.has_value());
                for (std::size_t j = 0; j < g->size(); ++j) {
                    CHECK(grad[j * pts.size() + k] == doctest::Approx((*g)[j]).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("literal folding keeps derivative trees small")
{
    const auto t = parse_expr("3*x + 2");
    const auto d = differentiate(t, Var::X, 2);
    CHECK(d.root()->kind == NodeKind::Literal);
    CHECK(d.root()->literal == 0.0);
    CHECK(build::is_literal(build::mul(build::lit(0.0), make_variable(Var::X)), 0.0));
    CHECK(build::add(build::lit(0.0), make_variable(Var::X))->kind == NodeKind::Variable);
    CHECK(build::mul(build::lit(2.0), build::lit(kPi))->literal == doctest::Approx(2 * kPi));
}
