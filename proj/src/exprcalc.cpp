#include "nmips/exprcalc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace nmips {

void PointSet::resize(std::size_t n)
{
    for (auto& c : cols_) c.resize(n, 0.0);
    n_ = n;
}

void PointSet::push_back(const Point& p)
{
    for (std::size_t v = 0; v < kNumVars; ++v) cols_[v].push_back(p[v]);
    ++n_;
}

void PointSet::set(std::size_t i, const Point& p)
{
    for (std::size_t v = 0; v < kNumVars; ++v) cols_[v][i] = p[v];
}

void PointSet::append(const PointSet& other)
{
    for (std::size_t v = 0; v < kNumVars; ++v) {
        cols_[v].insert(cols_[v].end(), other.cols_[v].begin(), other.cols_[v].end());
    }
    n_ += other.n_;
}

Point PointSet::at(std::size_t i) const
{
    Point p{};
    for (std::size_t v = 0; v < kNumVars; ++v) p[v] = cols_[v][i];
    return p;
}

namespace {

    double apply(Op op, double a, double b)
    {
        switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return a / b;
        case Op::Sin: return std::sin(a);
        case Op::Cos: return std::cos(a);
        case Op::Exp: return std::exp(a);
        case Op::Log: return std::log(a);
        }
        return NAN;
    }

    struct ScalarEval {
        const ExprTree& tree;
        const Point& point;
        bool ok = true;

        double run(const Node& n)
        {
            double v = 0.0;
            switch (n.kind) {
            case NodeKind::Variable: v = point[static_cast<std::size_t>(n.var)]; break;
            case NodeKind::Constant: v = tree.constants().at(static_cast<std::size_t>(n.index)); break;
            case NodeKind::Literal: v = n.literal; break;
            case NodeKind::Function: {
                const double a = run(*n.children[0]);
                const double b = n.children.size() > 1 ? run(*n.children[1]) : 0.0;
                v = apply(n.op, a, b);
                break;
            }
            case NodeKind::AdfCall:
            case NodeKind::AdfArg:
                throw std::logic_error("eval: ADF nodes must be inlined");
            }
            if (!std::isfinite(v)) ok = false;
            return v;
        }
    };

} // namespace

std::optional<double> eval(const ExprTree& tree, const Point& point)
{
    if (tree.empty()) return std::nullopt;
    const ExprTree flat = tree.inlined();
    ScalarEval ev{flat, point};
    const double v = ev.run(*flat.root());
    if (!ev.ok) return std::nullopt;
    return v;
}

namespace build {

    bool is_literal(const NodePtr& n, double v) { return n->kind == NodeKind::Literal && n->literal == v; }

    NodePtr lit(double v) { return make_literal(v); }

    namespace {
        NodePtr fold(Op op, const NodePtr& a, const NodePtr& b)
        {
            const bool lit_a = a->kind == NodeKind::Literal;
            const bool lit_b = b == nullptr || b->kind == NodeKind::Literal;
            if (lit_a && lit_b) {
                const double v = apply(op, a->literal, b ? b->literal : 0.0);
                if (std::isfinite(v)) return make_literal(v);
            }
            return nullptr;
        }
    } // namespace

    NodePtr add(NodePtr a, NodePtr b)
    {
        if (auto f = fold(Op::Add, a, b)) return f;
        if (is_literal(a, 0.0)) return b;
        if (is_literal(b, 0.0)) return a;
        return make_function(Op::Add, {std::move(a), std::move(b)});
    }

    NodePtr sub(NodePtr a, NodePtr b)
    {
        if (auto f = fold(Op::Sub, a, b)) return f;
        if (is_literal(b, 0.0)) return a;
        return make_function(Op::Sub, {std::move(a), std::move(b)});
    }

    NodePtr mul(NodePtr a, NodePtr b)
    {
        if (auto f = fold(Op::Mul, a, b)) return f;
        if (is_literal(a, 0.0) || is_literal(b, 0.0)) return make_literal(0.0);
        if (is_literal(a, 1.0)) return b;
        if (is_literal(b, 1.0)) return a;
        return make_function(Op::Mul, {std::move(a), std::move(b)});
    }

    NodePtr div(NodePtr a, NodePtr b)
    {
        if (auto f = fold(Op::Div, a, b)) return f;
        if (is_literal(a, 0.0)) return make_literal(0.0);
        if (is_literal(b, 1.0)) return a;
        return make_function(Op::Div, {std::move(a), std::move(b)});
    }

    NodePtr sin(NodePtr a)
    {
        if (auto f = fold(Op::Sin, a, nullptr)) return f;
        return make_function(Op::Sin, {std::move(a)});
    }

    NodePtr cos(NodePtr a)
    {
        if (auto f = fold(Op::Cos, a, nullptr)) return f;
        return make_function(Op::Cos, {std::move(a)});
    }

    NodePtr exp(NodePtr a)
    {
        if (auto f = fold(Op::Exp, a, nullptr)) return f;
        return make_function(Op::Exp, {std::move(a)});
    }

    NodePtr log(NodePtr a)
    {
        if (auto f = fold(Op::Log, a, nullptr)) return f;
        return make_function(Op::Log, {std::move(a)});
    }

} // namespace build

namespace {

    // Target of differentiation: a variable or a constant slot.
    struct Wrt {
        bool is_constant;
        Var var;
        int index;
    };

    class Differentiator {
    public:
        explicit Differentiator(Wrt wrt)
            : wrt_(wrt)
        {
        }

        NodePtr run(const NodePtr& n)
        {
            if (auto it = memo_.find(n.get()); it != memo_.end()) return it->second;
            NodePtr d;
            switch (n->kind) {
            case NodeKind::Variable:
                d = build::lit(!wrt_.is_constant && n->var == wrt_.var ? 1.0 : 0.0);
                break;
            case NodeKind::Constant:
                d = build::lit(wrt_.is_constant && n->index == wrt_.index ? 1.0 : 0.0);
                break;
            case NodeKind::Literal:
                d = build::lit(0.0);
                break;
            case NodeKind::AdfCall:
            case NodeKind::AdfArg:
                throw std::logic_error("differentiate: ADF nodes must be inlined");
            case NodeKind::Function:
                d = function_rule(n);
                break;
            }
            memo_.emplace(n.get(), d);
            return d;
        }

    private:
        NodePtr function_rule(const NodePtr& n)
        {
            const NodePtr& a = n->children[0];
            const NodePtr da = run(a);
            switch (n->op) {
            case Op::Add: return build::add(da, run(n->children[1]));
            case Op::Sub: return build::sub(da, run(n->children[1]));
            case Op::Mul: {
                const NodePtr& b = n->children[1];
                return build::add(build::mul(da, b), build::mul(a, run(b)));
            }
            case Op::Div: {
                const NodePtr& b = n->children[1];
                return build::div(build::sub(build::mul(da, b), build::mul(a, run(b))), build::mul(b, b));
            }
            case Op::Sin: return build::mul(build::cos(a), da);
            case Op::Cos: return build::mul(build::mul(build::lit(-1.0), build::sin(a)), da);
            case Op::Exp: return build::is_literal(da, 0.0) ? build::lit(0.0) : build::mul(n, da);
            case Op::Log: return build::div(da, a);
            }
            return build::lit(0.0);
        }

        Wrt wrt_;
        std::unordered_map<const Node*, NodePtr> memo_;
    };

} // namespace

ExprTree differentiate(const ExprTree& tree, Var var, int order)
{
    if (order < 1) throw std::invalid_argument("differentiate: order must be >= 1");
    ExprTree cur = tree.inlined();
    for (int k = 0; k < order; ++k) {
        Differentiator d(Wrt{false, var, 0});
        cur = ExprTree(d.run(cur.root()), cur.constants());
    }
    return cur;
}

ExprTree differentiate_constant(const ExprTree& tree, int index)
{
    ExprTree flat = tree.inlined();
    Differentiator d(Wrt{true, Var::X, index});
    return ExprTree(d.run(flat.root()), flat.constants());
}

std::optional<std::vector<double>> grad_constants(const ExprTree& tree, const Point& point)
{
    const Program prog = compile(tree);
    PointSet ps;
    ps.push_back(point);
    std::vector<double> val;
    std::vector<double> grad;
    if (!prog.evaluate_with_gradient(ps, tree.constants(), val, grad)) return std::nullopt;
    return grad;
}

namespace {

    Program::Code code_of(Op op)
    {
        switch (op) {
        case Op::Add: return Program::Code::Add;
        case Op::Sub: return Program::Code::Sub;
        case Op::Mul: return Program::Code::Mul;
        case Op::Div: return Program::Code::Div;
        case Op::Sin: return Program::Code::Sin;
        case Op::Cos: return Program::Code::Cos;
        case Op::Exp: return Program::Code::Exp;
        case Op::Log: return Program::Code::Log;
        }
        return Program::Code::Lit;
    }

    using Key = std::tuple<Program::Code, int, int, int, double>;

    struct Compiler {
        std::vector<Program::Instruction> code;
        std::vector<std::vector<int>> deps;
        std::unordered_map<const Node*, int> by_node;
        std::map<Key, int> by_key;

        int emit(Program::Instruction ins)
        {
            Key key{ins.code, ins.a, ins.b, ins.index, ins.value};
            if (auto it = by_key.find(key); it != by_key.end()) return it->second;
            std::vector<int> d;
            if (ins.code == Program::Code::Const) {
                d.push_back(ins.index);
            } else {
                if (ins.a >= 0) d = deps[static_cast<std::size_t>(ins.a)];
                if (ins.b >= 0) {
                    const auto& db = deps[static_cast<std::size_t>(ins.b)];
                    std::vector<int> merged;
                    std::set_union(d.begin(), d.end(), db.begin(), db.end(), std::back_inserter(merged));
                    d = std::move(merged);
                }
            }
            code.push_back(ins);
            deps.push_back(std::move(d));
            const int id = static_cast<int>(code.size() - 1);
            by_key.emplace(key, id);
            return id;
        }

        int run(const NodePtr& n)
        {
            if (auto it = by_node.find(n.get()); it != by_node.end()) return it->second;
            Program::Instruction ins;
            switch (n->kind) {
            case NodeKind::Variable:
                ins.code = Program::Code::Var;
                ins.index = static_cast<int>(n->var);
                break;
            case NodeKind::Constant:
                ins.code = Program::Code::Const;
                ins.index = n->index;
                break;
            case NodeKind::Literal:
                ins.code = Program::Code::Lit;
                ins.value = n->literal;
                break;
            case NodeKind::Function:
                ins.code = code_of(n->op);
                ins.a = run(n->children[0]);
                if (n->children.size() > 1) ins.b = run(n->children[1]);
                break;
            case NodeKind::AdfCall:
            case NodeKind::AdfArg:
                throw std::logic_error("compile: ADF nodes must be inlined");
            }
            const int id = emit(ins);
            by_node.emplace(n.get(), id);
            return id;
        }
    };

    bool all_finite(std::span<const double> v)
    {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

    void forward(const Program::Instruction& ins, const std::vector<std::vector<double>>& vals, const PointSet& pts,
                 std::span<const double> constants, std::vector<double>& out)
    {
        const std::size_t n = pts.size();
        out.resize(n);
        using C = Program::Code;
        switch (ins.code) {
        case C::Var: {
            auto col = pts.column(static_cast<Var>(ins.index));
            std::copy(col.begin(), col.end(), out.begin());
            return;
        }
        case C::Const:
            std::fill(out.begin(), out.end(), constants[static_cast<std::size_t>(ins.index)]);
            return;
        case C::Lit:
            std::fill(out.begin(), out.end(), ins.value);
            return;
        default:
            break;
        }
        const auto& a = vals[static_cast<std::size_t>(ins.a)];
        const std::vector<double>* bp = ins.b >= 0 ? &vals[static_cast<std::size_t>(ins.b)] : nullptr;
        switch (ins.code) {
        case C::Add: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + (*bp)[i]; break;
        case C::Sub: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - (*bp)[i]; break;
        case C::Mul: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * (*bp)[i]; break;
        case C::Div: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / (*bp)[i]; break;
        case C::Sin: for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(a[i]); break;
        case C::Cos: for (std::size_t i = 0; i < n; ++i) out[i] = std::cos(a[i]); break;
        case C::Exp: for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a[i]); break;
        case C::Log: for (std::size_t i = 0; i < n; ++i) out[i] = std::log(a[i]); break;
        default: break;
        }
    }

} // namespace

Program compile(const ExprTree& tree)
{
    Program prog;
    if (tree.empty()) return prog;
    const ExprTree flat = tree.inlined();
    Compiler c;
    prog.output_ = c.run(flat.root());
    prog.code_ = std::move(c.code);
    prog.deps_ = std::move(c.deps);
    prog.num_constants_ = flat.num_constants();
    return prog;
}

bool Program::evaluate(const PointSet& points, std::span<const double> constants, std::vector<double>& out) const
{
    if (code_.empty()) return false;
    std::vector<std::vector<double>> vals(code_.size());
    for (std::size_t i = 0; i < code_.size(); ++i) {
        forward(code_[i], vals, points, constants, vals[i]);
        if (!all_finite(vals[i])) return false;
    }
    out = std::move(vals[static_cast<std::size_t>(output_)]);
    return true;
}

bool Program::evaluate_with_gradient(const PointSet& points, std::span<const double> constants,
                                     std::vector<double>& out, std::vector<double>& grad) const
{
    if (code_.empty()) return false;
    const std::size_t n = points.size();
    const std::size_t m = code_.size();
    std::vector<std::vector<double>> vals(m);
    // tans[i] holds one length-n block per entry of deps_[i].
    std::vector<std::vector<double>> tans(m);

    auto tangent_of = [&](int ins, int constant) -> const double* {
        const auto& d = deps_[static_cast<std::size_t>(ins)];
        auto it = std::lower_bound(d.begin(), d.end(), constant);
        if (it == d.end() || *it != constant) return nullptr;
        return tans[static_cast<std::size_t>(ins)].data() + static_cast<std::size_t>(it - d.begin()) * n;
    };

    using C = Code;
    for (std::size_t k = 0; k < m; ++k) {
        const Instruction& ins = code_[k];
        forward(ins, vals, points, constants, vals[k]);
        if (!all_finite(vals[k])) return false;
        const auto& d = deps_[k];
        if (d.empty()) continue;
        auto& t = tans[k];
        t.assign(d.size() * n, 0.0);
        if (ins.code == C::Const) {
            std::fill(t.begin(), t.end(), 1.0);
            continue;
        }
        const auto& va = vals[static_cast<std::size_t>(ins.a)];
        const std::vector<double>* vb = ins.b >= 0 ? &vals[static_cast<std::size_t>(ins.b)] : nullptr;
        const auto& vk = vals[k];
        for (std::size_t j = 0; j < d.size(); ++j) {
            const double* ta = tangent_of(ins.a, d[j]);
            const double* tb = ins.b >= 0 ? tangent_of(ins.b, d[j]) : nullptr;
            double* tk = t.data() + j * n;
            for (std::size_t i = 0; i < n; ++i) {
                const double da = ta ? ta[i] : 0.0;
                const double db = tb ? tb[i] : 0.0;
                double r = 0.0;
                switch (ins.code) {
                case C::Add: r = da + db; break;
                case C::Sub: r = da - db; break;
                case C::Mul: r = da * (*vb)[i] + va[i] * db; break;
                case C::Div: r = (da * (*vb)[i] - va[i] * db) / ((*vb)[i] * (*vb)[i]); break;
                case C::Sin: r = std::cos(va[i]) * da; break;
                case C::Cos: r = -std::sin(va[i]) * da; break;
                case C::Exp: r = vk[i] * da; break;
                case C::Log: r = da / va[i]; break;
                default: break;
                }
                tk[i] = r;
            }
        }
    }
    const auto o = static_cast<std::size_t>(output_);
    out = vals[o];
    grad.assign(num_constants_ * n, 0.0);
    const auto& last = deps_[o];
    for (std::size_t j = 0; j < last.size(); ++j) {
        const double* src = tans[o].data() + j * n;
        std::copy(src, src + n, grad.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(last[j]) * n));
    }
    return all_finite(grad);
}

} // namespace nmips
