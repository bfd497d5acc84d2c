#include "nmips/expr.hpp"

#include <stdexcept>
#include <unordered_map>

namespace nmips {

std::string_view var_name(Var v)
{
    switch (v) {
    case Var::X: return "x";
    case Var::Y: return "y";
    case Var::Z: return "z";
    case Var::T: return "t";
    }
    return "?";
}

std::optional<Var> var_from_name(std::string_view name)
{
    if (name == "x") return Var::X;
    if (name == "y") return Var::Y;
    if (name == "z") return Var::Z;
    if (name == "t") return Var::T;
    return std::nullopt;
}

int arity(Op op)
{
    switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
        return 2;
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Log:
        return 1;
    }
    return 0;
}

std::string_view op_name(Op op)
{
    switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    }
    return "?";
}

NodePtr make_function(Op op, std::vector<NodePtr> children)
{
    if (static_cast<int>(children.size()) != arity(op)) {
        throw std::logic_error("make_function: arity mismatch for " + std::string(op_name(op)));
    }
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Function;
    n->op = op;
    n->children = std::move(children);
    return n;
}

NodePtr make_variable(Var v)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->var = v;
    return n;
}

NodePtr make_constant(int index)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->index = index;
    return n;
}

NodePtr make_literal(double value)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Literal;
    n->literal = value;
    return n;
}

NodePtr make_adf_call(int adf, std::vector<NodePtr> args)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::AdfCall;
    n->index = adf;
    n->children = std::move(args);
    return n;
}

NodePtr make_adf_arg(int index)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::AdfArg;
    n->index = index;
    return n;
}

ExprTree::ExprTree(NodePtr root, std::vector<double> constants, std::vector<NodePtr> adfs)
    : root_(std::move(root))
    , constants_(std::move(constants))
    , adfs_(std::move(adfs))
{
}

ExprTree ExprTree::with_constants(std::vector<double> values) const
{
    if (values.size() != constants_.size()) {
        throw std::invalid_argument("with_constants: expected " + std::to_string(constants_.size())
                                    + " values, got " + std::to_string(values.size()));
    }
    return ExprTree(root_, std::move(values), adfs_);
}

namespace {

    bool contains_adf(const NodePtr& n)
    {
        if (!n) return false;
        if (n->kind == NodeKind::AdfCall) return true;
        for (const auto& c : n->children) {
            if (contains_adf(c)) return true;
        }
        return false;
    }

    class Inliner {
    public:
        explicit Inliner(const std::vector<NodePtr>& adfs)
            : adfs_(adfs)
        {
        }

        NodePtr run(const NodePtr& n, const std::vector<NodePtr>* args)
        {
            // Memoise only outside ADF bodies; inside a body the result depends on args.
            if (args == nullptr) {
                if (auto it = memo_.find(n.get()); it != memo_.end()) return it->second;
            }
            NodePtr out;
            switch (n->kind) {
            case NodeKind::Variable:
            case NodeKind::Constant:
            case NodeKind::Literal:
                out = n;
                break;
            case NodeKind::AdfArg:
                if (args == nullptr || n->index >= static_cast<int>(args->size())) {
                    throw std::logic_error("ADF argument used outside an ADF body");
                }
                out = (*args)[static_cast<std::size_t>(n->index)];
                break;
            case NodeKind::AdfCall: {
                if (n->index < 0 || n->index >= static_cast<int>(adfs_.size()) || !adfs_[static_cast<std::size_t>(n->index)]) {
                    throw std::logic_error("call to undefined ADF " + std::to_string(n->index));
                }
                std::vector<NodePtr> actual;
                actual.reserve(n->children.size());
                for (const auto& c : n->children) actual.push_back(run(c, args));
                out = run(adfs_[static_cast<std::size_t>(n->index)], &actual);
                break;
            }
            case NodeKind::Function: {
                std::vector<NodePtr> kids;
                kids.reserve(n->children.size());
                bool same = true;
                for (const auto& c : n->children) {
                    kids.push_back(run(c, args));
                    same = same && kids.back() == c;
                }
                out = same ? n : make_function(n->op, std::move(kids));
                break;
            }
            }
            if (args == nullptr) memo_.emplace(n.get(), out);
            return out;
        }

    private:
        const std::vector<NodePtr>& adfs_;
        std::unordered_map<const Node*, NodePtr> memo_;
    };

    std::size_t count_nodes(const NodePtr& n)
    {
        std::size_t total = 1;
        for (const auto& c : n->children) total += count_nodes(c);
        return total;
    }

    void collect_vars(const NodePtr& n, std::array<bool, kNumVars>& used)
    {
        if (n->kind == NodeKind::Variable) used[static_cast<std::size_t>(n->var)] = true;
        for (const auto& c : n->children) collect_vars(c, used);
    }

    bool nodes_equal(const NodePtr& a, const NodePtr& b, const ExprTree& ta, const ExprTree& tb)
    {
        if (a == nullptr || b == nullptr) return a == b;
        if (a->kind != b->kind || a->children.size() != b->children.size()) return false;
        switch (a->kind) {
        case NodeKind::Function:
            if (a->op != b->op) return false;
            break;
        case NodeKind::Variable:
            if (a->var != b->var) return false;
            break;
        case NodeKind::Constant: {
            if (a->index != b->index) return false;
            auto i = static_cast<std::size_t>(a->index);
            if (i >= ta.constants().size() || i >= tb.constants().size()) return false;
            if (ta.constants()[i] != tb.constants()[i]) return false;
            break;
        }
        case NodeKind::Literal:
            if (a->literal != b->literal) return false;
            break;
        case NodeKind::AdfCall:
        case NodeKind::AdfArg:
            if (a->index != b->index) return false;
            break;
        }
        for (std::size_t i = 0; i < a->children.size(); ++i) {
            if (!nodes_equal(a->children[i], b->children[i], ta, tb)) return false;
        }
        return true;
    }

} // namespace

bool ExprTree::has_adf_calls() const { return contains_adf(root_); }

ExprTree ExprTree::inlined() const
{
    if (!root_ || !has_adf_calls()) return ExprTree(root_, constants_);
    Inliner inl(adfs_);
    return ExprTree(inl.run(root_, nullptr), constants_);
}

std::size_t ExprTree::size() const
{
    if (!root_) return 0;
    return count_nodes(inlined().root());
}

std::array<bool, kNumVars> ExprTree::variables_used() const
{
    std::array<bool, kNumVars> used{};
    if (root_) collect_vars(inlined().root(), used);
    return used;
}

bool structurally_equal(const ExprTree& a, const ExprTree& b)
{
    if (a.constants().size() != b.constants().size()) return false;
    if (!nodes_equal(a.root(), b.root(), a, b)) return false;
    if (a.adfs().size() != b.adfs().size()) return false;
    for (std::size_t i = 0; i < a.adfs().size(); ++i) {
        if (!nodes_equal(a.adfs()[i], b.adfs()[i], a, b)) return false;
    }
    return true;
}

} // namespace nmips
