#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace nmips {

/// Independent variables of a PDE task.
enum class Var : std::uint8_t { X = 0, Y = 1, Z = 2, T = 3 };
inline constexpr std::size_t kNumVars = 4;

std::string_view var_name(Var v);
std::optional<Var> var_from_name(std::string_view name);

/// Primitive operators. The search libraries only use Add, Sub, Mul, Sin, Exp
/// and Log; Div and Cos appear in derivative trees.
enum class Op : std::uint8_t { Add, Sub, Mul, Div, Sin, Cos, Exp, Log };

int arity(Op op);
std::string_view op_name(Op op);

enum class NodeKind : std::uint8_t { Function, Variable, Constant, Literal, AdfCall, AdfArg };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// Immutable expression node. Subtrees may be shared between trees.
struct Node {
    NodeKind kind = NodeKind::Literal;
    Op op = Op::Add;
    Var var = Var::X;
    int index = 0;        // constant slot, ADF index or ADF argument index
    double literal = 0.0; // fixed value of a Literal node
    std::vector<NodePtr> children;
};

NodePtr make_function(Op op, std::vector<NodePtr> children);
NodePtr make_variable(Var v);
NodePtr make_constant(int index);
NodePtr make_literal(double value);
NodePtr make_adf_call(int adf, std::vector<NodePtr> args);
NodePtr make_adf_arg(int index);

/// Decoded expression: a main body, optional ADF bodies it may call, and the
/// tunable constant values referenced by Constant nodes.
class ExprTree {
public:
    ExprTree() = default;
    ExprTree(NodePtr root, std::vector<double> constants, std::vector<NodePtr> adfs = {});

    [[nodiscard]] const NodePtr& root() const { return root_; }
    [[nodiscard]] const std::vector<double>& constants() const { return constants_; }
    [[nodiscard]] const std::vector<NodePtr>& adfs() const { return adfs_; }
    [[nodiscard]] bool empty() const { return root_ == nullptr; }
    [[nodiscard]] std::size_t num_constants() const { return constants_.size(); }

    /// Same structure, different constant values.
    [[nodiscard]] ExprTree with_constants(std::vector<double> values) const;

    /// Replaces every ADF call by its body; the result has no ADF nodes.
    [[nodiscard]] ExprTree inlined() const;
    [[nodiscard]] bool has_adf_calls() const;

    /// Node count of the inlined tree, counting shared subtrees once per use.
    [[nodiscard]] std::size_t size() const;
    /// Variables referenced after inlining.
    [[nodiscard]] std::array<bool, kNumVars> variables_used() const;

private:
    NodePtr root_;
    std::vector<double> constants_;
    std::vector<NodePtr> adfs_;
};

/// Structural equality (kinds, symbols, indices, literal and constant values).
bool structurally_equal(const ExprTree& a, const ExprTree& b);

} // namespace nmips
