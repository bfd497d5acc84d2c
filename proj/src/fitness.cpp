#include "nmips/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nmips {

namespace {

    // RMS of a residual block and, optionally, its gradient w.r.t. the
    // constants. `tan` holds one length-`stride` row per constant; the block
    // starts at `offset` within each row.
    struct Term {
        double rms = 0.0;
        std::vector<double> grad;
    };

    Term rms_term(const std::vector<double>& r, const std::vector<double>* tan, std::size_t stride,
                  std::size_t offset, std::size_t k, const std::vector<double>* tan_minus = nullptr,
                  std::size_t offset_minus = 0)
    {
        Term t;
        const std::size_t n = r.size();
        if (n == 0) {
            if (tan) t.grad.assign(k, 0.0);
            return t;
        }
        double s = 0.0;
        for (double v : r) s += v * v;
        t.rms = std::sqrt(s / static_cast<double>(n));
        if (!tan) return t;
        t.grad.assign(k, 0.0);
        if (t.rms == 0.0) return t;
        for (std::size_t j = 0; j < k; ++j) {
            const double* g = tan->data() + j * stride + offset;
            const double* gm = tan_minus ? tan_minus->data() + j * stride + offset_minus : nullptr;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += r[i] * (gm ? g[i] - gm[i] : g[i]);
            t.grad[j] = acc / (static_cast<double>(n) * t.rms);
        }
        return t;
    }

    class LossModel {
    public:
        LossModel(const ExprTree& u, const TaskSpec& task, const Dataset& data, const ConditionSet& cond,
                  double lambda, bool physics)
            : data_(data)
            , cond_(cond)
            , lambda_(lambda)
            , physics_(physics)
        {
            const ExprTree flat = u.inlined();
            k_ = flat.num_constants();
            u_prog_ = compile(flat);
            nd_ = data.size();
            nic_ = physics ? cond.ic_points.size() : 0;
            nbc_ = physics ? cond.bc_lower.size() : 0;
            points_ = data.points;
            if (physics) {
                points_.append(cond.ic_points);
                points_.append(cond.bc_lower);
                points_.append(cond.bc_upper);
                if (!cond.interior.empty()) {
                    res_prog_ = compile(residual_tree(task, flat));
                    has_res_ = true;
                }
            }
        }

        [[nodiscard]] std::size_t num_constants() const { return k_; }

        /// False if the expression is poisoned at these constants.
        bool evaluate(std::span<const double> c, LossBreakdown& out, std::vector<double>* grad)
        {
            const std::size_t n = points_.size();
            bool ok = grad ? u_prog_.evaluate_with_gradient(points_, c, vals_, tan_)
                           : u_prog_.evaluate(points_, c, vals_);
            if (!ok) return false;
            const std::vector<double>* tan = grad ? &tan_ : nullptr;

            buf_.resize(nd_);
            for (std::size_t i = 0; i < nd_; ++i) buf_[i] = vals_[i] - data_.values[i];
            const Term d = rms_term(buf_, tan, n, 0, k_);
            out.data_loss = d.rms;
            out.residual_loss = out.ic_loss = out.bc_loss = 0.0;

            Term ic, bc, res;
            if (physics_) {
                buf_.resize(nic_);
                for (std::size_t i = 0; i < nic_; ++i) buf_[i] = vals_[nd_ + i] - cond_.ic_values[i];
                ic = rms_term(buf_, tan, n, nd_, k_);
                const std::size_t lo = nd_ + nic_;
                const std::size_t hi = lo + nbc_;
                buf_.resize(nbc_);
                for (std::size_t i = 0; i < nbc_; ++i) buf_[i] = vals_[lo + i] - vals_[hi + i];
                bc = rms_term(buf_, tan, n, lo, k_, tan, hi);
                if (has_res_) {
                    ok = grad ? res_prog_.evaluate_with_gradient(cond_.interior, c, rvals_, rtan_)
                              : res_prog_.evaluate(cond_.interior, c, rvals_);
                    if (!ok) return false;
                    res = rms_term(rvals_, grad ? &rtan_ : nullptr, cond_.interior.size(), 0, k_);
                }
                out.residual_loss = res.rms;
                out.ic_loss = ic.rms;
                out.bc_loss = bc.rms;
            }
            out.total = out.data_loss + lambda_ * (out.residual_loss + out.ic_loss + out.bc_loss);
            if (!std::isfinite(out.total)) return false;
            if (grad) {
                grad->assign(k_, 0.0);
                for (std::size_t j = 0; j < k_; ++j) {
                    double g = d.grad[j];
                    if (physics_) {
                        g += lambda_ * (ic.grad[j] + bc.grad[j] + (has_res_ ? res.grad[j] : 0.0));
                    }
                    (*grad)[j] = g;
                }
            }
            return true;
        }

    private:
        const Dataset& data_;
        const ConditionSet& cond_;
        double lambda_;
        bool physics_;
        std::size_t k_ = 0;
        Program u_prog_;
        Program res_prog_;
        bool has_res_ = false;
        PointSet points_;
        std::size_t nd_ = 0, nic_ = 0, nbc_ = 0;
        std::vector<double> vals_, tan_, rvals_, rtan_, buf_;
    };

    LossBreakdown sentinel() { return LossBreakdown{}; }

} // namespace

double data_loss(const ExprTree& u, const Dataset& data)
{
    if (data.size() == 0) throw std::invalid_argument("data_loss: empty dataset");
    const Program prog = compile(u.inlined());
    std::vector<double> vals;
    if (!prog.evaluate(data.points, u.constants(), vals)) return kSentinelCost;
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = vals[i] - data.values[i];
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(data.size()));
}

PhysicsLoss physics_loss(const ExprTree& u, const TaskSpec& task, const ConditionSet& cond)
{
    const Dataset empty;
    LossModel model(u, task, empty, cond, 1.0, true);
    LossBreakdown lb;
    if (!model.evaluate(u.constants(), lb, nullptr)) return {kSentinelCost, kSentinelCost, kSentinelCost};
    return {lb.residual_loss, lb.ic_loss, lb.bc_loss};
}

LossBreakdown combined_loss(const ExprTree& u, const TaskSpec& task, const Dataset& data, const ConditionSet& cond,
                            const FitnessConfig& cfg)
{
    LossModel model(u, task, data, cond, cfg.lambda_phys, true);
    LossBreakdown lb;
    if (!model.evaluate(u.constants(), lb, nullptr)) return sentinel();
    return lb;
}

ExprTree optimize_constants(const ExprTree& u, const TaskSpec& task, const Dataset& data, const ConditionSet& cond,
                            const FitnessConfig& cfg)
{
    if (cfg.opt.max_steps < 0) throw std::invalid_argument("optimize_constants: max_steps must be >= 0");
    if (u.num_constants() == 0 || cfg.opt.max_steps == 0) return u;
    LossModel model(u, task, data, cond, cfg.lambda_phys, cfg.opt.include_physics_terms);
    std::vector<double> c = u.constants();
    std::vector<double> grad;
    LossBreakdown cur;
    if (!model.evaluate(c, cur, &grad)) return u;

    double lr = cfg.opt.learning_rate;
    std::vector<double> trial(c.size());
    std::vector<double> trial_grad;
    LossBreakdown next;
    for (int step = 0; step < cfg.opt.max_steps; ++step) {
        double gnorm = 0.0;
        for (double g : grad) gnorm += g * g;
        if (cur.total == 0.0 || gnorm < 1e-24 || lr < 1e-12) break;
        for (std::size_t j = 0; j < c.size(); ++j) trial[j] = c[j] - lr * grad[j];
        if (model.evaluate(trial, next, &trial_grad) && next.total < cur.total) {
            c.swap(trial);
            grad.swap(trial_grad);
            cur = next;
            lr *= 1.2;
        } else {
            lr *= 0.5;
        }
    }
    return u.with_constants(std::move(c));
}

std::pair<LossBreakdown, ExprTree> factorial_cost(const ExprTree& u, const TaskSpec& task, const Dataset& data,
                                                  const ConditionSet& cond, const FitnessConfig& cfg)
{
    ExprTree tuned = optimize_constants(u, task, data, cond, cfg);
    LossBreakdown lb = combined_loss(tuned, task, data, cond, cfg);
    return {lb, std::move(tuned)};
}

double test_mse(const ExprTree& u, const SolutionGrid& grid)
{
    const Program prog = compile(u.inlined());
    const std::size_t total = grid.node_count();
    if (total == 0) throw std::invalid_argument("test_mse: empty grid");
    constexpr std::size_t kChunk = 1 << 15;
    PointSet ps;
    std::vector<double> vals;
    double s = 0.0;
    for (std::size_t start = 0; start < total; start += kChunk) {
        const std::size_t n = std::min(kChunk, total - start);
        ps.resize(n);
        for (std::size_t i = 0; i < n; ++i) ps.set(i, grid.node(start + i));
        if (!prog.evaluate(ps, u.constants(), vals)) return kSentinelCost;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = vals[i] - grid.values[start + i];
            s += r * r;
        }
    }
    const double mse = s / static_cast<double>(total);
    return std::isfinite(mse) ? mse : kSentinelCost;
}

double test_mse(const ExprTree& u, const TaskSpec& task) { return test_mse(u, heldout_grid(task)); }

} // namespace nmips
