#include "nmips/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nmips/fitness.hpp"

namespace nmips {

GroupStats group_stats(const std::vector<Chromosome>& group)
{
    if (group.empty()) throw std::invalid_argument("group_stats: empty group");
    const std::size_t d = group[0].genes.size();
    GroupStats s;
    s.group_size = static_cast<int>(group.size());
    s.mean.assign(d, 0.0);
    s.variance.assign(d, 0.0);
    for (const auto& c : group) {
        if (c.genes.size() != d) throw std::invalid_argument("group_stats: genome lengths differ");
        for (std::size_t k = 0; k < d; ++k) s.mean[k] += c.genes[k];
    }
    const auto m = static_cast<double>(group.size());
    for (double& v : s.mean) v /= m;
    for (const auto& c : group) {
        for (std::size_t k = 0; k < d; ++k) {
            const double e = c.genes[k] - s.mean[k];
            s.variance[k] += e * e;
        }
    }
    for (double& v : s.variance) v /= m;
    return s;
}

std::vector<double> apply_affine(const Chromosome& z, const GroupStats& stats, const std::vector<double>& gamma,
                                 const std::vector<double>& beta, double eps)
{
    const std::size_t d = z.genes.size();
    if (stats.mean.size() != d || gamma.size() != d || beta.size() != d) {
        throw std::invalid_argument("apply_affine: dimension mismatch");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("apply_affine: eps must be positive");
    std::vector<double> out(d);
    for (std::size_t k = 0; k < d; ++k) {
        out[k] = (1.0 + gamma[k]) * (z.genes[k] - stats.mean[k]) / std::sqrt(stats.variance[k] + eps) + beta[k];
    }
    return out;
}

Chromosome repair_genes(const std::vector<double>& raw, const EncodingSpec& spec)
{
    if (static_cast<int>(raw.size()) != spec.genome_len()) throw ContractError("repair_genes: wrong genome length");
    Chromosome c;
    c.genes.resize(raw.size());
    for (std::size_t p = 0; p < raw.size(); ++p) c.genes[p] = repair_gene(raw[p], spec.domain(static_cast<int>(p)));
    return c;
}

namespace {
    constexpr int H = TransferNet::kHidden;
}

TransferNet::TransferNet(int genome_len, std::mt19937_64& rng, bool zero_output)
    : d_(genome_len)
{
    if (genome_len <= 0) throw std::invalid_argument("TransferNet: genome length must be positive");
    const std::size_t in = 2 * static_cast<std::size_t>(d_);
    theta_.assign(H * in + H + in * H + in, 0.0);
    const double a1 = std::sqrt(6.0 / static_cast<double>(in + H));
    std::uniform_real_distribution<double> w1(-a1, a1);
    for (std::size_t i = 0; i < H * in; ++i) theta_[i] = w1(rng);
    if (!zero_output) {
        const std::size_t off2 = H * in + H;
        for (std::size_t i = 0; i < in * H; ++i) theta_[off2 + i] = w1(rng);
    }
}

TransferNet::Affine TransferNet::forward(const std::vector<double>& x, std::vector<double>* hidden) const
{
    const std::size_t in = 2 * static_cast<std::size_t>(d_);
    if (x.size() != in) throw std::invalid_argument("TransferNet: input dimension mismatch");
    const double* w1 = theta_.data();
    const double* b1 = w1 + H * in;
    const double* w2 = b1 + H;
    const double* b2 = w2 + in * H;
    std::vector<double> h(H);
    for (int j = 0; j < H; ++j) {
        double s = b1[j];
        const double* row = w1 + static_cast<std::size_t>(j) * in;
        for (std::size_t i = 0; i < in; ++i) s += row[i] * x[i];
        h[static_cast<std::size_t>(j)] = std::tanh(s);
    }
    Affine out;
    out.gamma.resize(static_cast<std::size_t>(d_));
    out.beta.resize(static_cast<std::size_t>(d_));
    for (std::size_t o = 0; o < in; ++o) {
        double s = b2[o];
        const double* row = w2 + o * H;
        for (int j = 0; j < H; ++j) s += row[j] * h[static_cast<std::size_t>(j)];
        if (o < static_cast<std::size_t>(d_)) {
            out.gamma[o] = s;
        } else {
            out.beta[o - static_cast<std::size_t>(d_)] = s;
        }
    }
    if (hidden) *hidden = std::move(h);
    return out;
}

namespace {

    std::vector<double> net_input(const GroupStats& stats)
    {
        std::vector<double> x = stats.mean;
        x.insert(x.end(), stats.variance.begin(), stats.variance.end());
        return x;
    }

} // namespace

TransferNet::Affine TransferNet::affine_params(const GroupStats& stats) const
{
    if (static_cast<int>(stats.mean.size()) != d_ || static_cast<int>(stats.variance.size()) != d_) {
        throw std::invalid_argument("affine_params: stats dimension does not match the net");
    }
    return forward(net_input(stats), nullptr);
}

double alignment_loss(const TransferNet& net, const AlignmentSet& set, std::vector<double>* grad)
{
    const std::size_t m = set.source.size();
    if (m == 0 || set.target.size() != m) throw std::invalid_argument("alignment_loss: groups must be non-empty and paired");
    const auto d = static_cast<std::size_t>(net.genome_len());
    const std::vector<double> x = net_input(set.stats);
    std::vector<double> h;
    const auto aff = net.forward(x, &h);
    std::vector<double> dgamma(d, 0.0), dbeta(d, 0.0);
    double loss = 0.0;
    const double scale = 2.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& z = set.source[i].genes;
        const auto& t = set.target[i].genes;
        for (std::size_t k = 0; k < d; ++k) {
            const double s = (z[k] - set.stats.mean[k]) / std::sqrt(set.stats.variance[k] + set.eps);
            const double e = (1.0 + aff.gamma[k]) * s + aff.beta[k] - t[k];
            loss += e * e;
            dgamma[k] += scale * e * s;
            dbeta[k] += scale * e;
        }
    }
    loss /= static_cast<double>(m);
    if (!grad) return loss;

    const std::size_t in = 2 * d;
    const auto& theta = net.params();
    grad->assign(theta.size(), 0.0);
    const std::size_t off_b1 = H * in;
    const std::size_t off_w2 = off_b1 + H;
    const std::size_t off_b2 = off_w2 + in * H;
    std::vector<double> dh(H, 0.0);
    for (std::size_t o = 0; o < in; ++o) {
        const double go = o < d ? dgamma[o] : dbeta[o - d];
        (*grad)[off_b2 + o] = go;
        for (int j = 0; j < H; ++j) {
            (*grad)[off_w2 + o * H + static_cast<std::size_t>(j)] = go * h[static_cast<std::size_t>(j)];
            dh[static_cast<std::size_t>(j)] += go * theta[off_w2 + o * H + static_cast<std::size_t>(j)];
        }
    }
    for (int j = 0; j < H; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double gp = dh[js] * (1.0 - h[js] * h[js]);
        (*grad)[off_b1 + js] = gp;
        for (std::size_t i = 0; i < in; ++i) (*grad)[js * in + i] = gp * x[i];
    }
    return loss;
}

TrainResult train_alignment(TransferNet& net, const AlignmentSet& set, int epochs, double learning_rate)
{
    if (epochs < 0) throw std::invalid_argument("train_alignment: epochs must be >= 0");
    TrainResult r;
    std::vector<double> grad;
    double loss = alignment_loss(net, set, &grad);
    r.loss_before = loss;
    double lr = learning_rate;
    auto& theta = net.params();
    for (int e = 0; e < epochs; ++e) {
        const std::vector<double> saved = theta;
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
        std::vector<double> g2;
        const double next = alignment_loss(net, set, &g2);
        if (std::isfinite(next) && next <= loss) {
            loss = next;
            grad.swap(g2);
            r.accepted_losses.push_back(loss);
        } else {
            theta = saved;
            lr *= 0.5;
        }
    }
    r.loss_after = loss;
    return r;
}

namespace {

    // Group members sorted by scalar fitness (descending, ties to lower index).
    std::vector<std::size_t> ranked_group(const std::vector<Individual>& pop, int task)
    {
        std::vector<std::size_t> g;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (pop[i].skill_factor == task) g.push_back(i);
        }
        std::stable_sort(g.begin(), g.end(),
                         [&](std::size_t a, std::size_t b) { return pop[a].scalar_fitness > pop[b].scalar_fitness; });
        return g;
    }

    std::vector<Chromosome> padded(const std::vector<Individual>& pop, const std::vector<std::size_t>& idx,
                                   std::size_t m)
    {
        std::vector<Chromosome> out;
        for (std::size_t i = 0; i < m; ++i) out.push_back(pop[idx[i % idx.size()]].chromosome);
        return out;
    }

} // namespace

TransferReport transfer_event(std::vector<Individual>& population, const EncodingSpec& spec,
                              std::vector<TransferNet>& nets, const TransferConfig& cfg, std::mt19937_64& rng,
                              const BatchEvaluator& evaluate)
{
    TransferReport rep;
    const std::size_t n = population.size();
    const int k = population.empty() ? 0 : static_cast<int>(population[0].costs.size());
    if (static_cast<int>(nets.size()) != k) throw std::invalid_argument("transfer_event: one net per task required");

    std::vector<int> live;
    for (int j = 0; j < k; ++j) {
        if (std::any_of(population.begin(), population.end(), [&](const Individual& z) { return z.skill_factor == j; })) {
            live.push_back(j);
        }
    }
    if (live.size() < 2) {
        rep.skipped = true;
        rep.reason = "fewer than two non-empty skill groups";
        return rep;
    }
    // Uniform unordered pair of live tasks.
    const std::size_t pairs = live.size() * (live.size() - 1) / 2;
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, pairs - 1)(rng);
    std::size_t ia = 0, ib = 1;
    for (std::size_t a = 0; a < live.size(); ++a) {
        const std::size_t row = live.size() - a - 1;
        if (pick < row) {
            ia = a;
            ib = a + 1 + pick;
            break;
        }
        pick -= row;
    }
    rep.task_a = live[ia];
    rep.task_b = live[ib];

    const std::size_t half = std::max<std::size_t>(1, n / 2);
    auto g1 = ranked_group(population, rep.task_a);
    auto g2 = ranked_group(population, rep.task_b);
    g1.resize(std::min(g1.size(), half));
    g2.resize(std::min(g2.size(), half));
    const std::size_t m = std::max(g1.size(), g2.size());

    std::vector<Chromosome> z1, z2;
    for (auto i : g1) z1.push_back(population[i].chromosome);
    for (auto i : g2) z2.push_back(population[i].chromosome);
    AlignmentSet s12{group_stats(z1), padded(population, g1, m), padded(population, g2, m), cfg.eps};
    AlignmentSet s21{group_stats(z2), padded(population, g2, m), padded(population, g1, m), cfg.eps};

    auto& net_a = nets[static_cast<std::size_t>(rep.task_a)];
    auto& net_b = nets[static_cast<std::size_t>(rep.task_b)];
    const auto tr_a = train_alignment(net_a, s12, cfg.epochs, cfg.learning_rate);
    const auto tr_b = train_alignment(net_b, s21, cfg.epochs, cfg.learning_rate);
    rep.loss_before_a = tr_a.loss_before;
    rep.loss_after_a = tr_a.loss_after;
    rep.loss_before_b = tr_b.loss_before;
    rep.loss_after_b = tr_b.loss_after;

    std::vector<Individual> moved;
    auto transform = [&](const std::vector<Chromosome>& group, const AlignmentSet& set, const TransferNet& net,
                         int target_task) {
        const auto aff = net.affine_params(set.stats);
        for (const auto& z : group) {
            Individual ind;
            ind.chromosome = repair_genes(apply_affine(z, set.stats, aff.gamma, aff.beta, cfg.eps), spec);
            ind.costs.assign(static_cast<std::size_t>(k), kSentinelCost);
            ind.trees.assign(static_cast<std::size_t>(k), std::nullopt);
            ind.skill_factor = target_task;
            moved.push_back(std::move(ind));
        }
    };
    transform(z1, s12, net_a, rep.task_b);
    transform(z2, s21, net_b, rep.task_a);
    evaluate(moved);
    rep.transformed = static_cast<int>(moved.size());

    std::vector<Individual> merged = population;
    for (auto& z : moved) merged.push_back(std::move(z));
    assign_metrics(merged);
    std::vector<std::size_t> order(merged.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return merged[a].scalar_fitness > merged[b].scalar_fitness;
    });
    order.resize(n);
    std::sort(order.begin(), order.end());
    std::vector<Individual> next;
    next.reserve(n);
    for (auto i : order) {
        if (i >= n) ++rep.admitted;
        next.push_back(std::move(merged[i]));
    }
    population = std::move(next);
    assign_metrics(population);
    return rep;
}

} // namespace nmips
