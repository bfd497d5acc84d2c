#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nmips/genome.hpp"
#include "nmips/mfo.hpp"

namespace nmips {

struct GroupStats {
    std::vector<double> mean;
    std::vector<double> variance; // population variance
    int group_size = 0;
};

GroupStats group_stats(const std::vector<Chromosome>& group);

inline constexpr double kStabilityEpsilon = 1e-8;

/// z' = (1 + gamma) * (z - mu) / sqrt(sigma^2 + eps) + beta, elementwise.
std::vector<double> apply_affine(const Chromosome& z, const GroupStats& stats, const std::vector<double>& gamma,
                                 const std::vector<double>& beta, double eps = kStabilityEpsilon);

/// Rounds every entry and wraps it into its position's legal domain.
Chromosome repair_genes(const std::vector<double>& raw, const EncodingSpec& spec);

/// (mu || sigma^2) -> tanh hidden layer -> (gamma || beta).
class TransferNet {
public:
    static constexpr int kHidden = 32;

    TransferNet() = default;
    /// Hidden layer drawn from the stream; the output layer starts at zero
    /// unless `zero_output` is false.
    TransferNet(int genome_len, std::mt19937_64& rng, bool zero_output = true);

    [[nodiscard]] int genome_len() const { return d_; }
    [[nodiscard]] std::vector<double>& params() { return theta_; }
    [[nodiscard]] const std::vector<double>& params() const { return theta_; }

    struct Affine {
        std::vector<double> gamma;
        std::vector<double> beta;
    };
    [[nodiscard]] Affine affine_params(const GroupStats& stats) const;

    /// Forward pass that also returns the hidden activations.
    [[nodiscard]] Affine forward(const std::vector<double>& input, std::vector<double>* hidden) const;

private:
    int d_ = 0;
    // Layout: W1 (H x 2d), b1 (H), W2 (2d x H), b2 (2d).
    std::vector<double> theta_;
};

/// Source and target genomes paired by position, plus the source statistics.
struct AlignmentSet {
    GroupStats stats;
    std::vector<Chromosome> source;
    std::vector<Chromosome> target;
    double eps = kStabilityEpsilon;
};

/// (1/m) sum_i |z'_i - target_i|^2; fills the gradient w.r.t. params() if asked.
double alignment_loss(const TransferNet& net, const AlignmentSet& set, std::vector<double>* grad = nullptr);

struct TrainResult {
    double loss_before = 0.0;
    double loss_after = 0.0;
    std::vector<double> accepted_losses; // loss after each accepted step
};

/// Gradient descent; a step that raises the loss is undone and the rate halved.
TrainResult train_alignment(TransferNet& net, const AlignmentSet& set, int epochs, double learning_rate = 0.01);

struct TransferConfig {
    int epochs = 100;
    double learning_rate = 0.01;
    double eps = kStabilityEpsilon;
};

struct TransferReport {
    int generation = 0;
    bool skipped = false;
    std::string reason;
    int task_a = -1;
    int task_b = -1;
    double loss_before_a = 0.0;
    double loss_after_a = 0.0;
    double loss_before_b = 0.0;
    double loss_after_b = 0.0;
    int transformed = 0;
    int admitted = 0;
};

/// Scores every individual on its skill factor (fills costs and trees).
using BatchEvaluator = std::function<void(std::vector<Individual>&)>;

/// One affine knowledge-transfer event over a random task pair. The
/// population is replaced by the top N of population + transformed
/// individuals, ranked by scalar fitness recomputed over that union.
TransferReport transfer_event(std::vector<Individual>& population, const EncodingSpec& spec,
                              std::vector<TransferNet>& nets, const TransferConfig& cfg, std::mt19937_64& rng,
                              const BatchEvaluator& evaluate);

} // namespace nmips
