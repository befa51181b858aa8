#pragma once

#include <map>

#include "skelact/model.hpp"

namespace skelact {

// Smoothed cross entropy with temperature over (n, k) logits (or a single
// (k) row): p = softmax(logits / tau), q = (1 - eps) * onehot + eps / k,
// loss = mean_n of -sum_k q_k log p_k.
template <typename T>
Tensor<T> cross_entropy_smoothed(const Tensor<T>& logits,
                                 const std::vector<int64_t>& targets, T eps,
                                 T tau);

// v <- mu * v + g;  p <- p - lr * (g + mu * v)   (nesterov form)
// plain momentum applies p <- p - lr * v instead.
template <typename T>
struct SgdOptimizer {
    double momentum = 0.9;
    bool nesterov = true;
    std::map<std::string, std::vector<T>> velocity;

    void step(const std::vector<std::pair<std::string, Tensor<T>>>& params,
              double lr);
};

double lr_at_epoch(const TrainConfig& cfg, int64_t epoch);

struct FusionConfig {
    double weight = 0.5;          // applied to the transformer stream
    std::string space = "logit";  // logit | prob
};

// fused = w * s_transformer + (1 - w) * s_cnn, in the configured space
std::vector<float> late_fuse(const std::vector<float>& scores_t,
                             const std::vector<float>& scores_c,
                             const FusionConfig& cfg);

struct EvalMetrics {
    double loss = 0.0;
    double top1 = 0.0;
    std::vector<double> per_class;
    std::vector<std::vector<int64_t>> confusion;  // [true][predicted]
};

EvalMetrics evaluate(TwoStreamModel<float>& model, const DatasetSplit& split,
                     const FusionConfig& fusion);

// Top-1 accuracy for w in {0.0, 0.1, ..., 1.0}; stream logits are computed
// once and re-fused per weight.
std::vector<std::pair<double, double>> sweep_fusion(
    TwoStreamModel<float>& model, const DatasetSplit& split,
    const std::string& space);

struct EpochRow {
    int64_t epoch;
    std::string split;
    double loss;
    double top1;
};

struct TrainResult {
    std::vector<EpochRow> rows;
    double best_val_top1 = 0.0;
    int64_t best_epoch = -1;
    std::string best_checkpoint;
    std::string last_checkpoint;
    std::string metrics_csv;
};

// Seeded training loop: per epoch shuffles, applies entity-permutation
// augmentation (train split only), steps SGD, evaluates on val, appends CSV
// rows and snapshots best/last checkpoints under out_dir. A non-finite loss
// aborts with diagnostics. resume_path restarts from a last-checkpoint.
TrainResult train(TwoStreamModel<float>& model, const DatasetSplit& train_split,
                  const DatasetSplit& val_split, const std::string& out_dir,
                  const std::string& resume_path = "");

// --- checkpoints ---

struct CheckpointTensor {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct Checkpoint {
    uint32_t version = 1;
    std::string config_text;
    std::vector<CheckpointTensor> tensors;
    std::string rng_state;
    uint32_t epoch = 0;
};

Checkpoint snapshot(TwoStreamModel<float>& model,
                    const SgdOptimizer<float>& opt, const Rng& rng,
                    int64_t epoch);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
// Restores parameters, buffers and velocities by name. Shape mismatches
// raise a DataError naming the tensor.
void apply_checkpoint(const Checkpoint& ckpt, TwoStreamModel<float>& model,
                      SgdOptimizer<float>* opt);

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochRow>& rows);

}  // namespace skelact
