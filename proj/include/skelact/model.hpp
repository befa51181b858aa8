#pragma once

#include <string>

#include "skelact/cnn.hpp"
#include "skelact/skeleton.hpp"
#include "skelact/transformer.hpp"

namespace skelact {

struct TrainConfig {
    double lr = 0.1;
    double lr_decay = 0.1;
    std::vector<int64_t> milestones = {60, 90};
    double momentum = 0.9;
    bool nesterov = true;
    int64_t batch = 32;
    int64_t epochs = 110;
    double label_smoothing = 0.1;
    double temperature = 1.0;
    uint64_t seed = 0;

    void validate() const;
};

struct ModelConfig {
    int64_t num_classes = 4;
    int64_t frames = 60, joints = 25, entities = 2;
    WindowSpec window;  // [20, 1, 2]
    int64_t tf_blocks = 3, tf_heads = 8, tf_dim = 64, tf_qkv = 8;
    int64_t cnn_point = 32, cnn_post1 = 96, cnn_post2 = 64;
    int64_t cnn_fusion = 64, cnn_hidden = 256;
    double fusion_weight = 0.5;
    std::string fusion_space = "logit";  // logit | prob
    bool normalize = true;
    std::string permute_mode = "per_sample";  // per_sample | per_epoch
    TrainConfig train;

    // run plumbing (flag/config-file equivalents)
    std::string data_dir = "data";
    std::string out_dir = "out";
    int64_t per_class = 50;
    double noise = 0.05;
    bool sweep_fusion = false;
    std::string resume;
    std::string inject_fault;

    TransformerConfig transformer_config() const;
    CnnConfig cnn_config() const;
    void validate() const;

    // divides every width by 8 (L=1, H=2): the small verification model
    void apply_micro_widths();
};

template <typename T>
struct TwoStreamModel {
    ModelConfig cfg;
    TransformerStream<T> transformer;
    CnnStream<T> cnn;

    static TwoStreamModel create(const ModelConfig& cfg, Rng& rng);

    struct StreamLogits {
        Tensor<T> transformer;  // (n, k)
        Tensor<T> cnn;          // (n, k)
    };
    // coords and motion are prepared batches (n, 3, t, v, m)
    StreamLogits forward(const Tensor<T>& coords, const Tensor<T>& motion,
                         bool train);

    std::vector<std::pair<std::string, Tensor<T>>> named_params() const;
    std::vector<std::pair<std::string, std::vector<T>*>> named_buffers();
};

// Assembles a training/eval batch from dataset samples: entity permutation
// (when given), optional per-sequence mean subtraction, motion differencing.
struct BatchInput {
    Tensor<float> coords;  // (n, 3, t, v, m)
    Tensor<float> motion;
    std::vector<int64_t> targets;
};
BatchInput make_batch(const DatasetSplit& split,
                      const std::vector<int64_t>& indices, bool normalize,
                      const std::vector<std::vector<int>>* entity_perms);

}  // namespace skelact
