#include "skelact/model.hpp"

namespace skelact {

void TrainConfig::validate() const {
    check(lr > 0 || lr == 0, "learning rate must be non-negative");
    check(lr_decay > 0, "lr decay factor must be positive");
    check(momentum >= 0, "momentum must be non-negative");
    check(batch >= 1, "batch size must be positive");
    check(epochs >= 1, "epoch count must be positive");
    check(label_smoothing >= 0 && label_smoothing < 1,
          "label smoothing must lie in [0, 1)");
    check(temperature > 0, "temperature must be positive");
    // milestones at or past the final epoch never fire but are not an error
    // (short runs keep the default schedule)
    for (size_t i = 1; i < milestones.size(); ++i)
        check(milestones[i] > milestones[i - 1],
              "milestones must be strictly increasing");
}

void ModelConfig::validate() const {
    check(num_classes >= 2, "need at least 2 classes");
    check(frames >= 2 && joints >= 1 && entities >= 1,
          "invalid input dimensions");
    window.validate(frames, joints, entities);
    check(tf_blocks >= 1 && tf_heads >= 1 && tf_dim >= 2 && tf_qkv >= 1,
          "invalid transformer dimensions");
    check(tf_dim % tf_heads == 0,
          "transformer width must be divisible by the head count");
    check(tf_dim % 2 == 0, "transformer width must be even");
    check(cnn_point >= 2 && cnn_post1 >= 1 && cnn_post2 >= 1 &&
              cnn_fusion >= 1 && cnn_hidden >= 1,
          "invalid cnn widths");
    check(fusion_weight >= 0.0 && fusion_weight <= 1.0,
          "fusion weight must lie in [0, 1]");
    check(fusion_space == "logit" || fusion_space == "prob",
          "fusion space must be 'logit' or 'prob'");
    check(permute_mode == "per_sample" || permute_mode == "per_epoch",
          "permute mode must be 'per_sample' or 'per_epoch'");
    train.validate();
}

TransformerConfig ModelConfig::transformer_config() const {
    TransformerConfig c;
    c.frames = frames;
    c.joints = joints;
    c.entities = entities;
    c.window = window;
    c.blocks = tf_blocks;
    c.heads = tf_heads;
    c.dim = tf_dim;
    c.c_qkv = tf_qkv;
    c.num_classes = num_classes;
    return c;
}

CnnConfig ModelConfig::cnn_config() const {
    CnnConfig c;
    c.frames = frames;
    c.joints = joints;
    c.entities = entities;
    c.point_channels = cnn_point;
    c.post1 = cnn_post1;
    c.post2 = cnn_post2;
    c.fusion = cnn_fusion;
    c.hidden = cnn_hidden;
    c.num_classes = num_classes;
    return c;
}

void ModelConfig::apply_micro_widths() {
    tf_blocks = 1;
    tf_heads = 2;
    tf_dim = 8;
    cnn_point = 4;
    cnn_post1 = 12;
    cnn_post2 = 8;
    cnn_fusion = 8;
    cnn_hidden = 32;
}

template <typename T>
TwoStreamModel<T> TwoStreamModel<T>::create(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    TwoStreamModel m;
    m.cfg = cfg;
    m.transformer = TransformerStream<T>::create(cfg.transformer_config(), rng);
    m.cnn = CnnStream<T>::create(cfg.cnn_config(), rng);
    return m;
}

template <typename T>
typename TwoStreamModel<T>::StreamLogits TwoStreamModel<T>::forward(
    const Tensor<T>& coords, const Tensor<T>& motion, bool train) {
    StreamLogits out;
    out.transformer = transformer.forward(coords, train);
    out.cnn = cnn.forward(coords, motion);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>>
TwoStreamModel<T>::named_params() const {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    transformer.collect_params("tf.", out);
    cnn.collect_params("cnn.", out);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, std::vector<T>*>>
TwoStreamModel<T>::named_buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    transformer.collect_buffers("tf.", out);
    return out;
}

BatchInput make_batch(const DatasetSplit& split,
                      const std::vector<int64_t>& indices, bool normalize,
                      const std::vector<std::vector<int>>* entity_perms) {
    check(!indices.empty(), "empty batch");
    const auto& first = split.samples[indices[0]];
    const int64_t t = first.frames(), v = first.joints(), m = first.entities();
    const int64_t n = static_cast<int64_t>(indices.size());
    const int64_t sample_len = 3 * t * v * m;

    BatchInput b;
    b.coords = Tensor<float>({n, 3, t, v, m});
    b.motion = Tensor<float>({n, 3, t, v, m});
    for (int64_t i = 0; i < n; ++i) {
        const auto& src = split.samples[indices[i]];
        check_shape(src.frames() == t && src.joints() == v &&
                        src.entities() == m,
                    "batch samples must share dimensions");
        SkeletonSequence seq = src;
        if (entity_perms)
            seq = permute_entities(seq, (*entity_perms)[indices[i]]);
        if (normalize) seq = subtract_mean(seq);
        auto mo = motion_difference(seq.coords);
        std::copy(seq.coords.values().begin(), seq.coords.values().end(),
                  b.coords.raw_values().begin() + i * sample_len);
        std::copy(mo.values().begin(), mo.values().end(),
                  b.motion.raw_values().begin() + i * sample_len);
        b.targets.push_back(seq.label);
    }
    return b;
}

template struct TwoStreamModel<float>;
template struct TwoStreamModel<double>;

}  // namespace skelact
