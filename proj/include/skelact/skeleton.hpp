#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "skelact/rng.hpp"
#include "skelact/tensor.hpp"

namespace skelact {

// One labeled interaction sample. coords is (3, T, V, M) in meters.
struct SkeletonSequence {
    Tensor<float> coords;
    int64_t label = -1;
    std::string source_id;
    int64_t original_frames = 0;

    int64_t frames() const { return coords.shape()[1]; }
    int64_t joints() const { return coords.shape()[2]; }
    int64_t entities() const { return coords.shape()[3]; }
};

struct DatasetSplit {
    std::vector<SkeletonSequence> samples;
    int64_t num_classes = 0;
    std::vector<std::string> class_names;
    std::string role;  // train | val | test
};

// NTU `.skeleton` text layout: frame count; per frame a body count; per body
// one 10-field info line, a joint-count line, then one 12-field line per
// joint whose first three fields are x y z. Bodies absent in a frame are
// zero-filled; M is the maximum body count over frames.
SkeletonSequence parse_ntu_skeleton(std::istream& in);
SkeletonSequence parse_ntu_skeleton_file(const std::string& path);
std::string write_ntu_skeleton(const SkeletonSequence& seq);

// Uniform nearest-index resampling to exactly t_target frames.
SkeletonSequence resample_frames(const SkeletonSequence& seq,
                                 int64_t t_target);

// Appends zero-filled entities up to m_target. Truncation is never silent.
SkeletonSequence pad_entities(const SkeletonSequence& seq, int64_t m_target);

// Frame-to-frame coordinate difference, final frame zero-padded so both
// branches consume the same (3, T, V, M) shape.
Tensor<float> motion_difference(const Tensor<float>& coords);

SkeletonSequence permute_entities(const SkeletonSequence& seq,
                                  const std::vector<int>& perm);

// Uniform random permutation when training, identity in val/test context.
std::vector<int> sample_entity_permutation(int64_t m, Rng& rng,
                                           bool train_context);

// Subtracts the per-channel mean over all frames, joints and entities.
SkeletonSequence subtract_mean(const SkeletonSequence& seq);

// Synthetic two-entity interaction data (V=25, M=2). Class archetypes:
// approach, retreat, circle, wave.
struct SyntheticSpec {
    std::vector<std::string> classes = {"approach", "retreat", "circle",
                                        "wave"};
    int64_t per_class = 50;
    int64_t frames = 60;
    double noise = 0.05;
    uint64_t seed = 0;
    std::string role = "train";
};

const std::vector<std::string>& synthetic_archetypes();
DatasetSplit generate_synthetic_dataset(const SyntheticSpec& spec);

// Split cache files: header magic THCTDS1, little-endian, then
// (label u32, T u32, V u32, M u32, coords f32[]) records.
void save_dataset(const std::string& path, const DatasetSplit& split);
DatasetSplit load_dataset(const std::string& path, const std::string& role);

}  // namespace skelact
