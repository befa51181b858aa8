#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "skelact/skeleton.hpp"

using namespace skelact;

namespace {

// builds a well-formed .skeleton text with joint j of body b at
// (j + 100 b, 2 j, 3 j) in frame t shifted by t
std::string make_fixture(int64_t frames, int64_t bodies, int64_t joints) {
    std::ostringstream os;
    os << frames << "\n";
    for (int64_t t = 0; t < frames; ++t) {
        os << bodies << "\n";
        for (int64_t b = 0; b < bodies; ++b) {
            os << "72057594037931101 0 1 1 1 1 0.1 -0.2 0 2\n";
            os << joints << "\n";
            for (int64_t j = 0; j < joints; ++j)
                os << (j + 100.0 * b + t) << " " << (2.0 * j) << " "
                   << (3.0 * j) << " 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 2\n";
        }
    }
    return os.str();
}

}  // namespace

TEST_CASE("parser assembles coordinates from the fixture") {
    std::istringstream in(make_fixture(1, 1, 25));
    auto seq = parse_ntu_skeleton(in);
    CHECK(seq.coords.shape() == Shape{3, 1, 25, 1});
    for (int64_t j = 0; j < 25; ++j) {
        CHECK(seq.coords.at({0, 0, j, 0}) == doctest::Approx(j));
        CHECK(seq.coords.at({1, 0, j, 0}) == doctest::Approx(2.0 * j));
        CHECK(seq.coords.at({2, 0, j, 0}) == doctest::Approx(3.0 * j));
    }
}

TEST_CASE("parser fills every declared body") {
    std::istringstream in(make_fixture(2, 2, 25));
    auto seq = parse_ntu_skeleton(in);
    CHECK(seq.entities() == 2);
    CHECK(seq.coords.at({0, 0, 3, 1}) == doctest::Approx(103.0));
    CHECK(seq.coords.at({0, 1, 3, 0}) == doctest::Approx(4.0));
}

TEST_CASE("parser reports the offending line") {
    // drop one joint line from a declared 25
    auto text = make_fixture(1, 1, 25);
    const auto cut = text.rfind("24 ");
    text.erase(cut, text.find('\n', cut) + 1 - cut);
    std::istringstream in(text);
    CHECK_THROWS_WITH_AS(parse_ntu_skeleton(in),
                         doctest::Contains("line 28"), DataError);

    std::istringstream bad("1\n1\nnot numeric at all x x x x x x\n");
    CHECK_THROWS_AS(parse_ntu_skeleton(bad), DataError);

    std::istringstream truncated("2\n1\n");
    CHECK_THROWS_AS(parse_ntu_skeleton(truncated), DataError);
}

TEST_CASE("parse, serialize, parse round-trips exactly") {
    std::istringstream in(make_fixture(3, 2, 25));
    auto seq = parse_ntu_skeleton(in);
    std::istringstream in2(write_ntu_skeleton(seq));
    auto seq2 = parse_ntu_skeleton(in2);
    CHECK(seq.coords.values() == seq2.coords.values());
}

TEST_CASE("resample picks nearest indices") {
    Rng rng(1);
    Tensor<float> coords({3, 4, 2, 1});
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < 4; ++t)
            for (int64_t v = 0; v < 2; ++v)
                coords.raw_values()[(c * 4 + t) * 2 + v] =
                    static_cast<float>(t);
    SkeletonSequence seq{coords, 0, "fix", 4};

    auto same = resample_frames(seq, 4);
    CHECK(same.coords.values() == coords.values());

    auto half = resample_frames(seq, 2);  // floor(i*4/2) -> frames {0, 2}
    CHECK(half.coords.at({0, 0, 0, 0}) == 0.0f);
    CHECK(half.coords.at({0, 1, 0, 0}) == 2.0f);

    // constant sequences stay constant for any target
    SkeletonSequence c{Tensor<float>({3, 5, 2, 1}, 0.7f), 0, "c", 5};
    auto rc = resample_frames(c, 11);
    for (float v : rc.coords.values()) CHECK(v == 0.7f);

    // applying the same target twice is idempotent
    auto once = resample_frames(seq, 3);
    auto twice = resample_frames(once, 3);
    CHECK(once.coords.values() == twice.coords.values());
}

TEST_CASE("pad_entities appends zeros and never truncates") {
    Rng rng(2);
    SkeletonSequence seq{Tensor<float>::uniform({3, 4, 5, 1}, rng, -1, 1), 1,
                         "p", 4};
    auto padded = pad_entities(seq, 2);
    CHECK(padded.entities() == 2);
    double sum0 = 0, sum1 = 0;
    for (float v : seq.coords.values()) sum0 += std::fabs(v);
    for (float v : padded.coords.values()) sum1 += std::fabs(v);
    CHECK(sum0 == doctest::Approx(sum1));
    for (int64_t t = 0; t < 4; ++t)
        CHECK(padded.coords.at({0, t, 2, 1}) == 0.0f);

    CHECK(pad_entities(seq, 1).coords.values() == seq.coords.values());
    CHECK_THROWS(pad_entities(padded, 1));
}

TEST_CASE("motion difference follows the frame delta rule") {
    // linear motion: joint coordinates (t, 2t, 0)
    Tensor<float> coords({3, 5, 2, 1});
    for (int64_t t = 0; t < 5; ++t)
        for (int64_t v = 0; v < 2; ++v) {
            coords.raw_values()[(0 * 5 + t) * 2 + v] = static_cast<float>(t);
            coords.raw_values()[(1 * 5 + t) * 2 + v] =
                static_cast<float>(2 * t);
        }
    auto m = motion_difference(coords);
    CHECK(m.shape() == coords.shape());
    for (int64_t t = 0; t < 4; ++t) {
        CHECK(m.at({0, t, 0, 0}) == 1.0f);
        CHECK(m.at({1, t, 0, 0}) == 2.0f);
        CHECK(m.at({2, t, 0, 0}) == 0.0f);
    }
    for (int64_t c = 0; c < 3; ++c) CHECK(m.at({c, 4, 0, 0}) == 0.0f);

    // static sequence: all zero
    Tensor<float> stat({3, 4, 2, 2}, 0.3f);
    auto ms = motion_difference(stat);
    for (float v : ms.values()) CHECK(v == 0.0f);

    // seeded random vs a direct loop
    Rng rng(3);
    auto x = Tensor<float>::uniform({3, 6, 4, 2}, rng, -1, 1);
    auto mm = motion_difference(x);
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < 5; ++t)
            for (int64_t v = 0; v < 4; ++v)
                for (int64_t e = 0; e < 2; ++e)
                    CHECK(mm.at({c, t, v, e}) ==
                          x.at({c, t + 1, v, e}) - x.at({c, t, v, e}));
}

TEST_CASE("motion difference kills constant translation") {
    Rng rng(4);
    auto x = Tensor<float>::uniform({3, 5, 3, 2}, rng, -1, 1);
    auto shifted = x.clone();
    for (int64_t i = 0; i < shifted.numel(); ++i)
        shifted.raw_values()[i] += (i < shifted.numel() / 3)       ? 0.7f
                                   : (i < 2 * shifted.numel() / 3) ? -0.2f
                                                                   : 1.1f;
    auto ma = motion_difference(x);
    auto mb = motion_difference(shifted);
    for (int64_t i = 0; i < ma.numel(); ++i)
        CHECK(std::fabs(ma.values()[i] - mb.values()[i]) < 1e-6);
}

TEST_CASE("entity permutation is an exact bijection") {
    Rng rng(5);
    SkeletonSequence seq{Tensor<float>::uniform({3, 4, 3, 2}, rng, -1, 1), 2,
                         "e", 4};

    // M=1 only has the identity
    SkeletonSequence single{Tensor<float>::uniform({3, 4, 3, 1}, rng, -1, 1),
                            0, "s", 4};
    CHECK(permute_entities(single, {0}).coords.values() ==
          single.coords.values());

    auto swapped = permute_entities(seq, {1, 0});
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < 4; ++t)
            for (int64_t v = 0; v < 3; ++v) {
                CHECK(swapped.coords.at({c, t, v, 0}) ==
                      seq.coords.at({c, t, v, 1}));
                CHECK(swapped.coords.at({c, t, v, 1}) ==
                      seq.coords.at({c, t, v, 0}));
            }

    auto back = permute_entities(swapped, {1, 0});
    CHECK(back.coords.values() == seq.coords.values());

    CHECK_THROWS_AS(permute_entities(seq, {0, 0}), ShapeError);
    CHECK_THROWS_AS(permute_entities(seq, {0}), ShapeError);

    // motion differencing commutes with entity permutation
    auto m_then_p = permute_entities(
        SkeletonSequence{motion_difference(seq.coords), 0, "", 4}, {1, 0});
    auto p_then_m = motion_difference(swapped.coords);
    CHECK(m_then_p.coords.values() == p_then_m.values());
}

TEST_CASE("entity permutation sampling") {
    Rng rng(6);
    CHECK(sample_entity_permutation(1, rng, true) == std::vector<int>{0});

    int swaps = 0;
    for (int i = 0; i < 10000; ++i)
        if (sample_entity_permutation(2, rng, true)[0] == 1) ++swaps;
    CHECK(swaps > 4800);
    CHECK(swaps < 5200);

    for (int i = 0; i < 10; ++i)
        CHECK(sample_entity_permutation(2, rng, false) ==
              std::vector<int>{0, 1});
}

TEST_CASE("synthetic approach class converges monotonically") {
    SyntheticSpec spec;
    spec.classes = {"approach", "retreat"};
    spec.per_class = 3;
    spec.frames = 20;
    spec.noise = 0.0;
    spec.seed = 11;
    auto split = generate_synthetic_dataset(spec);
    for (const auto& seq : split.samples) {
        if (split.class_names[seq.label] != "approach") continue;
        double prev = 1e9;
        for (int64_t t = 0; t < seq.frames(); ++t) {
            double cx[2] = {0, 0}, cy[2] = {0, 0};
            for (int64_t e = 0; e < 2; ++e)
                for (int64_t v = 0; v < 25; ++v) {
                    cx[e] += seq.coords.at({0, t, v, e}) / 25.0;
                    cy[e] += seq.coords.at({1, t, v, e}) / 25.0;
                }
            const double d = std::hypot(cx[0] - cx[1], cy[0] - cy[1]);
            CHECK(d < prev);
            prev = d;
        }
    }
}

TEST_CASE("synthetic generation is deterministic under the seed") {
    SyntheticSpec spec;
    spec.per_class = 4;
    spec.frames = 12;
    spec.seed = 21;
    auto a = generate_synthetic_dataset(spec);
    auto b = generate_synthetic_dataset(spec);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i)
        CHECK(a.samples[i].coords.values() == b.samples[i].coords.values());

    CHECK_THROWS(generate_synthetic_dataset(SyntheticSpec{{"approach"}}));
}

TEST_CASE("a 1-nearest-neighbor baseline beats chance") {
    SyntheticSpec spec;
    spec.per_class = 50;
    spec.frames = 20;
    spec.noise = 0.05;
    spec.seed = 7;
    spec.role = "train";
    auto train = generate_synthetic_dataset(spec);
    spec.per_class = 10;
    spec.seed = 8;
    spec.role = "val";
    auto val = generate_synthetic_dataset(spec);

    int64_t correct = 0;
    for (const auto& q : val.samples) {
        double best = 1e300;
        int64_t best_label = -1;
        for (const auto& r : train.samples) {
            double d = 0;
            for (int64_t i = 0; i < q.coords.numel(); ++i) {
                const double diff = q.coords.values()[i] - r.coords.values()[i];
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                best_label = r.label;
            }
        }
        if (best_label == q.label) ++correct;
    }
    const double acc =
        static_cast<double>(correct) / static_cast<double>(val.samples.size());
    CHECK(acc > 0.25);  // the task is learnable
}

TEST_CASE("dataset cache round-trips") {
    SyntheticSpec spec;
    spec.per_class = 3;
    spec.frames = 8;
    spec.seed = 5;
    auto split = generate_synthetic_dataset(spec);

    const auto dir = std::filesystem::temp_directory_path() / "skelact_ds";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "split.thctds").string();
    save_dataset(path, split);
    auto loaded = load_dataset(path, "train");
    REQUIRE(loaded.samples.size() == split.samples.size());
    CHECK(loaded.num_classes == split.num_classes);
    CHECK(loaded.class_names == split.class_names);
    for (size_t i = 0; i < split.samples.size(); ++i) {
        CHECK(loaded.samples[i].label == split.samples[i].label);
        CHECK(loaded.samples[i].coords.values() ==
              split.samples[i].coords.values());
    }

    // corrupting the magic is a structured failure
    {
        std::ofstream f(path, std::ios::binary | std::ios::in);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_dataset(path, "train"), DataError);
}

TEST_CASE("train and val sample ids are disjoint") {
    SyntheticSpec spec;
    spec.per_class = 4;
    spec.frames = 8;
    spec.seed = 1;
    spec.role = "train";
    auto train = generate_synthetic_dataset(spec);
    spec.seed = 2;
    spec.role = "val";
    auto val = generate_synthetic_dataset(spec);
    for (const auto& a : train.samples)
        for (const auto& b : val.samples) CHECK(a.source_id != b.source_id);
}
