#include "skelact/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "skelact/common.hpp"

namespace skelact {

namespace {

constexpr int64_t kNtuJointFields = 12;
constexpr int64_t kNtuBodyInfoFields = 10;

struct LineReader {
    std::istream& in;
    int64_t line_no = 0;

    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            fields.clear();
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) fields.push_back(tok);
            if (!fields.empty()) return true;  // skip blank lines
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError("skeleton parse error at line " +
                        std::to_string(line_no) + ": " + what);
    }
};

int64_t parse_count(LineReader& r, const std::string& what) {
    std::vector<std::string> f;
    if (!r.next(f)) r.fail("unexpected end of file, expected " + what);
    if (f.size() != 1) r.fail("expected a single " + what + " field");
    try {
        size_t pos = 0;
        const long long v = std::stoll(f[0], &pos);
        if (pos != f[0].size() || v < 0) throw std::invalid_argument(f[0]);
        return v;
    } catch (const std::exception&) {
        r.fail("non-numeric " + what + " '" + f[0] + "'");
    }
}

float parse_float_field(LineReader& r, const std::string& s) {
    try {
        size_t pos = 0;
        const float v = std::stof(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        r.fail("non-numeric field '" + s + "'");
    }
}

}  // namespace

SkeletonSequence parse_ntu_skeleton(std::istream& in) {
    LineReader r{in};
    const int64_t frames = parse_count(r, "frame count");
    if (frames < 1) r.fail("frame count must be positive");

    // coords gathered per frame first; M is only known at the end
    struct Body {
        std::vector<float> xyz;  // v * 3
    };
    std::vector<std::vector<Body>> by_frame(frames);
    int64_t joints = -1;
    int64_t m_max = 0;

    for (int64_t t = 0; t < frames; ++t) {
        const int64_t bodies = parse_count(r, "body count");
        m_max = std::max(m_max, bodies);
        for (int64_t b = 0; b < bodies; ++b) {
            std::vector<std::string> f;
            if (!r.next(f)) r.fail("unexpected end of file in body info");
            if (static_cast<int64_t>(f.size()) != kNtuBodyInfoFields)
                r.fail("body info line must have " +
                       std::to_string(kNtuBodyInfoFields) + " fields, got " +
                       std::to_string(f.size()));
            const int64_t v = parse_count(r, "joint count");
            if (joints < 0) joints = v;
            if (v != joints)
                r.fail("joint count " + std::to_string(v) +
                       " differs from earlier " + std::to_string(joints));
            Body body;
            body.xyz.reserve(v * 3);
            for (int64_t j = 0; j < v; ++j) {
                if (!r.next(f)) r.fail("unexpected end of file in joint data");
                if (static_cast<int64_t>(f.size()) != kNtuJointFields)
                    r.fail("joint line must have " +
                           std::to_string(kNtuJointFields) + " fields, got " +
                           std::to_string(f.size()));
                for (int k = 0; k < 3; ++k)
                    body.xyz.push_back(parse_float_field(r, f[k]));
            }
            by_frame[t].push_back(std::move(body));
        }
    }
    if (joints < 0) r.fail("file declares no bodies in any frame");
    if (m_max < 1) r.fail("no bodies found");

    Tensor<float> coords({3, frames, joints, m_max}, 0.0f);
    auto& cv = coords.raw_values();
    auto st = strides_of(coords.shape());
    for (int64_t t = 0; t < frames; ++t)
        for (size_t b = 0; b < by_frame[t].size(); ++b)
            for (int64_t j = 0; j < joints; ++j)
                for (int64_t c = 0; c < 3; ++c)
                    cv[c * st[0] + t * st[1] + j * st[2] +
                       static_cast<int64_t>(b)] =
                        by_frame[t][b].xyz[j * 3 + c];

    SkeletonSequence seq;
    seq.coords = coords;
    seq.original_frames = frames;
    for (float v : seq.coords.values())
        check(std::isfinite(v), "skeleton file contains non-finite coordinates");
    return seq;
}

SkeletonSequence parse_ntu_skeleton_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open skeleton file " + path);
    auto seq = parse_ntu_skeleton(in);
    seq.source_id = path;
    return seq;
}

std::string write_ntu_skeleton(const SkeletonSequence& seq) {
    const int64_t t_n = seq.frames(), v_n = seq.joints(), m_n = seq.entities();
    auto st = strides_of(seq.coords.shape());
    const auto& cv = seq.coords.values();
    std::ostringstream os;
    char buf[64];
    os << t_n << "\n";
    for (int64_t t = 0; t < t_n; ++t) {
        os << m_n << "\n";
        for (int64_t m = 0; m < m_n; ++m) {
            os << "0 0 0 0 0 0 0 0 0 0\n";
            os << v_n << "\n";
            for (int64_t j = 0; j < v_n; ++j) {
                for (int64_t c = 0; c < 3; ++c) {
                    // %.9g round-trips binary32 exactly
                    std::snprintf(buf, sizeof(buf), "%.9g",
                                  cv[c * st[0] + t * st[1] + j * st[2] + m]);
                    os << buf << " ";
                }
                os << "0 0 0 0 0 0 0 0 2\n";
            }
        }
    }
    return os.str();
}

SkeletonSequence resample_frames(const SkeletonSequence& seq,
                                 int64_t t_target) {
    const int64_t t_n = seq.frames();
    check(t_n >= 2 && t_target >= 2, "resample needs at least 2 frames");
    if (t_n == t_target) return seq;
    const int64_t v_n = seq.joints(), m_n = seq.entities();
    Tensor<float> out({3, t_target, v_n, m_n});
    auto& ov = out.raw_values();
    const auto& cv = seq.coords.values();
    const int64_t frame_stride = v_n * m_n;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < t_target; ++t) {
            const int64_t src = t * t_n / t_target;  // nearest-index rule
            std::memcpy(ov.data() + (c * t_target + t) * frame_stride,
                        cv.data() + (c * t_n + src) * frame_stride,
                        sizeof(float) * frame_stride);
        }
    SkeletonSequence res = seq;
    res.coords = out;
    return res;
}

SkeletonSequence pad_entities(const SkeletonSequence& seq, int64_t m_target) {
    const int64_t m_n = seq.entities();
    check(m_n <= m_target, "pad_entities cannot drop entities (" +
                               std::to_string(m_n) + " > " +
                               std::to_string(m_target) + ")");
    if (m_n == m_target) return seq;
    const int64_t t_n = seq.frames(), v_n = seq.joints();
    Tensor<float> out({3, t_n, v_n, m_target}, 0.0f);
    auto& ov = out.raw_values();
    const auto& cv = seq.coords.values();
    for (int64_t i = 0; i < 3 * t_n * v_n; ++i)
        std::memcpy(ov.data() + i * m_target, cv.data() + i * m_n,
                    sizeof(float) * m_n);
    SkeletonSequence res = seq;
    res.coords = out;
    return res;
}

Tensor<float> motion_difference(const Tensor<float>& coords) {
    check_shape(coords.rank() == 4, "motion_difference expects (3, T, V, M)");
    const int64_t t_n = coords.shape()[1];
    check(t_n >= 2, "motion_difference needs at least 2 frames");
    const int64_t fs = coords.shape()[2] * coords.shape()[3];
    Tensor<float> out(coords.shape(), 0.0f);
    auto& ov = out.raw_values();
    const auto& cv = coords.values();
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t + 1 < t_n; ++t) {
            const float* cur = cv.data() + (c * t_n + t) * fs;
            const float* nxt = cv.data() + (c * t_n + t + 1) * fs;
            float* o = ov.data() + (c * t_n + t) * fs;
            for (int64_t i = 0; i < fs; ++i) o[i] = nxt[i] - cur[i];
        }
    return out;
}

SkeletonSequence permute_entities(const SkeletonSequence& seq,
                                  const std::vector<int>& perm) {
    const int64_t m_n = seq.entities();
    check_shape(static_cast<int64_t>(perm.size()) == m_n,
                "entity permutation length mismatch");
    std::vector<bool> used(m_n, false);
    for (int p : perm) {
        check_shape(p >= 0 && p < m_n && !used[p],
                    "invalid entity permutation");
        used[p] = true;
    }
    Tensor<float> out(seq.coords.shape());
    auto& ov = out.raw_values();
    const auto& cv = seq.coords.values();
    const int64_t groups = seq.coords.numel() / m_n;
    for (int64_t g = 0; g < groups; ++g)
        for (int64_t m = 0; m < m_n; ++m)
            ov[g * m_n + m] = cv[g * m_n + perm[m]];
    SkeletonSequence res = seq;
    res.coords = out;
    return res;
}

std::vector<int> sample_entity_permutation(int64_t m, Rng& rng,
                                           bool train_context) {
    std::vector<int> perm(m);
    for (int64_t i = 0; i < m; ++i) perm[i] = static_cast<int>(i);
    if (train_context) rng.shuffle(perm);
    return perm;
}

SkeletonSequence subtract_mean(const SkeletonSequence& seq) {
    const int64_t fs = seq.coords.numel() / 3;
    Tensor<float> out(seq.coords.shape());
    auto& ov = out.raw_values();
    const auto& cv = seq.coords.values();
    for (int64_t c = 0; c < 3; ++c) {
        double m = 0;
        for (int64_t i = 0; i < fs; ++i) m += cv[c * fs + i];
        const float mean = static_cast<float>(m / static_cast<double>(fs));
        for (int64_t i = 0; i < fs; ++i) ov[c * fs + i] = cv[c * fs + i] - mean;
    }
    SkeletonSequence res = seq;
    res.coords = out;
    return res;
}

// --- synthetic data ---

namespace {

constexpr int64_t kSynthJoints = 25;
constexpr int64_t kSynthEntities = 2;

// 20 torso joints on a 4x5 grid plus a 5-joint arm chain (indices 20..24).
void joint_template(int64_t j, float out[3]) {
    if (j < 20) {
        out[0] = 0.15f * static_cast<float>(j % 4) - 0.225f;
        out[1] = 0.15f * static_cast<float>(j / 4) - 0.3f;
        out[2] = 0.05f * static_cast<float>(j % 3);
    } else {
        const float k = static_cast<float>(j - 20 + 1);
        out[0] = 0.1f * k + 0.2f;
        out[1] = 0.12f;
        out[2] = 0.0f;
    }
}

}  // namespace

const std::vector<std::string>& synthetic_archetypes() {
    static const std::vector<std::string> names = {"approach", "retreat",
                                                   "circle", "wave"};
    return names;
}

DatasetSplit generate_synthetic_dataset(const SyntheticSpec& spec) {
    check(spec.classes.size() >= 2, "synthetic dataset needs >= 2 classes");
    check(spec.per_class >= 1, "per-class count must be positive");
    check(spec.frames >= 2, "synthetic frames must be >= 2");
    const auto& known = synthetic_archetypes();
    for (const auto& c : spec.classes)
        check(std::find(known.begin(), known.end(), c) != known.end(),
              "unknown synthetic class '" + c + "'");

    Rng rng(spec.seed);
    DatasetSplit split;
    split.num_classes = static_cast<int64_t>(spec.classes.size());
    split.class_names = spec.classes;
    split.role = spec.role;
    const int64_t t_n = spec.frames;

    for (size_t ci = 0; ci < spec.classes.size(); ++ci) {
        const std::string& cls = spec.classes[ci];
        for (int64_t s = 0; s < spec.per_class; ++s) {
            const double phi = rng.uniform(0.0, 2.0 * M_PI);
            const double d0 = rng.uniform(1.2, 2.0);
            const double omega = rng.uniform(M_PI / 2, M_PI);
            const double amp = rng.uniform(0.15, 0.3);
            const double freq = rng.uniform(1.5, 3.0);
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            const double dir[2] = {std::cos(phi), std::sin(phi)};

            Tensor<float> coords({3, t_n, kSynthJoints, kSynthEntities});
            auto& cv = coords.raw_values();
            auto st = strides_of(coords.shape());
            for (int64_t t = 0; t < t_n; ++t) {
                const double u = static_cast<double>(t) /
                                 static_cast<double>(t_n - 1);
                for (int64_t e = 0; e < kSynthEntities; ++e) {
                    const double sign = e == 0 ? 1.0 : -1.0;
                    double cx = 0, cy = 0;
                    if (cls == "approach") {
                        const double half = 0.5 * d0 * (1.0 - 0.7 * u);
                        cx = sign * dir[0] * half;
                        cy = sign * dir[1] * half;
                    } else if (cls == "retreat") {
                        const double half = 0.5 * d0 * (0.3 + 0.7 * u);
                        cx = sign * dir[0] * half;
                        cy = sign * dir[1] * half;
                    } else if (cls == "circle") {
                        const double ang =
                            phi + omega * u + (e == 0 ? 0.0 : M_PI);
                        cx = 0.5 * d0 * std::cos(ang);
                        cy = 0.5 * d0 * std::sin(ang);
                    } else {  // wave
                        cx = sign * dir[0] * 0.5 * d0;
                        cy = sign * dir[1] * 0.5 * d0;
                    }
                    for (int64_t j = 0; j < kSynthJoints; ++j) {
                        float base[3];
                        joint_template(j, base);
                        double p[3] = {cx + base[0], cy + base[1], base[2]};
                        if (cls == "wave" && e == 0 && j >= 20) {
                            const double reach =
                                static_cast<double>(j - 20 + 1) / 5.0;
                            p[2] += amp * reach *
                                    std::sin(2.0 * M_PI * freq * u + phase);
                        }
                        for (int64_t c = 0; c < 3; ++c)
                            cv[c * st[0] + t * st[1] + j * st[2] + e] =
                                static_cast<float>(p[c]);
                    }
                }
            }
            if (spec.noise > 0.0)
                for (auto& v : cv)
                    v += static_cast<float>(spec.noise * rng.gaussian());

            SkeletonSequence seq;
            seq.coords = coords;
            seq.label = static_cast<int64_t>(ci);
            seq.original_frames = t_n;
            seq.source_id = spec.role + "/" + cls + "/" + std::to_string(s);
            split.samples.push_back(std::move(seq));
        }
    }
    return split;
}

// --- cache files ---

namespace {

constexpr char kDatasetMagic[8] = {'T', 'H', 'C', 'T', 'D', 'S', '1', '\0'};

template <typename V>
void write_raw(std::ostream& os, const V& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_raw(std::istream& is, const std::string& what) {
    V v;
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw DataError("truncated dataset file while reading " + what);
    return v;
}

}  // namespace

void save_dataset(const std::string& path, const DatasetSplit& split) {
    check(!split.samples.empty(), "refusing to save an empty split");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write dataset file " + path);
    os.write(kDatasetMagic, sizeof(kDatasetMagic));
    write_raw(os, static_cast<uint32_t>(split.num_classes));
    write_raw(os, static_cast<uint32_t>(split.samples.size()));
    for (const auto& name : split.class_names) {
        write_raw(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& seq : split.samples) {
        write_raw(os, static_cast<uint32_t>(seq.label));
        write_raw(os, static_cast<uint32_t>(seq.frames()));
        write_raw(os, static_cast<uint32_t>(seq.joints()));
        write_raw(os, static_cast<uint32_t>(seq.entities()));
        os.write(reinterpret_cast<const char*>(seq.coords.values().data()),
                 static_cast<std::streamsize>(seq.coords.numel() *
                                              sizeof(float)));
    }
    check(bool(os), "write failure on dataset file " + path);
}

DatasetSplit load_dataset(const std::string& path, const std::string& role) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open dataset file " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
        throw DataError("bad dataset magic in " + path);

    DatasetSplit split;
    split.role = role;
    split.num_classes = read_raw<uint32_t>(is, "class count");
    const uint32_t count = read_raw<uint32_t>(is, "record count");
    for (uint32_t i = 0; i < split.num_classes; ++i) {
        const uint32_t len = read_raw<uint32_t>(is, "class name length");
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw DataError("truncated dataset file in class names");
        split.class_names.push_back(std::move(name));
    }
    for (uint32_t i = 0; i < count; ++i) {
        SkeletonSequence seq;
        seq.label = read_raw<uint32_t>(is, "label");
        check(seq.label < split.num_classes,
              "dataset record label out of range");
        const int64_t t_n = read_raw<uint32_t>(is, "frame count");
        const int64_t v_n = read_raw<uint32_t>(is, "joint count");
        const int64_t m_n = read_raw<uint32_t>(is, "entity count");
        Tensor<float> coords({3, t_n, v_n, m_n});
        is.read(reinterpret_cast<char*>(coords.raw_values().data()),
                static_cast<std::streamsize>(coords.numel() * sizeof(float)));
        if (!is) throw DataError("truncated dataset file in coordinates");
        seq.coords = coords;
        seq.original_frames = t_n;
        seq.source_id = path + "#" + std::to_string(i);
        split.samples.push_back(std::move(seq));
    }
    check(!split.samples.empty(), "dataset file has no records");
    return split;
}

}  // namespace skelact
