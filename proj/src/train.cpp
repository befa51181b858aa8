#include "skelact/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "skelact/config.hpp"

namespace skelact {

// --- loss ---

template <typename T>
Tensor<T> cross_entropy_smoothed(const Tensor<T>& logits,
                                 const std::vector<int64_t>& targets, T eps,
                                 T tau) {
    check(tau > T(0), "temperature must be positive");
    check(eps >= T(0) && eps < T(1), "label smoothing must lie in [0, 1)");
    const bool single = logits.rank() == 1;
    check_shape(logits.rank() == 2 || single,
                "cross entropy expects (n, k) or (k) logits");
    const int64_t n = single ? 1 : logits.shape()[0];
    const int64_t k = single ? logits.shape()[0] : logits.shape()[1];
    check(k >= 2, "cross entropy needs at least 2 classes");
    check(static_cast<int64_t>(targets.size()) == n,
          "target count does not match batch");
    for (int64_t t : targets)
        check(t >= 0 && t < k, "target class out of range");

    const auto& lv = logits.values();
    std::vector<T> probs(lv.size());
    T total = 0;
    for (int64_t i = 0; i < n; ++i) {
        const T* row = lv.data() + i * k;
        T* prow = probs.data() + i * k;
        T zmax = row[0] / tau;
        for (int64_t j = 1; j < k; ++j) zmax = std::max(zmax, row[j] / tau);
        T sum = 0;
        for (int64_t j = 0; j < k; ++j) {
            prow[j] = std::exp(row[j] / tau - zmax);
            sum += prow[j];
        }
        const T lse = std::log(sum) + zmax;
        T ce = 0;
        for (int64_t j = 0; j < k; ++j) {
            const T logp = row[j] / tau - lse;
            const T q = eps / static_cast<T>(k) +
                        (j == targets[i] ? T(1) - eps : T(0));
            ce -= q * logp;
            prow[j] /= sum;
        }
        total += ce;
    }
    total /= static_cast<T>(n);

    return detail::make_op<T>(
        "cross_entropy", {1}, {total}, {logits},
        [logits, targets, probs = std::move(probs), eps, tau, n,
         k](const detail::Storage<T>&, const std::vector<T>& g) {
            // dL/dz = (p - q) / (tau * n)
            std::vector<T> gl(logits.values().size());
            const T f = g[0] / (tau * static_cast<T>(n));
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < k; ++j) {
                    const T q = eps / static_cast<T>(k) +
                                (j == targets[i] ? T(1) - eps : T(0));
                    gl[i * k + j] = f * (probs[i * k + j] - q);
                }
            detail::accumulate(*logits.st_, gl);
        });
}

// --- optimizer ---

template <typename T>
void SgdOptimizer<T>::step(
    const std::vector<std::pair<std::string, Tensor<T>>>& params, double lr) {
    for (const auto& [name, p] : params) {
        auto& vals = p.st_->values;
        if (!p.has_grad()) continue;  // parameter unused by this loss
        const auto& g = p.st_->grad;
        check_shape(g.size() == vals.size(), "gradient shape mismatch on " +
                                                 name);
        auto [it, inserted] = velocity.try_emplace(
            name, std::vector<T>(vals.size(), T(0)));
        auto& v = it->second;
        check_shape(v.size() == vals.size(),
                    "velocity shape mismatch on " + name);
        const T mu = static_cast<T>(momentum);
        const T step_lr = static_cast<T>(lr);
        if (nesterov) {
            for (size_t i = 0; i < vals.size(); ++i) {
                v[i] = mu * v[i] + g[i];
                vals[i] -= step_lr * (g[i] + mu * v[i]);
            }
        } else {
            for (size_t i = 0; i < vals.size(); ++i) {
                v[i] = mu * v[i] + g[i];
                vals[i] -= step_lr * v[i];
            }
        }
    }
}

double lr_at_epoch(const TrainConfig& cfg, int64_t epoch) {
    double lr = cfg.lr;
    for (int64_t m : cfg.milestones)
        if (epoch >= m) lr *= cfg.lr_decay;
    return lr;
}

// --- fusion ---

namespace {

std::vector<float> softmax_row(const std::vector<float>& z) {
    float zmax = z[0];
    for (float v : z) zmax = std::max(zmax, v);
    std::vector<float> p(z.size());
    float sum = 0;
    for (size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace

std::vector<float> late_fuse(const std::vector<float>& scores_t,
                             const std::vector<float>& scores_c,
                             const FusionConfig& cfg) {
    check_shape(scores_t.size() == scores_c.size(),
                "fused score lengths differ");
    check(cfg.weight >= 0.0 && cfg.weight <= 1.0,
          "fusion weight must lie in [0, 1]");
    const float w = static_cast<float>(cfg.weight);
    std::vector<float> st = scores_t, sc = scores_c;
    if (cfg.space == "prob") {
        st = softmax_row(st);
        sc = softmax_row(sc);
    }
    std::vector<float> out(st.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = w * st[i] + (1.0f - w) * sc[i];
    return out;
}

// --- evaluation ---

namespace {

int64_t argmax(const float* row, int64_t k) {
    int64_t best = 0;
    for (int64_t j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

}  // namespace

EvalMetrics evaluate(TwoStreamModel<float>& model, const DatasetSplit& split,
                     const FusionConfig& fusion) {
    check(!split.samples.empty(), "cannot evaluate an empty split");
    NoGradGuard no_grad;
    const int64_t k = model.cfg.num_classes;
    const int64_t n = static_cast<int64_t>(split.samples.size());
    const int64_t batch = std::max<int64_t>(1, model.cfg.train.batch);
    const float eps = static_cast<float>(model.cfg.train.label_smoothing);
    const float tau = static_cast<float>(model.cfg.train.temperature);

    EvalMetrics m;
    m.confusion.assign(k, std::vector<int64_t>(k, 0));
    double loss_sum = 0.0;
    int64_t correct = 0;

    for (int64_t start = 0; start < n; start += batch) {
        std::vector<int64_t> idx;
        for (int64_t i = start; i < std::min(n, start + batch); ++i)
            idx.push_back(i);
        // original entity order, no augmentation
        auto b = make_batch(split, idx, model.cfg.normalize, nullptr);
        auto logits = model.forward(b.coords, b.motion, /*train=*/false);
        loss_sum +=
            (cross_entropy_smoothed(logits.transformer, b.targets, eps, tau)
                 .item() +
             cross_entropy_smoothed(logits.cnn, b.targets, eps, tau).item()) *
            static_cast<double>(idx.size());
        const auto& lt = logits.transformer.values();
        const auto& lc = logits.cnn.values();
        for (size_t r = 0; r < idx.size(); ++r) {
            std::vector<float> st(lt.begin() + r * k, lt.begin() + (r + 1) * k);
            std::vector<float> sc(lc.begin() + r * k, lc.begin() + (r + 1) * k);
            auto fused = late_fuse(st, sc, fusion);
            const int64_t pred = argmax(fused.data(), k);
            const int64_t truth = b.targets[r];
            m.confusion[truth][pred]++;
            if (pred == truth) ++correct;
        }
    }

    m.loss = loss_sum / static_cast<double>(n);
    m.top1 = static_cast<double>(correct) / static_cast<double>(n);
    m.per_class.assign(k, 0.0);
    for (int64_t c = 0; c < k; ++c) {
        int64_t row = 0;
        for (int64_t j = 0; j < k; ++j) row += m.confusion[c][j];
        m.per_class[c] = row == 0 ? 0.0
                                  : static_cast<double>(m.confusion[c][c]) /
                                        static_cast<double>(row);
    }
    return m;
}

std::vector<std::pair<double, double>> sweep_fusion(
    TwoStreamModel<float>& model, const DatasetSplit& split,
    const std::string& space) {
    check(!split.samples.empty(), "cannot sweep an empty split");
    NoGradGuard no_grad;
    const int64_t k = model.cfg.num_classes;
    const int64_t n = static_cast<int64_t>(split.samples.size());
    const int64_t batch = std::max<int64_t>(1, model.cfg.train.batch);

    std::vector<std::vector<float>> st(n), sc(n);
    std::vector<int64_t> truth(n);
    for (int64_t start = 0; start < n; start += batch) {
        std::vector<int64_t> idx;
        for (int64_t i = start; i < std::min(n, start + batch); ++i)
            idx.push_back(i);
        auto b = make_batch(split, idx, model.cfg.normalize, nullptr);
        auto logits = model.forward(b.coords, b.motion, /*train=*/false);
        const auto& lt = logits.transformer.values();
        const auto& lc = logits.cnn.values();
        for (size_t r = 0; r < idx.size(); ++r) {
            st[idx[r]].assign(lt.begin() + r * k, lt.begin() + (r + 1) * k);
            sc[idx[r]].assign(lc.begin() + r * k, lc.begin() + (r + 1) * k);
            truth[idx[r]] = b.targets[r];
        }
    }

    std::vector<std::pair<double, double>> table;
    for (int step = 0; step <= 10; ++step) {
        const double w = static_cast<double>(step) / 10.0;
        FusionConfig fc{w, space};
        int64_t correct = 0;
        for (int64_t i = 0; i < n; ++i) {
            auto fused = late_fuse(st[i], sc[i], fc);
            if (argmax(fused.data(), k) == truth[i]) ++correct;
        }
        table.push_back(
            {w, static_cast<double>(correct) / static_cast<double>(n)});
    }
    return table;
}

// --- checkpoints ---

namespace {

constexpr char kCkptMagic[5] = {'T', 'H', 'C', 'T', '1'};

void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& is, const std::string& what) {
    uint32_t v;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw DataError("truncated checkpoint while reading " + what);
    return v;
}

void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is, const std::string& what) {
    const uint32_t len = read_u32(is, what + " length");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw DataError("truncated checkpoint while reading " + what);
    return s;
}

}  // namespace

Checkpoint snapshot(TwoStreamModel<float>& model,
                    const SgdOptimizer<float>& opt, const Rng& rng,
                    int64_t epoch) {
    Checkpoint ck;
    ck.config_text = serialize_config(model.cfg);
    ck.rng_state = rng.serialize();
    ck.epoch = static_cast<uint32_t>(epoch);
    for (const auto& [name, p] : model.named_params())
        ck.tensors.push_back({name, p.shape(), p.values()});
    for (const auto& [name, buf] : model.named_buffers())
        ck.tensors.push_back(
            {name, {static_cast<int64_t>(buf->size())}, *buf});
    for (const auto& [name, p] : model.named_params()) {
        auto it = opt.velocity.find(name);
        if (it != opt.velocity.end())
            ck.tensors.push_back({"vel/" + name,
                                  {static_cast<int64_t>(it->second.size())},
                                  it->second});
    }
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint " + path);
    os.write(kCkptMagic, sizeof(kCkptMagic));
    write_u32(os, ckpt.version);
    write_str(os, ckpt.config_text);
    write_u32(os, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) write_str(os, t.name);
    for (const auto& t : ckpt.tensors) {
        write_str(os, t.name);
        write_u32(os, static_cast<uint32_t>(t.shape.size()));
        for (int64_t d : t.shape) write_u32(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    write_str(os, ckpt.rng_state);
    write_u32(os, ckpt.epoch);
    check(bool(os), "write failure on checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path);
    char magic[5];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw DataError("checkpoint magic mismatch in " + path);
    Checkpoint ck;
    ck.version = read_u32(is, "version");
    if (ck.version != 1)
        throw DataError("unsupported checkpoint version " +
                        std::to_string(ck.version));
    ck.config_text = read_str(is, "config");
    const uint32_t count = read_u32(is, "tensor count");
    std::vector<std::string> names;
    for (uint32_t i = 0; i < count; ++i)
        names.push_back(read_str(is, "name table entry"));
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointTensor t;
        t.name = read_str(is, "tensor name");
        if (t.name != names[i])
            throw DataError("checkpoint name table disagrees with records");
        const uint32_t rank = read_u32(is, "tensor rank");
        int64_t numel = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            t.shape.push_back(read_u32(is, "tensor extent"));
            numel *= t.shape.back();
        }
        t.data.resize(static_cast<size_t>(numel));
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(numel * sizeof(float)));
        if (!is) throw DataError("truncated checkpoint in tensor data");
        ck.tensors.push_back(std::move(t));
    }
    ck.rng_state = read_str(is, "rng state");
    ck.epoch = read_u32(is, "epoch");
    return ck;
}

void apply_checkpoint(const Checkpoint& ckpt, TwoStreamModel<float>& model,
                      SgdOptimizer<float>* opt) {
    std::map<std::string, const CheckpointTensor*> by_name;
    for (const auto& t : ckpt.tensors) {
        check(!by_name.count(t.name),
              "duplicate checkpoint tensor " + t.name);
        by_name[t.name] = &t;
    }
    for (auto& [name, p] : model.named_params()) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw DataError("checkpoint is missing parameter " + name);
        if (it->second->shape != p.shape())
            throw DataError("checkpoint shape mismatch on " + name + ": " +
                            shape_str(it->second->shape) + " vs model " +
                            shape_str(p.shape()));
        p.st_->values = it->second->data;
        p.st_->grad.clear();
    }
    for (auto& [name, buf] : model.named_buffers()) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw DataError("checkpoint is missing buffer " + name);
        check(it->second->data.size() == buf->size(),
              "checkpoint buffer size mismatch on " + name);
        std::vector<float> v = it->second->data;
        buf->assign(v.begin(), v.end());
    }
    if (opt) {
        opt->velocity.clear();
        for (const auto& t : ckpt.tensors)
            if (t.name.rfind("vel/", 0) == 0)
                opt->velocity[t.name.substr(4)] = t.data;
    }
}

// --- training loop ---

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochRow>& rows) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write metrics csv " + path);
    os << "epoch,split,loss,top1\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%s,%.17g,%.17g\n",
                      static_cast<long long>(r.epoch), r.split.c_str(), r.loss,
                      r.top1);
        os << buf;
    }
}

TrainResult train(TwoStreamModel<float>& model,
                  const DatasetSplit& train_split,
                  const DatasetSplit& val_split, const std::string& out_dir,
                  const std::string& resume_path) {
    check(!train_split.samples.empty(), "training split is empty");
    check(!val_split.samples.empty(), "validation split is empty");
    const ModelConfig& cfg = model.cfg;
    const TrainConfig& tc = cfg.train;
    const float eps = static_cast<float>(tc.label_smoothing);
    const float tau = static_cast<float>(tc.temperature);
    const int64_t n = static_cast<int64_t>(train_split.samples.size());
    const int64_t m_ent = cfg.entities;

    std::filesystem::create_directories(out_dir);

    SgdOptimizer<float> opt;
    opt.momentum = tc.momentum;
    opt.nesterov = tc.nesterov;
    Rng rng(tc.seed);
    int64_t start_epoch = 0;

    if (!resume_path.empty()) {
        auto ck = load_checkpoint(resume_path);
        apply_checkpoint(ck, model, &opt);
        rng.deserialize(ck.rng_state);
        start_epoch = ck.epoch + 1;
    }

    TrainResult result;
    result.metrics_csv = out_dir + "/metrics.csv";
    result.best_checkpoint = out_dir + "/best.ckpt";
    result.last_checkpoint = out_dir + "/last.ckpt";
    FusionConfig fusion{cfg.fusion_weight, cfg.fusion_space};

    auto params = model.named_params();

    for (int64_t epoch = start_epoch; epoch < tc.epochs; ++epoch) {
        const double lr = lr_at_epoch(tc, epoch);

        std::vector<int64_t> order(n);
        for (int64_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);

        // entity permutation augmentation, train split only
        std::vector<std::vector<int>> perms(n);
        if (cfg.permute_mode == "per_epoch") {
            auto p = sample_entity_permutation(m_ent, rng, true);
            for (auto& q : perms) q = p;
        } else {
            for (auto& q : perms)
                q = sample_entity_permutation(m_ent, rng, true);
        }

        double loss_sum = 0.0;
        int64_t correct = 0;
        const int64_t k = cfg.num_classes;

        for (int64_t start = 0; start < n; start += tc.batch) {
            std::vector<int64_t> idx(
                order.begin() + start,
                order.begin() + std::min(n, start + tc.batch));
            auto b = make_batch(train_split, idx, cfg.normalize, &perms);
            auto logits = model.forward(b.coords, b.motion, /*train=*/true);
            auto loss =
                add(cross_entropy_smoothed(logits.transformer, b.targets, eps,
                                           tau),
                    cross_entropy_smoothed(logits.cnn, b.targets, eps, tau));
            const double batch_loss = loss.item();
            if (!std::isfinite(batch_loss))
                throw NumericError(
                    "non-finite training loss at epoch " +
                    std::to_string(epoch) + ", batch offset " +
                    std::to_string(start) + " (lr " + std::to_string(lr) +
                    ")");
            for (auto& [name, p] : params) p.zero_grad();
            backward(loss);
            opt.step(params, lr);

            loss_sum += batch_loss * static_cast<double>(idx.size());
            const auto& lt = logits.transformer.values();
            const auto& lc = logits.cnn.values();
            for (size_t r = 0; r < idx.size(); ++r) {
                std::vector<float> st(lt.begin() + r * k,
                                      lt.begin() + (r + 1) * k);
                std::vector<float> sc(lc.begin() + r * k,
                                      lc.begin() + (r + 1) * k);
                auto fused = late_fuse(st, sc, fusion);
                if (argmax(fused.data(), k) == b.targets[r]) ++correct;
            }
        }

        const double train_loss = loss_sum / static_cast<double>(n);
        const double train_top1 =
            static_cast<double>(correct) / static_cast<double>(n);
        auto val = evaluate(model, val_split, fusion);

        result.rows.push_back({epoch, "train", train_loss, train_top1});
        result.rows.push_back({epoch, "val", val.loss, val.top1});
        write_metrics_csv(result.metrics_csv, result.rows);

        auto last = snapshot(model, opt, rng, epoch);
        save_checkpoint(result.last_checkpoint, last);
        if (epoch == start_epoch || val.top1 > result.best_val_top1) {
            result.best_val_top1 = val.top1;
            result.best_epoch = epoch;
            save_checkpoint(result.best_checkpoint, last);
        }
    }
    return result;
}

template Tensor<float> cross_entropy_smoothed<float>(
    const Tensor<float>&, const std::vector<int64_t>&, float, float);
template Tensor<double> cross_entropy_smoothed<double>(
    const Tensor<double>&, const std::vector<int64_t>&, double, double);
template struct SgdOptimizer<float>;
template struct SgdOptimizer<double>;

}  // namespace skelact
