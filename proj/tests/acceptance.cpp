// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "skelact/config.hpp"
#include "skelact/train.hpp"
#include "skelact/verify.hpp"

using namespace skelact;

namespace {

using Clock = std::chrono::steady_clock;

struct Criterion {
    std::string id;
    std::string what;
    bool pass = false;
    std::string detail;
};

std::vector<Criterion> g_results;

void record(const std::string& id, const std::string& what, bool pass,
            const std::string& detail) {
    g_results.push_back({id, what, pass, detail});
    std::printf("%s  C%s  %-52s %s\n", pass ? "PASS" : "FAIL", id.c_str(),
                what.c_str(), detail.c_str());
    std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string work_dir(const std::string& leaf) {
    auto d = std::filesystem::temp_directory_path() / "skelact_acceptance" /
             leaf;
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d.string();
}

// the micro model used for the end-to-end run: micro widths on the
// synthetic dataset's native dimensions
ModelConfig e2e_config() {
    ModelConfig cfg;
    cfg.num_classes = 4;
    cfg.frames = 60;
    cfg.joints = 25;
    cfg.entities = 2;
    cfg.window = WindowSpec{20, 1, 2};
    cfg.apply_micro_widths();
    cfg.train.batch = 32;
    cfg.train.epochs = 30;
    cfg.train.lr = 0.01;  // the paper's 0.1 is tuned for full-scale data
    cfg.train.seed = 7;
    return cfg;
}

DatasetSplit e2e_split(const std::string& role, int64_t per_class,
                       uint64_t seed) {
    SyntheticSpec spec;
    spec.per_class = per_class;
    spec.frames = 60;
    spec.noise = 0.05;
    spec.seed = seed;
    spec.role = role;
    return generate_synthetic_dataset(spec);
}

char fmt_buf[256];

void criterion_gradients() {
    const auto t0 = Clock::now();
    auto report = verify_layer_gradients(3);
    report.merge(verify_model_gradients(3));
    double worst = 0;
    for (const auto& it : report.items) worst = std::max(worst, it.metric);
    const double elapsed = seconds_since(t0);
    const bool pass = report.pass && elapsed < 120.0;
    std::snprintf(fmt_buf, sizeof(fmt_buf),
                  "max rel err %.2e (tol 1e-4), %.1fs (budget 120s)", worst,
                  elapsed);
    record("1", "gradient correctness, layers + full micro model", pass,
           fmt_buf);
}

void criterion_kernel_oracles() {
    const auto t0 = Clock::now();
    auto report = verify_kernel_oracles(3);
    double worst = 0;
    for (const auto& it : report.items) worst = std::max(worst, it.metric);
    const double elapsed = seconds_since(t0);
    const bool pass = report.pass && elapsed < 60.0;
    std::snprintf(fmt_buf, sizeof(fmt_buf),
                  "max abs diff %.2e (tol 1e-5), %.1fs (budget 60s)", worst,
                  elapsed);
    record("2", "kernels match direct-summation oracles", pass, fmt_buf);
}

void criterion_structure() {
    auto report = verify_structure();
    std::string detail = report.pass ? "all identities exact" : "";
    for (const auto& it : report.items)
        if (!it.pass) detail += it.name + " failed ";
    record("3", "window count 75, score degeneracies, static motion",
           report.pass, detail);
}

struct E2EOutcome {
    TrainResult result;
    double fused = 0, cnn_alone = 0, tf_alone = 0;
    double elapsed = 0;
    std::string out_dir;
    ModelConfig cfg;
    DatasetSplit train_split, val_split;
};

void criterion_e2e_record(const E2EOutcome& out) {
    const bool pass = out.fused >= 0.95 && out.cnn_alone >= 0.85 &&
                      out.tf_alone >= 0.85 && out.elapsed < 600.0;
    std::snprintf(
        fmt_buf, sizeof(fmt_buf),
        "fused %.3f (>=0.95), cnn %.3f, transformer %.3f (>=0.85), %.0fs",
        out.fused, out.cnn_alone, out.tf_alone, out.elapsed);
    record("4", "synthetic 4-class run reaches the accuracy bars", pass,
           fmt_buf);
}

E2EOutcome run_e2e() {
    E2EOutcome out;
    out.cfg = e2e_config();
    out.train_split = e2e_split("train", 50, 7);
    out.val_split = e2e_split("val", 25, 8);
    out.out_dir = work_dir("e2e");

    const auto t0 = Clock::now();
    Rng rng(out.cfg.train.seed);
    auto model = TwoStreamModel<float>::create(out.cfg, rng);
    out.result = train(model, out.train_split, out.val_split, out.out_dir);
    out.elapsed = seconds_since(t0);

    auto ck = load_checkpoint(out.result.best_checkpoint);
    Rng rng2(1);
    auto best = TwoStreamModel<float>::create(out.cfg, rng2);
    apply_checkpoint(ck, best, nullptr);
    out.fused = evaluate(best, out.val_split, {0.5, "logit"}).top1;
    auto table = sweep_fusion(best, out.val_split, "logit");
    out.cnn_alone = table.front().second;  // w = 0
    out.tf_alone = table.back().second;    // w = 1

    criterion_e2e_record(out);

    // the sweep endpoints must equal the stand-alone stream accuracies
    const double cnn_eval = evaluate(best, out.val_split, {0.0, "logit"}).top1;
    const double tf_eval = evaluate(best, out.val_split, {1.0, "logit"}).top1;
    const bool endpoints =
        table.front().second == cnn_eval && table.back().second == tf_eval;
    std::snprintf(fmt_buf, sizeof(fmt_buf),
                  "w=0 row %.4f vs cnn %.4f, w=1 row %.4f vs transformer %.4f",
                  table.front().second, cnn_eval, table.back().second,
                  tf_eval);
    record("5", "fusion sweep endpoints equal single streams", endpoints,
           fmt_buf);
    return out;
}

void criterion_determinism() {
    auto cfg = e2e_config();
    cfg.train.epochs = 3;
    auto train_split = e2e_split("train", 10, 7);
    auto val_split = e2e_split("val", 4, 8);

    const auto dir_a = work_dir("det_a");
    Rng ra(cfg.train.seed);
    auto ma = TwoStreamModel<float>::create(cfg, ra);
    auto res_a = train(ma, train_split, val_split, dir_a);

    const auto dir_b = work_dir("det_b");
    Rng rb(cfg.train.seed);
    auto mb = TwoStreamModel<float>::create(cfg, rb);
    auto res_b = train(mb, train_split, val_split, dir_b);

    const bool csv_same = slurp(res_a.metrics_csv) == slurp(res_b.metrics_csv);

    // checkpoint save -> load reproduces eval logits bit-exactly
    auto ck = load_checkpoint(res_a.last_checkpoint);
    Rng rc(99);
    auto mc = TwoStreamModel<float>::create(cfg, rc);
    apply_checkpoint(ck, mc, nullptr);
    auto batch = make_batch(val_split, {0, 1, 2, 3}, cfg.normalize, nullptr);
    bool logits_same = true;
    {
        NoGradGuard ng;
        auto la = mb.forward(batch.coords, batch.motion, false);
        auto lc = mc.forward(batch.coords, batch.motion, false);
        logits_same = la.transformer.values() == lc.transformer.values() &&
                      la.cnn.values() == lc.cnn.values();
    }

    // resume at epoch e matches the uninterrupted run at epoch e+1
    auto cfg_short = cfg;
    cfg_short.train.epochs = 2;
    const auto dir_s = work_dir("det_short");
    Rng rs(cfg.train.seed);
    auto ms = TwoStreamModel<float>::create(cfg_short, rs);
    auto res_s = train(ms, train_split, val_split, dir_s);

    const auto dir_r = work_dir("det_resume");
    Rng rr(cfg.train.seed);
    auto mr = TwoStreamModel<float>::create(cfg, rr);
    auto res_r =
        train(mr, train_split, val_split, dir_r, res_s.last_checkpoint);
    bool resume_same = !res_r.rows.empty();
    for (const auto& row : res_r.rows) {
        bool matched = false;
        for (const auto& ref : res_a.rows)
            if (ref.epoch == row.epoch && ref.split == row.split)
                matched = ref.loss == row.loss && ref.top1 == row.top1;
        resume_same = resume_same && matched;
    }

    const bool pass = csv_same && logits_same && resume_same;
    std::snprintf(fmt_buf, sizeof(fmt_buf),
                  "csv identical %d, reload logits exact %d, resume exact %d",
                  csv_same, logits_same, resume_same);
    record("6", "seeded training determinism and persistence", pass, fmt_buf);
}

void criterion_parser() {
    bool pass = true;
    std::string detail = "fixtures: round-trip, multi-body, negatives";

    // positive: 2 frames, 2 bodies, coordinates recovered
    std::ostringstream os;
    os << "2\n";
    for (int t = 0; t < 2; ++t) {
        os << "2\n";
        for (int b = 0; b < 2; ++b) {
            os << "1001 0 1 1 1 1 0 0 0 2\n25\n";
            for (int j = 0; j < 25; ++j)
                os << j + 10 * b + 100 * t << " " << 2 * j << " " << 3 * j
                   << " 0 0 0 0 0 0 0 0 2\n";
        }
    }
    try {
        std::istringstream in(os.str());
        auto seq = parse_ntu_skeleton(in);
        pass = pass && seq.coords.shape() == Shape{3, 2, 25, 2};
        pass = pass && seq.coords.at({0, 1, 5, 1}) == 115.0f;
        pass = pass && seq.coords.at({2, 0, 7, 0}) == 21.0f;

        std::istringstream in2(write_ntu_skeleton(seq));
        auto seq2 = parse_ntu_skeleton(in2);
        pass = pass && seq.coords.values() == seq2.coords.values();
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("positive fixture failed: ") + e.what();
    }

    // negatives: truncation, bad joint count, non-numeric fields
    auto expect_fail = [&](const std::string& text) {
        try {
            std::istringstream in(text);
            (void)parse_ntu_skeleton(in);
            pass = false;
            detail = "a malformed fixture parsed successfully";
        } catch (const DataError&) {
        }
    };
    expect_fail("1\n1\n0 0 0 0 0 0 0 0 0 0\n25\n1 2 3 0 0 0 0 0 0 0 0 2\n");
    expect_fail("1\n1\n0 0 0 0 0 0 0 0 0 0\n2\nx y z 0 0 0 0 0 0 0 0 2\n"
                "1 2 3 0 0 0 0 0 0 0 0 2\n");
    expect_fail("not_a_number\n");

    record("7", "ntu parser fixtures, positive and negative", pass, detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");

    criterion_gradients();
    criterion_kernel_oracles();
    criterion_structure();
    (void)run_e2e();  // records criteria 4 and 5
    criterion_determinism();
    criterion_parser();

    // not reproducible at desk scale: the published full-dataset accuracies
    // (NTU Mutual 91.00/91.86, H2O 92.98, Assembly101 28.42) need the full
    // corpora and GPU budgets; the parser fixtures above stand in for NTU
    // ingestion. Recorded here so the report is explicit about scope.
    std::printf("note  published full-dataset accuracies are documentation "
                "only, not acceptance targets\n");

    int failures = 0;
    for (const auto& c : g_results) failures += c.pass ? 0 : 1;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(g_results.size()) - failures,
                g_results.size());
    return failures == 0 ? 0 : 1;
}
