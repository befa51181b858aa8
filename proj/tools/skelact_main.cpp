#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "skelact/config.hpp"
#include "skelact/train.hpp"
#include "skelact/verify.hpp"

using namespace skelact;

namespace {

struct Flags {
    std::string config_path;
    uint64_t seed = 0;
    std::string data_dir, out_dir;
    int64_t epochs = 0, batch = 0, classes = 0, per_class = 0;
    double lr = -1.0, fusion_weight = -1.0, noise = -1.0;
    std::string window, resume, ckpt, inject_fault;
    bool sweep = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "config file (key = value)");
    cmd->add_option("--seed", f.seed, "rng seed");
    cmd->add_option("--data", f.data_dir, "dataset directory");
    cmd->add_option("--out", f.out_dir, "output directory");
}

bool flag_set(const CLI::App* cmd, const std::string& name) {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

// flag overrides beat the config file
ModelConfig effective_config(const CLI::App* cmd, const Flags& f) {
    ModelConfig cfg;
    if (!f.config_path.empty()) cfg = load_config_file(f.config_path);
    if (flag_set(cmd, "--seed")) cfg.train.seed = f.seed;
    if (flag_set(cmd, "--data")) cfg.data_dir = f.data_dir;
    if (flag_set(cmd, "--out")) cfg.out_dir = f.out_dir;
    if (flag_set(cmd, "--epochs")) cfg.train.epochs = f.epochs;
    if (flag_set(cmd, "--lr")) cfg.train.lr = f.lr;
    if (flag_set(cmd, "--batch")) cfg.train.batch = f.batch;
    if (flag_set(cmd, "--window")) {
        long long t = 0, v = 0, m = 0;
        if (std::sscanf(f.window.c_str(), "%lld,%lld,%lld", &t, &v, &m) != 3)
            throw std::runtime_error("--window expects T,V,M");
        cfg.window = WindowSpec{t, v, m};
    }
    if (flag_set(cmd, "--fusion-weight")) cfg.fusion_weight = f.fusion_weight;
    if (flag_set(cmd, "--classes")) cfg.num_classes = f.classes;
    if (flag_set(cmd, "--per-class")) cfg.per_class = f.per_class;
    if (flag_set(cmd, "--noise")) cfg.noise = f.noise;
    if (flag_set(cmd, "--sweep-fusion")) cfg.sweep_fusion = f.sweep;
    if (flag_set(cmd, "--resume")) cfg.resume = f.resume;
    if (flag_set(cmd, "--inject-fault")) cfg.inject_fault = f.inject_fault;
    return cfg;
}

void print_effective(const ModelConfig& cfg) {
    std::cout << "# effective configuration\n" << serialize_config(cfg)
              << std::flush;
}

DatasetSplit load_split(const ModelConfig& cfg, const std::string& role) {
    const std::string path = cfg.data_dir + "/" + role + ".thctds";
    auto split = load_dataset(path, role);
    if (split.num_classes != cfg.num_classes)
        throw DataError("dataset " + path + " has " +
                        std::to_string(split.num_classes) +
                        " classes, config expects " +
                        std::to_string(cfg.num_classes));
    const auto& s = split.samples.front();
    if (s.frames() != cfg.frames || s.joints() != cfg.joints ||
        s.entities() != cfg.entities)
        throw DataError("dataset " + path + " dimensions (" +
                        std::to_string(s.frames()) + "," +
                        std::to_string(s.joints()) + "," +
                        std::to_string(s.entities()) +
                        ") do not match the configured input size");
    return split;
}

int cmd_gen_data(const CLI::App* cmd, const Flags& f) {
    auto cfg = effective_config(cmd, f);
    if (cfg.num_classes < 2 ||
        cfg.num_classes >
            static_cast<int64_t>(synthetic_archetypes().size())) {
        std::cerr << "gen-data supports 2.."
                  << synthetic_archetypes().size() << " classes\n";
        return 1;
    }
    if (cfg.per_class < 1) {
        std::cerr << "--per-class must be positive\n";
        return 1;
    }
    print_effective(cfg);

    SyntheticSpec spec;
    spec.classes.assign(synthetic_archetypes().begin(),
                        synthetic_archetypes().begin() + cfg.num_classes);
    spec.frames = cfg.frames;
    spec.noise = cfg.noise;
    spec.per_class = cfg.per_class;
    spec.seed = cfg.train.seed;
    spec.role = "train";
    auto train_split = generate_synthetic_dataset(spec);

    spec.per_class = std::max<int64_t>(1, cfg.per_class / 2);
    spec.seed = cfg.train.seed + 1;
    spec.role = "val";
    auto val_split = generate_synthetic_dataset(spec);

    std::filesystem::create_directories(cfg.out_dir);
    save_dataset(cfg.out_dir + "/train.thctds", train_split);
    save_dataset(cfg.out_dir + "/val.thctds", val_split);

    auto counts = [](const DatasetSplit& d) {
        std::vector<int64_t> c(d.num_classes, 0);
        for (const auto& s : d.samples) c[s.label]++;
        return c;
    };
    auto tc = counts(train_split), vc = counts(val_split);
    for (int64_t i = 0; i < cfg.num_classes; ++i)
        std::cout << train_split.class_names[i] << ": train " << tc[i]
                  << ", val " << vc[i] << "\n";
    std::cout << "wrote " << cfg.out_dir << "/train.thctds and "
              << cfg.out_dir << "/val.thctds\n";
    return 0;
}

int cmd_train(const CLI::App* cmd, const Flags& f) {
    auto cfg = effective_config(cmd, f);
    cfg.validate();
    print_effective(cfg);
    auto train_split = load_split(cfg, "train");
    auto val_split = load_split(cfg, "val");

    Rng rng(cfg.train.seed);
    auto model = TwoStreamModel<float>::create(cfg, rng);
    auto result = train(model, train_split, val_split, cfg.out_dir,
                        cfg.resume);
    std::cout << "best val top1 " << result.best_val_top1 << " at epoch "
              << result.best_epoch << "\n";
    std::cout << "metrics: " << result.metrics_csv << "\n";
    std::cout << "checkpoints: " << result.best_checkpoint << ", "
              << result.last_checkpoint << "\n";
    return 0;
}

int cmd_eval(const CLI::App* cmd, const Flags& f) {
    // the checkpoint's embedded config is the base; flags still override
    std::string ckpt_path = f.ckpt;
    if (ckpt_path.empty()) {
        ModelConfig pre = effective_config(cmd, f);
        ckpt_path = pre.out_dir + "/best.ckpt";
    }
    auto ck = load_checkpoint(ckpt_path);
    ModelConfig cfg = parse_config_text(ck.config_text);
    if (flag_set(cmd, "--data")) cfg.data_dir = f.data_dir;
    if (flag_set(cmd, "--fusion-weight")) cfg.fusion_weight = f.fusion_weight;
    if (flag_set(cmd, "--sweep-fusion")) cfg.sweep_fusion = f.sweep;
    cfg.validate();
    print_effective(cfg);

    auto val_split = load_split(cfg, "val");
    Rng rng(cfg.train.seed);
    auto model = TwoStreamModel<float>::create(cfg, rng);
    apply_checkpoint(ck, model, nullptr);

    FusionConfig fusion{cfg.fusion_weight, cfg.fusion_space};
    auto m = evaluate(model, val_split, fusion);
    std::printf("top1 %.4f  (fusion weight %.2f, %s space)\n", m.top1,
                fusion.weight, fusion.space.c_str());
    for (int64_t c = 0; c < cfg.num_classes; ++c)
        std::printf("  class %-10s acc %.4f\n",
                    val_split.class_names[c].c_str(), m.per_class[c]);
    std::printf("confusion (rows = truth):\n");
    for (int64_t r = 0; r < cfg.num_classes; ++r) {
        std::printf("  ");
        for (int64_t c = 0; c < cfg.num_classes; ++c)
            std::printf("%6lld",
                        static_cast<long long>(m.confusion[r][c]));
        std::printf("\n");
    }

    if (cfg.sweep_fusion) {
        std::printf("fusion sweep (w on the transformer stream):\n");
        for (auto [w, top1] : sweep_fusion(model, val_split,
                                           cfg.fusion_space))
            std::printf("  w=%.1f  top1 %.4f\n", w, top1);
    }
    return 0;
}

int cmd_verify(const CLI::App* cmd, const Flags& f) {
    auto cfg = effective_config(cmd, f);
    if (!cfg.inject_fault.empty()) {
        std::cout << "injecting fault into backward rule of op '"
                  << cfg.inject_fault << "'\n";
        fault::inject(cfg.inject_fault);
    }
    auto report = run_all_verification(cfg.train.seed);
    print_report(report, std::cout);
    if (!report.pass && !cfg.inject_fault.empty())
        std::cout << "fault in '" << cfg.inject_fault
                  << "' detected as intended\n";
    return report.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stream skeleton interaction recognition"};
    app.require_subcommand(1);
    Flags f;

    auto* gen = app.add_subcommand("gen-data",
                                   "generate synthetic dataset caches");
    add_common(gen, f);
    gen->add_option("--classes", f.classes, "number of classes (2..4)");
    gen->add_option("--per-class", f.per_class,
                    "training samples per class (val gets half)");
    gen->add_option("--noise", f.noise, "coordinate noise sigma");

    auto* tr = app.add_subcommand("train", "train the two-stream model");
    add_common(tr, f);
    tr->add_option("--epochs", f.epochs, "epoch count");
    tr->add_option("--lr", f.lr, "initial learning rate");
    tr->add_option("--batch", f.batch, "batch size");
    tr->add_option("--window", f.window, "token window T,V,M");
    tr->add_option("--fusion-weight", f.fusion_weight,
                   "transformer stream weight in [0,1]");
    tr->add_option("--resume", f.resume, "checkpoint to resume from");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(ev, f);
    ev->add_option("--ckpt", f.ckpt, "checkpoint path (default OUT/best.ckpt)");
    ev->add_option("--fusion-weight", f.fusion_weight,
                   "transformer stream weight in [0,1]");
    ev->add_flag("--sweep-fusion", f.sweep,
                 "print accuracy for w in {0.0 .. 1.0}");

    auto* vf = app.add_subcommand("verify",
                                  "run oracle and gradient verification");
    add_common(vf, f);
    vf->add_option("--inject-fault", f.inject_fault,
                   "corrupt the backward rule of the named op");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen, f);
        if (tr->parsed()) return cmd_train(tr, f);
        if (ev->parsed()) return cmd_eval(ev, f);
        if (vf->parsed()) return cmd_verify(vf, f);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
