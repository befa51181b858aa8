#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace std::string_literals;

#ifndef SKELACT_BIN
#error "SKELACT_BIN must point at the cli binary"
#endif

namespace {

struct RunResult {
    int code = -1;
    std::string output;
};

RunResult run(const std::string& args) {
    const auto out =
        std::filesystem::temp_directory_path() / "skelact_cli_out.txt";
    const std::string cmd =
        SKELACT_BIN + (" " + args) + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WEXITSTATUS(status);
    std::ifstream in(out);
    std::ostringstream os;
    os << in.rdbuf();
    r.output = os.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string work(const std::string& leaf) {
    auto d = std::filesystem::temp_directory_path() / "skelact_cli" / leaf;
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d.string();
}

// a micro config so the cli runs finish quickly
std::string write_micro_config(const std::string& dir) {
    const std::string path = dir + "/micro.cfg";
    std::ofstream os(path);
    os << "num_classes = 2\n"
          "frames = 8\n"
          "window = 4,5,2\n"
          "tf_blocks = 1\n"
          "tf_heads = 2\n"
          "tf_dim = 8\n"
          "cnn_point = 4\n"
          "cnn_post1 = 12\n"
          "cnn_post2 = 8\n"
          "cnn_fusion = 8\n"
          "cnn_hidden = 32\n"
          "batch = 4\n"
          "epochs = 2\n"
          "lr = 0.01\n"
          "per_class = 6\n";
    return path;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run("").code == 1);
    CHECK(run("no-such-command").code == 1);
    CHECK(run("gen-data --per-class 0 --out /tmp/unused_cli").code == 1);
    CHECK(run("gen-data --classes 9 --out /tmp/unused_cli").code == 1);
}

TEST_CASE("train echoes the default configuration") {
    // no config file, missing data: the effective config still prints first
    auto r = run("train --data /tmp/definitely_missing_skelact");
    CHECK(r.code == 2);
    CHECK(r.output.find("lr = 0.1\n") != std::string::npos);
    CHECK(r.output.find("momentum = 0.9\n") != std::string::npos);
    CHECK(r.output.find("batch = 32\n") != std::string::npos);
    CHECK(r.output.find("epochs = 110\n") != std::string::npos);
    CHECK(r.output.find("window = 20,1,2\n") != std::string::npos);
}

TEST_CASE("gen-data is deterministic byte for byte") {
    const auto d1 = work("gen1"), d2 = work("gen2");
    const auto cfg = write_micro_config(d1);
    auto r1 = run("gen-data --config " + cfg + " --classes 2 --per-class 6 "
                  "--seed 7 --out " + d1);
    REQUIRE(r1.code == 0);
    CHECK(r1.output.find("approach: train 6, val 3") != std::string::npos);
    auto r2 = run("gen-data --config " + cfg + " --classes 2 --per-class 6 "
                  "--seed 7 --out " + d2);
    REQUIRE(r2.code == 0);
    CHECK(slurp(d1 + "/train.thctds") == slurp(d2 + "/train.thctds"));
    CHECK(slurp(d1 + "/val.thctds") == slurp(d2 + "/val.thctds"));
}

TEST_CASE("train, eval and the fusion sweep work end to end") {
    const auto dir = work("train");
    const auto cfg = write_micro_config(dir);
    REQUIRE(run("gen-data --config " + cfg + " --seed 3 --out " + dir)
                .code == 0);

    auto tr = run("train --config " + cfg + " --data " + dir + " --out " +
                  dir + "/run --seed 3");
    REQUIRE(tr.code == 0);
    // the effective config is echoed at startup with paper defaults visible
    CHECK(tr.output.find("momentum = 0.9") != std::string::npos);
    CHECK(tr.output.find("lr = 0.01") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/run/best.ckpt"));
    CHECK(std::filesystem::exists(dir + "/run/metrics.csv"));
    const auto csv = slurp(dir + "/run/metrics.csv");
    CHECK(csv.rfind("epoch,split,loss,top1\n", 0) == 0);
    // one row per epoch per split
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2);

    auto ev = run("eval --ckpt " + dir + "/run/best.ckpt --data " + dir +
                  " --sweep-fusion");
    REQUIRE(ev.code == 0);
    CHECK(ev.output.find("top1") != std::string::npos);
    CHECK(ev.output.find("w=0.0") != std::string::npos);
    CHECK(ev.output.find("w=1.0") != std::string::npos);

    // eval twice gives identical output
    auto ev2 = run("eval --ckpt " + dir + "/run/best.ckpt --data " + dir +
                   " --sweep-fusion");
    CHECK(ev.output == ev2.output);

    // missing dataset is a data error
    CHECK(run("train --config " + cfg + " --data " + dir +
              "/nowhere --out " + dir + "/r2")
              .code == 2);

    // an exploding run aborts with the numeric-failure code
    CHECK(run("train --config " + cfg + " --data " + dir + " --out " + dir +
              "/boom --seed 3 --lr 1e6 --epochs 2")
              .code == 3);
}

TEST_CASE("fixed-seed cli runs reproduce checkpoints exactly") {
    const auto dir = work("repro");
    const auto cfg = write_micro_config(dir);
    REQUIRE(run("gen-data --config " + cfg + " --seed 5 --out " + dir)
                .code == 0);
    const std::string cmd = "train --config " + cfg + " --data " + dir +
                            " --out " + dir + "/a --seed 5 --epochs 2";
    REQUIRE(run(cmd).code == 0);
    const auto ckpt1 = slurp(dir + "/a/best.ckpt");
    const auto csv1 = slurp(dir + "/a/metrics.csv");
    REQUIRE(run(cmd).code == 0);
    CHECK(slurp(dir + "/a/best.ckpt") == ckpt1);
    CHECK(slurp(dir + "/a/metrics.csv") == csv1);
}

TEST_CASE("verify subcommand exit codes") {
    // a clean verify passes; keep runtime low by reusing the suite binary
    auto ok = run("verify --seed 3");
    CHECK(ok.code == 0);
    CHECK(ok.output.find("verification passed") != std::string::npos);

    auto bad = run("verify --seed 3 --inject-fault matmul");
    CHECK(bad.code == 3);
    CHECK(bad.output.find("matmul") != std::string::npos);
    CHECK(bad.output.find("FAIL") != std::string::npos);
}
