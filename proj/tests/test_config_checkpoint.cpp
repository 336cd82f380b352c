#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <algorithm>

#include <unistd.h>

#include "dagcn/checkpoint.hpp"
#include "dagcn/report.hpp"
#include "dagcn/run_config.hpp"
#include "support/synthetic.hpp"

using namespace dagcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("dagcn_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string error_of(const fs::path& p) {
    try {
        load_run_config(p);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("an empty config file yields the defaults") {
    TempDir tmp("cfg_empty");
    write_file(tmp.path / "empty.json", "");
    write_file(tmp.path / "braces.json", "{}");
    for (const char* name : {"empty.json", "braces.json"}) {
        const RunConfig c = load_run_config(tmp.path / name);
        CHECK(c.train == TrainConfig{});
        CHECK(c.dataset_name == "MUTAG");
        CHECK(c.train.model.k == 3);
        CHECK(c.train.learning_rate == 0.001);
        CHECK(c.train.batch_size == 50);
    }
}

TEST_CASE("config keys are read and unknown keys are rejected by name") {
    TempDir tmp("cfg_keys");
    write_file(tmp.path / "ok.json", R"({"dataset": {"name": "PTC_MR", "features": "degree", "degree_cap": 10},
        "train": {"epochs": 5, "lr_grid": [0.01, 0.001]},
        "model": {"k": 2, "hop_attention": "free", "nonlinearity": "tanh"}, "jobs": 2})");
    const RunConfig c = load_run_config(tmp.path / "ok.json");
    CHECK(c.dataset_name == "PTC_MR");
    CHECK(c.load.scheme == FeatureScheme::Degree);
    CHECK(c.load.degree_cap == 10);
    CHECK(c.train.epochs == 5);
    CHECK(c.train.lr_grid == std::vector<double>{0.01, 0.001});
    CHECK(c.train.model.k == 2);
    CHECK(c.train.model.hop_attention == HopAttention::Free);
    CHECK(c.train.model.nonlinearity == Nonlinearity::Tanh);
    CHECK(c.jobs == 2);

    write_file(tmp.path / "typo.json", R"({"train": {"learnin_rate": 0.1}})");
    CHECK(error_of(tmp.path / "typo.json").find("train.learnin_rate") != std::string::npos);
    write_file(tmp.path / "type.json", R"({"model": {"k": "three"}})");
    CHECK(error_of(tmp.path / "type.json").find("model.k") != std::string::npos);
    write_file(tmp.path / "bad.json", R"({"model": {"nonlinearity": "sigmoid"}})");
    CHECK_FALSE(error_of(tmp.path / "bad.json").empty());
    write_file(tmp.path / "broken.json", "{");
    CHECK_FALSE(error_of(tmp.path / "broken.json").empty());
}

TEST_CASE("saved config reloads to the same values") {
    TempDir tmp("cfg_echo");
    RunConfig c;
    c.dataset_name = "NCI1";
    c.train.seed = 9;
    c.train.lr_grid = {0.1, 0.01};
    c.train.model.r = 5;
    c.train.model.hop_attention = HopAttention::Free;
    c.load.scheme = FeatureScheme::OneHot;
    save_run_config(c, tmp.path / "c.json");
    const RunConfig back = load_run_config(tmp.path / "c.json");
    CHECK(back.train == c.train);
    CHECK(back.dataset_name == c.dataset_name);
    CHECK(back.load.scheme == c.load.scheme);
}

TEST_CASE("checkpoints reload bit-exactly") {
    TempDir tmp("ckpt");
    Checkpoint ck;
    ck.config.hidden = 5;
    ck.config.feature_dim = 7;
    ck.config.num_classes = 3;
    ck.config.hop_attention = HopAttention::Free;
    ck.seed = 1234567890123ULL;
    ck.params = init_params(ck.config, 42);
    ck.params.for_each([](const std::string&, Matrix& m) {
        for (double& v : m.values()) v = v / 3.0 + 1e-300;
    });
    ck.dataset = "SYNTH";
    ck.fold = 4;
    ck.learning_rate = 0.001;
    ck.test_indices = {3, 1, 4, 1, 5};
    ck.test_accuracy = 2.0 / 3.0;
    save_checkpoint(ck, tmp.path / "a.json");
    const Checkpoint back = load_checkpoint(tmp.path / "a.json");
    CHECK(back.config == ck.config);
    CHECK(back.seed == ck.seed);
    CHECK(back.dataset == ck.dataset);
    CHECK(back.fold == ck.fold);
    CHECK(back.test_indices == ck.test_indices);
    CHECK(back.test_accuracy == ck.test_accuracy);
    std::vector<const Matrix*> orig;
    ck.params.for_each([&](const std::string&, const Matrix& m) { orig.push_back(&m); });
    std::size_t i = 0;
    back.params.for_each([&](const std::string&, const Matrix& m) { CHECK(m == *orig[i++]); });
    CHECK(i == orig.size());
    save_checkpoint(back, tmp.path / "b.json");
    CHECK(read_file(tmp.path / "a.json") == read_file(tmp.path / "b.json"));
}

TEST_CASE("malformed checkpoints are rejected") {
    TempDir tmp("ckpt_bad");
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "missing.json"), IoError);
    Checkpoint ck;
    ck.config.feature_dim = 2;
    ck.params = init_params(ck.config, 1);
    save_checkpoint(ck, tmp.path / "ok.json");
    std::string text = read_file(tmp.path / "ok.json");
    const auto pos = text.find("\"pool.u2\"");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 9, "\"pool.uX\"");
    write_file(tmp.path / "renamed.json", text);
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "renamed.json"), FormatError);
    write_file(tmp.path / "junk.json", "not json");
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "junk.json"), FormatError);
}

TEST_CASE("run outputs: trace csv, reports and per-fold checkpoints") {
    TempDir tmp("outputs");
    const Dataset ds = testsupport::synthetic_dataset(8, 2);
    RunConfig cfg;
    cfg.train.folds = 2;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 4;
    cfg.train.model.hidden = 4;
    cfg.train.model.k = 2;
    cfg.train.model.m = 1;
    cfg.train.model.r = 2;
    const CVReport rep = run_cv(ds, cfg.train);
    write_run_outputs(rep, cfg, tmp.path);
    for (const char* f : {"config.json", "report.txt", "report.json", "trace.csv", "fold_00.ckpt.json", "fold_01.ckpt.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(tmp.path / f));
    }
    const std::string csv = read_file(tmp.path / "trace.csv");
    CHECK(csv.rfind("fold,epoch,train_loss,train_acc,test_acc\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(read_file(tmp.path / "report.txt").find("over folds") != std::string::npos);

    const Checkpoint ck = load_checkpoint(tmp.path / "fold_01.ckpt.json");
    CHECK(ck.fold == 1);
    CHECK(ck.test_indices == rep.folds[1].test_indices);
    CHECK(evaluate(ck.params, ck.config, ds, ck.test_indices) == rep.folds[1].test_accuracy);

    const RunConfig echo = load_run_config(tmp.path / "config.json");
    CHECK(echo.train.epochs == 2);
    CHECK(echo.train.folds == 2);
}

TEST_CASE("mean and std formatting") {
    CHECK(format_mean_std(0.87222, 0.0610) == "87.22 ± 6.10");
}
