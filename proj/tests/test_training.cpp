#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "dagcn/training.hpp"
#include "dagcn/verification.hpp"
#include "support/synthetic.hpp"

using namespace dagcn;
namespace ad = dagcn::autodiff;

namespace {

TrainConfig small_train(const Dataset& ds) {
    TrainConfig t;
    t.model.hidden = 8;
    t.model.k = 2;
    t.model.m = 2;
    t.model.r = 2;
    t.model = resolve_model_config(t.model, ds);
    t.epochs = 3;
    t.batch_size = 4;
    return t;
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
    std::vector<std::size_t> v(ds.graphs.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
    return v;
}

double max_param_diff(const ModelParams& a, const ModelParams& b) {
    std::vector<const Matrix*> bs;
    b.for_each([&](const std::string&, const Matrix& m) { bs.push_back(&m); });
    double worst = 0.0;
    std::size_t i = 0;
    a.for_each([&](const std::string&, const Matrix& m) { worst = std::max(worst, max_abs_diff(m, *bs[i++])); });
    return worst;
}

}  // namespace

TEST_CASE("cross-entropy values") {
    ad::Tape tape;
    CHECK(cross_entropy_loss(tape.constant(Matrix::from_rows({{0.0, 1.0}})), 1).value()(0, 0) == 0.0);
    CHECK(std::abs(cross_entropy_loss(tape.constant(Matrix::from_rows({{0.5, 0.5}})), 0).value()(0, 0) -
                   0.6931471805599453) <= 1e-12);
    CHECK(std::abs(cross_entropy_loss(tape.constant(Matrix::from_rows({{1.0, 0.0}})), 1).value()(0, 0) -
                   27.631021115928547) <= 1e-3);
}

TEST_CASE("mean and population std") {
    const double v[] = {0.8, 0.9, 1.0};
    const auto [mean, sd] = mean_std(v);
    CHECK(std::abs(mean - 0.9) <= 1e-15);
    CHECK(std::abs(sd - std::sqrt(0.02 / 3.0)) <= 1e-15);
    const double one[] = {0.5};
    CHECK(mean_std(one).second == 0.0);
}

TEST_CASE("Adam: zero gradient at zero weights is a fixed point") {
    ModelConfig c;
    c.hidden = 2;
    c.k = 1;
    c.m = 1;
    c.r = 1;
    ModelParams p = zero_params(c);
    const ModelParams g = zero_params(c);
    AdamState s = AdamState::for_params(p);
    for (int i = 0; i < 5; ++i) adam_step(p, g, s, 0.1, 1e-4);
    CHECK(max_param_diff(p, zero_params(c)) == 0.0);
    CHECK(s.step == 5);
}

TEST_CASE("Adam: first step moves each weight by about lr against the gradient") {
    ModelConfig c;
    c.hidden = 2;
    c.k = 1;
    c.m = 1;
    c.r = 1;
    ModelParams p = init_params(c, 3);
    const ModelParams start = p;
    ModelParams g = init_params(c, 4);
    g.for_each([](const std::string&, Matrix& m) {
        for (double& v : m.values()) v = v >= 0 ? v + 0.1 : v - 0.1;
    });
    AdamState s = AdamState::for_params(p);
    adam_step(p, g, s, 0.01, 0.0);
    std::vector<const Matrix*> gs, ss;
    g.for_each([&](const std::string&, const Matrix& m) { gs.push_back(&m); });
    start.for_each([&](const std::string&, const Matrix& m) { ss.push_back(&m); });
    std::size_t idx = 0;
    p.for_each([&](const std::string&, const Matrix& m) {
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double gi = gs[idx]->data()[i];
            // first bias-corrected step: lr * g / (|g| + eps)
            const double expect = ss[idx]->data()[i] - 0.01 * gi / (std::abs(gi) + 1e-8);
            CHECK(std::abs(m.data()[i] - expect) <= 1e-15);
        }
        ++idx;
    });
}

TEST_CASE("Adam: L2 decays weights when the loss gradient is zero") {
    ModelConfig c;
    c.hidden = 2;
    c.k = 1;
    c.m = 1;
    c.r = 1;
    ModelParams p = zero_params(c);
    p.input_proj.fill(1.0);
    AdamState s = AdamState::for_params(p);
    adam_step(p, zero_params(c), s, 0.01, 1e-4);
    for (double v : p.input_proj.values()) CHECK(v < 1.0);
}

TEST_CASE("one optimizer step per epoch when the batch covers the training set") {
    const Dataset ds = testsupport::synthetic_dataset(10, 1);
    TrainConfig t = small_train(ds);
    t.batch_size = 50;
    ModelParams p = init_params(t.model, 1);
    AdamState s = AdamState::for_params(p);
    Rng rng(1);
    const auto idx = all_indices(ds);
    CHECK(train_epoch(p, s, ds, idx, t, 0.001, rng).optimizer_steps == 1);
    t.batch_size = 3;
    CHECK(train_epoch(p, s, ds, idx, t, 0.001, rng).optimizer_steps == 4);
    CHECK(s.step == 5);
    const std::vector<std::size_t> none;
    CHECK_THROWS_AS(train_epoch(p, s, ds, none, t, 0.001, rng), ContractError);
    CHECK_THROWS_AS(evaluate(p, t.model, ds, none), ContractError);
}

TEST_CASE("batch gradient is the mean of per-graph gradients") {
    const Dataset ds = testsupport::synthetic_dataset(3, 5);
    TrainConfig t = small_train(ds);
    t.batch_size = 3;
    t.l2 = 0.0;
    const ModelParams p0 = init_params(t.model, 9);

    ModelParams mean = zero_params(t.model);
    for (const Graph& g : ds.graphs) {
        const ModelParams grads = graph_gradient(g, p0, t.model).grads;
        std::vector<const Matrix*> gs;
        grads.for_each([&](const std::string&, const Matrix& m) { gs.push_back(&m); });
        std::size_t i = 0;
        mean.for_each([&](const std::string&, Matrix& m) {
            for (std::size_t e = 0; e < m.size(); ++e) m.data()[e] += gs[i]->data()[e] / 3.0;
            ++i;
        });
    }
    ModelParams manual = p0;
    AdamState ms = AdamState::for_params(manual);
    adam_step(manual, mean, ms, 0.001, 0.0);

    ModelParams trained = p0;
    AdamState ts = AdamState::for_params(trained);
    Rng rng(2);
    train_epoch(trained, ts, ds, all_indices(ds), t, 0.001, rng);
    CHECK(max_param_diff(manual, trained) <= 1e-10);
}

TEST_CASE("training loss decreases on a two-graph toy problem") {
    const Dataset ds = testsupport::synthetic_dataset(2, 12);
    TrainConfig t = small_train(ds);
    t.batch_size = 2;
    ModelParams p = init_params(t.model, 1);
    AdamState s = AdamState::for_params(p);
    Rng rng(1);
    const auto idx = all_indices(ds);
    double prev = INFINITY;
    for (int e = 0; e < 50; ++e) {
        const double loss = train_epoch(p, s, ds, idx, t, 0.01, rng).train_loss;
        CAPTURE(e);
        CHECK(loss < prev);
        prev = loss;
    }
}

TEST_CASE("evaluate has no side effects and an untrained model is near chance") {
    const Dataset ds = testsupport::synthetic_dataset(200, 77);
    TrainConfig t = small_train(ds);
    const ModelParams p = init_params(t.model, 1);
    const ModelParams copy = p;
    const auto idx = all_indices(ds);
    const double a = evaluate(p, t.model, ds, idx);
    const double b = evaluate(p, t.model, ds, idx);
    CHECK(a == b);
    CHECK(max_param_diff(p, copy) == 0.0);
    CHECK(a >= 0.3);
    CHECK(a <= 0.7);
}

TEST_CASE("cross-validation runs, reports and never trains on test graphs") {
    const Dataset ds = testsupport::synthetic_dataset(10, 21);
    TrainConfig t = small_train(ds);
    t.folds = 2;
    t.epochs = 2;
    t.lr_grid = {0.01, 0.001};
    t.grid_epochs = 1;

    std::set<std::size_t> seen;
    std::vector<std::string> leaks;
    CvOptions opts;
    opts.hooks.on_train_graph = [&](std::size_t gi) { seen.insert(gi); };
    opts.on_fold_done = [&](const FoldReport& f) {
        for (std::size_t gi : f.test_indices) {
            if (seen.count(gi)) leaks.push_back("fold " + std::to_string(f.fold) + " graph " + std::to_string(gi));
        }
        seen.clear();
    };
    const CVReport rep = run_cv(ds, t, opts);
    CHECK(leaks.empty());
    REQUIRE(rep.folds.size() == 2);
    std::vector<double> accs;
    for (std::size_t f = 0; f < 2; ++f) {
        const FoldReport& fr = rep.folds[f];
        CHECK(fr.fold == f);
        CHECK(fr.seed == t.seed + f);
        CHECK(fr.trace.size() == 2);
        CHECK(fr.test_accuracy == fr.trace.back().test_accuracy);
        CHECK((fr.learning_rate == 0.01 || fr.learning_rate == 0.001));
        CHECK(fr.test_indices.size() == 5);
        CHECK(evaluate(fr.params, rep.config.model, ds, fr.test_indices) == fr.test_accuracy);
        accs.push_back(fr.test_accuracy);
    }
    const auto [mean, sd] = mean_std(accs);
    CHECK(rep.mean_accuracy == mean);
    CHECK(rep.std_accuracy == sd);
}

TEST_CASE("cross-validation is deterministic and independent of the job count") {
    const Dataset ds = testsupport::synthetic_dataset(12, 4);
    TrainConfig t = small_train(ds);
    t.folds = 3;
    t.epochs = 2;
    const CVReport a = run_cv(ds, t);
    const CVReport b = run_cv(ds, t);
    CvOptions parallel;
    parallel.jobs = 3;
    const CVReport c = run_cv(ds, t, parallel);
    for (std::size_t f = 0; f < 3; ++f) {
        for (std::size_t e = 0; e < 2; ++e) {
            CHECK(a.folds[f].trace[e].train_loss == b.folds[f].trace[e].train_loss);
            CHECK(a.folds[f].trace[e].train_loss == c.folds[f].trace[e].train_loss);
        }
        CHECK(max_param_diff(a.folds[f].params, c.folds[f].params) == 0.0);
    }
}

TEST_CASE("invalid training configs are rejected") {
    const Dataset ds = testsupport::synthetic_dataset(10, 1);
    TrainConfig t = small_train(ds);
    t.batch_size = 0;
    CHECK_THROWS_AS(run_cv(ds, t), ConfigError);
    t = small_train(ds);
    t.learning_rate = 0.0;
    CHECK_THROWS_AS(run_cv(ds, t), ConfigError);
    t = small_train(ds);
    t.folds = 6;
    CHECK_THROWS_AS(run_cv(ds, t), StratificationError);
}

TEST_CASE("adjacency cache respects its entry budget") {
    const Dataset ds = testsupport::synthetic_dataset(5, 3, 10, 10);
    const AdjacencyCache all(ds);
    for (std::size_t i = 0; i < 5; ++i) {
        REQUIRE(all.get(i) != nullptr);
        CHECK(*all.get(i) == normalize_adjacency(ds.graphs[i].adjacency_matrix()));
    }
    const AdjacencyCache partial(ds, 250);
    CHECK(partial.get(1) != nullptr);
    CHECK(partial.get(2) == nullptr);
    CHECK(partial.get(99) == nullptr);
}
