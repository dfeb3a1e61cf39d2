#include "q3r/tinynet.hpp"

#include "q3r/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace q3r;

namespace {

std::vector<Matrix> random_rows(Index n, Index f, std::mt19937_64& rng) {
    std::vector<Matrix> out;
    for (Index i = 0; i < n; ++i)
        out.push_back(randn(1, f, rng));
    return out;
}

std::vector<Matrix> random_seqs(Index n, Index seq, Index dim, std::mt19937_64& rng) {
    std::vector<Matrix> out;
    for (Index i = 0; i < n; ++i)
        out.push_back(randn(seq, dim, rng));
    return out;
}

// Loss as a function of one parameter tensor, for finite differencing.
double loss_at(Net& net, const std::string& pname, const Matrix& value,
               const Batch& batch, LossKind kind) {
    ParamTensor* p = net.find(pname);
    REQUIRE(p != nullptr);
    const Matrix saved = p->w;
    p->w = value;
    const double out = loss_value(forward(net, batch.inputs), batch, kind);
    p->w = saved;
    return out;
}

void check_all_grads(Net& net, const Batch& batch, LossKind kind, double tol) {
    const BackwardResult bw = backward(net, batch, kind);
    const std::vector<ParamTensor*> ps = net.params();
    REQUIRE(bw.grads.size() == ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::string name = ps[i]->name;
        const Matrix fd = oracle::fd_grad(
            [&](const Matrix& x) { return loss_at(net, name, x, batch, kind); },
            ps[i]->w, 1e-6);
        const double err = (bw.grads[i] - fd).cwiseAbs().maxCoeff();
        INFO("tensor ", name);
        CHECK(err < tol);
    }
}

} // namespace

TEST_CASE("make_net shapes, naming and head marking") {
    Net net = make_net({LayerSpec::dense(8, 16), LayerSpec::relu(),
                        LayerSpec::dense(16, 4)},
                       7);
    REQUIRE(net.layers.size() == 3);
    const auto ps = net.params();
    REQUIRE(ps.size() == 4);
    CHECK(ps[0]->name == "dense0.W");
    CHECK(ps[1]->name == "dense0.b");
    CHECK(ps[0]->w.rows() == 8);
    CHECK(ps[0]->w.cols() == 16);
    CHECK(ps[1]->w.isZero());

    CHECK_FALSE(std::get<DenseLayer>(net.layers[0].impl).is_head);
    CHECK(std::get<DenseLayer>(net.layers[2].impl).is_head);

    Net again = make_net({LayerSpec::dense(8, 16), LayerSpec::relu(),
                          LayerSpec::dense(16, 4)},
                         7);
    CHECK((again.params()[0]->w - ps[0]->w).norm() == 0.0);
}

TEST_CASE("dense forward matches a hand computation") {
    Net net = make_net({LayerSpec::dense(3, 2)}, 1);
    DenseLayer& l = std::get<DenseLayer>(net.layers[0].impl);
    l.b.w << 0.5, -1.0;

    Matrix x(1, 3);
    x << 1.0, 2.0, -1.0;
    const Matrix pred = forward(net, {x});
    const Matrix expect = x * l.w.w + l.b.w;
    CHECK((pred - expect).norm() < 1e-15);
}

TEST_CASE("zero logits give log(k) cross entropy") {
    Net net = make_net({LayerSpec::dense(5, 4)}, 3);
    std::get<DenseLayer>(net.layers[0].impl).w.w.setZero();

    std::mt19937_64 rng(5);
    Batch batch;
    batch.inputs = random_rows(6, 5, rng);
    batch.labels = {0, 1, 2, 3, 0, 1};
    const double loss = loss_value(forward(net, batch.inputs), batch,
                                   LossKind::SoftmaxCrossEntropy);
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("accuracy counts argmax hits") {
    Matrix preds(3, 3);
    preds << 1.0, 2.0, 0.0,
             5.0, 1.0, 1.0,
             0.0, 0.0, 3.0;
    CHECK(accuracy(preds, {1, 0, 2}) == 1.0);
    CHECK(accuracy(preds, {0, 0, 2}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("backward matches finite differences on a dense relu stack") {
    std::mt19937_64 rng(201);
    Net net = make_net({LayerSpec::dense(6, 5), LayerSpec::relu(),
                        LayerSpec::dense(5, 3)},
                       11);
    Batch batch;
    batch.inputs = random_rows(4, 6, rng);
    batch.labels = {0, 2, 1, 2};
    check_all_grads(net, batch, LossKind::SoftmaxCrossEntropy, 1e-5);
}

TEST_CASE("backward matches finite differences with a factorized layer and mse") {
    std::mt19937_64 rng(203);
    Net net = make_net({LayerSpec::factorized(5, 2, 4), LayerSpec::relu(),
                        LayerSpec::dense(4, 3)},
                       13);
    Batch batch;
    batch.inputs = random_rows(4, 5, rng);
    batch.targets = randn(4, 3, rng);
    check_all_grads(net, batch, LossKind::MeanSquaredError, 1e-5);
}

TEST_CASE("backward matches finite differences through attention and flatten") {
    std::mt19937_64 rng(207);
    Net net = make_net({LayerSpec::attention(4), LayerSpec::dense(3 * 4, 3)}, 17);
    Batch batch;
    batch.inputs = random_seqs(3, 3, 4, rng);
    batch.labels = {0, 1, 2};
    check_all_grads(net, batch, LossKind::SoftmaxCrossEntropy, 1e-5);
}

TEST_CASE("attention-only net regression gradients check out") {
    std::mt19937_64 rng(209);
    Net net = make_net({LayerSpec::attention(3)}, 19);
    Batch batch;
    batch.inputs = random_seqs(3, 2, 3, rng);
    batch.targets = randn(3, 6, rng);
    check_all_grads(net, batch, LossKind::MeanSquaredError, 1e-5);
}

TEST_CASE("loss_total_with_q3r adds the scaled penalty") {
    std::mt19937_64 rng(211);
    Net net = make_net({LayerSpec::dense(4, 6), LayerSpec::relu(),
                        LayerSpec::dense(6, 3)},
                       23);
    Batch batch;
    batch.inputs = random_rows(5, 4, rng);
    batch.labels = {0, 1, 2, 0, 1};

    ParamTensor* hidden = net.find("dense0.W");
    REQUIRE(hidden != nullptr);
    enable_q3r(*hidden, RankTarget::absolute(2));
    CHECK_THROWS_WITH(
        loss_total_with_q3r(net, batch, LossKind::SoftmaxCrossEntropy, 0.01),
        "missing operator for dense0.W");

    auto [op, next] = update_operator(hidden->w, hidden->smoothing);
    hidden->op = op;
    hidden->smoothing = next;

    const double base = loss_value(forward(net, batch.inputs), batch,
                                   LossKind::SoftmaxCrossEntropy);
    const double total =
        loss_total_with_q3r(net, batch, LossKind::SoftmaxCrossEntropy, 0.01);
    CHECK(total == doctest::Approx(base + 0.01 * op.q3r_value(hidden->w))
                       .epsilon(1e-12));
}

TEST_CASE("label and shape validation") {
    Net net = make_net({LayerSpec::dense(3, 2)}, 29);
    std::mt19937_64 rng(31);
    Batch batch;
    batch.inputs = random_rows(2, 3, rng);
    batch.labels = {0, 2};
    CHECK_THROWS_AS(
        loss_value(forward(net, batch.inputs), batch, LossKind::SoftmaxCrossEntropy),
        ConfigError);

    Batch wide;
    wide.inputs = random_rows(2, 4, rng);
    CHECK_THROWS_AS(forward(net, wide.inputs), ConfigError);
}
