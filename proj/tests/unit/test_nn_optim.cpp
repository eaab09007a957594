#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "snscl/nn.hpp"
#include "snscl/optim.hpp"

using namespace snscl;

TEST(Sgd, PlainStep) {
    Tensor p = Tensor::scalar(1.0), v = Tensor::scalar(0.0);
    optim::sgd_step(p, Tensor::scalar(2.0), v, 0.1, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(p.item(), 0.8);
}

TEST(Sgd, ZeroGradientLeavesParameter) {
    Tensor p = Tensor::scalar(1.25), v = Tensor::scalar(0.0);
    for (int i = 0; i < 50; ++i) optim::sgd_step(p, Tensor::scalar(0.0), v, 0.1, 0.9, 0.0);
    EXPECT_EQ(p.item(), 1.25);
}

TEST(Sgd, TwoMomentumStepsMatchUnrolledRecurrence) {
    const double lr = 0.05, m = 0.9, wd = 0.01;
    const double g1 = 0.7, g2 = -0.3;
    double p = 2.0;
    // v1 = g1 + wd p0; p1 = p0 - lr v1; v2 = m v1 + g2 + wd p1; p2 = p1 - lr v2
    const double v1 = g1 + wd * p;
    const double p1 = p - lr * v1;
    const double v2 = m * v1 + g2 + wd * p1;
    const double p2 = p1 - lr * v2;

    Tensor pt = Tensor::scalar(p), vt = Tensor::scalar(0.0);
    optim::sgd_step(pt, Tensor::scalar(g1), vt, lr, m, wd);
    EXPECT_DOUBLE_EQ(pt.item(), p1);
    optim::sgd_step(pt, Tensor::scalar(g2), vt, lr, m, wd);
    EXPECT_DOUBLE_EQ(pt.item(), p2);
    EXPECT_DOUBLE_EQ(vt.item(), v2);
}

TEST(Sgd, RejectsBadArguments) {
    Tensor p(2, 2), v(2, 2);
    EXPECT_THROW(optim::sgd_step(p, Tensor(2, 2), v, 0.0, 0.9, 0.0), std::invalid_argument);
    EXPECT_THROW(optim::sgd_step(p, Tensor(1, 2), v, 0.1, 0.9, 0.0), std::invalid_argument);
}

TEST(Sgd, OptimizerStepsEveryParameterAndZeroes) {
    ad::Parameter a("a", Tensor::scalar(1.0)), b("b", Tensor::from_rows({{1.0, 2.0}}));
    optim::Sgd sgd({&a, &b}, 0.0, 0.0);
    a.grad = Tensor::scalar(1.0);
    b.grad = Tensor::from_rows({{1.0, -1.0}});
    sgd.step(0.5);
    EXPECT_DOUBLE_EQ(a.value.item(), 0.5);
    EXPECT_DOUBLE_EQ(b.value[1], 2.5);
    sgd.zero_grad();
    EXPECT_EQ(a.grad.item(), 0.0);
}

TEST(StepLr, DecaysAtMilestones) {
    const std::vector<int> ms{20, 40};
    EXPECT_DOUBLE_EQ(optim::step_lr(0.01, 0.1, ms, 0), 0.01);
    EXPECT_DOUBLE_EQ(optim::step_lr(0.01, 0.1, ms, 19), 0.01);
    EXPECT_DOUBLE_EQ(optim::step_lr(0.01, 0.1, ms, 20), 0.01 * 0.1);
    EXPECT_DOUBLE_EQ(optim::step_lr(0.01, 0.1, ms, 45), 0.01 * 0.1 * 0.1);
}

TEST(Linear, ZeroWeightsGiveZeroOutput) {
    nn::Linear l("l", 3, 4);
    const Tensor out = l.forward(Tensor(2, 3, 1.7));
    EXPECT_EQ(out, Tensor(2, 4));
}

TEST(Linear, TapeAndPlainPathsAgree) {
    std::mt19937_64 rng(5);
    nn::Mlp mlp("m", {2, 8, 3}, true);
    mlp.init(rng);
    const Tensor x = snscl::testing::random_tensor(6, 2, rng);
    ad::Tape tape;
    const Tensor taped = mlp.forward(tape, tape.constant(x)).value();
    EXPECT_EQ(taped, mlp.forward(x));
    EXPECT_EQ(mlp.forward(x), mlp.forward(x));
    for (double v : taped.data()) EXPECT_GE(v, 0.0);   // relu_last
}

TEST(Mlp, InitIsSeedDeterministic) {
    std::mt19937_64 r1(9), r2(9);
    nn::Mlp a("m", {2, 8, 3}, false), b("m", {2, 8, 3}, false);
    a.init(r1);
    b.init(r2);
    std::vector<ad::Parameter*> pa, pb;
    a.collect(pa);
    b.collect(pb);
    ASSERT_EQ(pa.size(), 4u);
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
    EXPECT_EQ(pa[0]->name, "m.0.weight");
}
