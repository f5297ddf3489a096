#include <doctest.h>

#include <cmath>

#include "grif/optim.hpp"

namespace tc = grif::tc;

TEST_SUITE("optim") {

TEST_CASE("schedule endpoints and warmup") {
    CHECK(tc::lr_at(0, 3e-4, 2000, 2000000) == doctest::Approx(0.0));
    CHECK(tc::lr_at(2000, 3e-4, 2000, 2000000) == doctest::Approx(3e-4));
    CHECK(tc::lr_at(2000 + 2000000, 3e-4, 2000, 2000000) == doctest::Approx(0.0));
    CHECK(tc::lr_at(2000 + 3000000, 3e-4, 2000, 2000000) == doctest::Approx(0.0));
}

TEST_CASE("schedule is continuous at the warmup boundary") {
    const double before = tc::lr_at(1999, 3e-4, 2000, 500);
    const double at = tc::lr_at(2000, 3e-4, 2000, 500);
    const double after = tc::lr_at(2001, 3e-4, 2000, 500);
    CHECK(std::abs(at - before) < 3e-4 / 2000 + 1e-12);
    CHECK(std::abs(after - at) < 1e-5);
    CHECK(at == doctest::Approx(3e-4));
}

TEST_CASE("schedule rejects bad arguments") {
    CHECK_THROWS_AS(tc::lr_at(-1, 3e-4, 2000, 100), std::invalid_argument);
    CHECK_THROWS_AS(tc::lr_at(0, 3e-4, 0, 100), std::invalid_argument);
    CHECK_THROWS_AS(tc::lr_at(0, 3e-4, 10, 0), std::invalid_argument);
}

TEST_CASE("adam: lr=0 leaves params but advances moments") {
    std::vector<tc::Tensor> params{tc::Tensor({2}, {1.0f, -2.0f}, true)};
    params[0].grad()[0] = 0.5f;
    params[0].grad()[1] = -0.25f;
    tc::AdamState state;
    CHECK(state.step == 0);
    tc::adam_step(params, state, 0.0);
    CHECK(state.step == 1);
    CHECK(params[0].data()[0] == doctest::Approx(1.0));
    CHECK(params[0].data()[1] == doctest::Approx(-2.0));
    CHECK(state.m[0][0] == doctest::Approx(0.05));   // (1-b1)*g
    CHECK(state.v[0][0] == doctest::Approx(0.00025));  // (1-b2)*g^2
}

TEST_CASE("adam: first step with unit gradient moves by about lr") {
    // With g=1: m_hat = v_hat = 1, so the update is lr / (1 + eps).
    std::vector<tc::Tensor> params{tc::Tensor({1}, {0.7f}, true)};
    params[0].grad()[0] = 1.0f;
    tc::AdamState state;
    const double lr = 1e-2;
    tc::adam_step(params, state, lr);
    CHECK(params[0].data()[0] == doctest::Approx(0.7 - lr).epsilon(1e-5));
}

TEST_CASE("adam: moments start at zero and grads are cleared") {
    std::vector<tc::Tensor> params{tc::Tensor({3}, {0.0f, 0.0f, 0.0f}, true)};
    params[0].grad()[2] = 4.0f;
    tc::AdamState state;
    tc::adam_step(params, state, 1e-3);
    CHECK(params[0].grad()[2] == 0.0f);
    CHECK(state.m[0][0] == 0.0f);
    CHECK(state.v[0][1] == 0.0f);
}

TEST_CASE("adam rejects changed parameter lists") {
    std::vector<tc::Tensor> params{tc::Tensor({2}, {0.0f, 0.0f}, true)};
    tc::AdamState state;
    tc::adam_step(params, state, 1e-3);
    params.push_back(tc::Tensor({1}, {0.0f}, true));
    CHECK_THROWS_AS(tc::adam_step(params, state, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(tc::adam_step(params, state, -1.0), std::invalid_argument);
}

}  // TEST_SUITE
