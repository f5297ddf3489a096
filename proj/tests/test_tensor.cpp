#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "grif/rng.hpp"
#include "grif/tensor.hpp"

using grif::Rng;
namespace tc = grif::tc;
using DT = tc::TensorT<double>;

namespace {

DT random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad, double lo = -1.0, double hi = 1.0) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return DT(std::move(shape), std::move(v), requires_grad);
}

// Keep |x| away from zero (relu kink safety for finite differences).
DT random_away_from_zero(std::vector<int> shape, Rng& rng, double margin = 0.05) {
    DT t = random_tensor(std::move(shape), rng, true);
    for (auto& x : t.data()) {
        if (std::abs(x) < margin) x = x < 0 ? x - margin : x + margin;
    }
    return t;
}

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Central finite differences against the analytic gradient for a scalar
// functional of op(inputs). The op output is projected to a scalar through a
// fixed random linear functional; the check runs in the 64-bit instantiation.
void check_gradients(const std::function<std::vector<DT>(Rng&)>& make_inputs,
                     const std::function<DT(std::vector<DT>&)>& op, uint64_t seed, int cases = 100,
                     double h = 1e-3, double tol = 1e-3) {
    Rng rng(seed);
    for (int c = 0; c < cases; ++c) {
        std::vector<DT> inputs = make_inputs(rng);
        DT out = op(inputs);
        DT w = random_tensor(out.shape(), rng, false);
        auto loss_of = [&]() { return tc::sum_all(tc::mul(op(inputs), w)).item(); };

        tc::backward(tc::sum_all(tc::mul(op(inputs), w)));

        for (auto& input : inputs) {
            if (!input.requires_grad()) continue;
            const std::vector<double> analytic = input.grad();
            std::vector<double> numeric(analytic.size());
            for (size_t e = 0; e < numeric.size(); ++e) {
                const double keep = input.data()[e];
                input.data()[e] = keep + h;
                const double lp = loss_of();
                input.data()[e] = keep - h;
                const double lm = loss_of();
                input.data()[e] = keep;
                numeric[e] = (lp - lm) / (2 * h);
            }
            std::vector<double> diff(numeric.size());
            for (size_t e = 0; e < numeric.size(); ++e) diff[e] = numeric[e] - analytic[e];
            const double rel = norm(diff) / std::max(norm(numeric), 1e-9);
            CAPTURE(c);
            REQUIRE(rel < tol);
        }
    }
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul identity") {
    tc::Tensor eye({2, 2}, {1, 0, 0, 1});
    tc::Tensor m({2, 2}, {1, 2, 3, 4});
    tc::Tensor out = tc::matmul(eye, m);
    for (int i = 0; i < 4; ++i) CHECK(out.data()[static_cast<size_t>(i)] == doctest::Approx(m.data()[static_cast<size_t>(i)]));
}

TEST_CASE("cosine of parallel vectors is one") {
    tc::Tensor v({3}, {0.3f, -1.2f, 2.0f});
    CHECK(tc::cosine(v, v).item() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("log-softmax of equal logits is -ln k") {
    const int k = 7;
    tc::Tensor row = tc::Tensor::full({1, k}, 0.42f);
    tc::Tensor out = tc::log_softmax_rows(row);
    for (int j = 0; j < k; ++j)
        CHECK(out.at(0, j) == doctest::Approx(-std::log(static_cast<double>(k))).epsilon(1e-6));
}

TEST_CASE("sum backward is ones") {
    tc::Tensor x({3}, {1.0f, 2.0f, 3.0f}, true);
    tc::backward(tc::sum_all(x));
    for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(1.0));
}

TEST_CASE("cosine gradient vanishes at a parallel maximum") {
    tc::Tensor a({4}, {0.5f, -1.0f, 2.0f, 0.25f}, true);
    tc::Tensor b({4}, {0.5f, -1.0f, 2.0f, 0.25f});
    tc::backward(tc::cosine(a, b));
    for (size_t i = 0; i < 4; ++i) CHECK(std::abs(a.grad()[i]) < 1e-6);
}

TEST_CASE("two-layer network matches finite differences") {
    check_gradients(
        [](Rng& rng) {
            std::vector<DT> in;
            in.push_back(random_tensor({4, 6}, rng, false));  // input data
            in.push_back(random_tensor({6, 5}, rng, true));   // w1
            in.push_back(random_tensor({5}, rng, true));      // b1
            in.push_back(random_tensor({5, 3}, rng, true));   // w2
            in.push_back(random_tensor({3}, rng, true));      // b2
            return in;
        },
        [](std::vector<DT>& in) {
            DT h = tc::tanh_op(tc::add_bias(tc::matmul(in[0], in[1]), in[2]));
            return tc::add_bias(tc::matmul(h, in[3]), in[4]);
        },
        7001, 100);
}

TEST_CASE("fan-out accumulates branch gradients") {
    tc::Tensor x({3}, {1.0f, -2.0f, 0.5f}, true);
    tc::Tensor c1({3}, {2.0f, 3.0f, 4.0f});
    tc::Tensor c2({3}, {-1.0f, 1.0f, 5.0f});
    tc::backward(tc::sum_all(tc::add(tc::mul(x, c1), tc::mul(x, c2))));
    CHECK(x.grad()[0] == doctest::Approx(1.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
    CHECK(x.grad()[2] == doctest::Approx(9.0));
}

TEST_CASE("normalize-then-cosine equals dot of normalized inputs") {
    Rng rng(99);
    for (int c = 0; c < 50; ++c) {
        DT a = random_away_from_zero({8}, rng, 0.1);
        DT b = random_away_from_zero({8}, rng, 0.1);
        const double cos_direct = tc::cosine(a, b).item();
        DT an = tc::l2_normalize_rows(a);
        DT bn = tc::l2_normalize_rows(b);
        double dot = 0;
        for (size_t i = 0; i < 8; ++i) dot += an.data()[i] * bn.data()[i];
        CHECK(std::abs(cos_direct - dot) < 1e-6);
    }
}

TEST_CASE("gradient suite: every op matches central finite differences") {
    SUBCASE("matmul") {
        check_gradients(
            [](Rng& rng) {
                return std::vector<DT>{random_tensor({4, 3}, rng, true), random_tensor({3, 5}, rng, true)};
            },
            [](std::vector<DT>& in) { return tc::matmul(in[0], in[1]); }, 1);
    }
    SUBCASE("add") {
        check_gradients(
            [](Rng& rng) {
                return std::vector<DT>{random_tensor({3, 4}, rng, true), random_tensor({3, 4}, rng, true)};
            },
            [](std::vector<DT>& in) { return tc::add(in[0], in[1]); }, 2);
    }
    SUBCASE("sub") {
        check_gradients(
            [](Rng& rng) {
                return std::vector<DT>{random_tensor({3, 4}, rng, true), random_tensor({3, 4}, rng, true)};
            },
            [](std::vector<DT>& in) { return tc::sub(in[0], in[1]); }, 3);
    }
    SUBCASE("mul") {
        check_gradients(
            [](Rng& rng) {
                return std::vector<DT>{random_tensor({3, 4}, rng, true), random_tensor({3, 4}, rng, true)};
            },
            [](std::vector<DT>& in) { return tc::mul(in[0], in[1]); }, 4);
    }
    SUBCASE("add_bias") {
        check_gradients(
            [](Rng& rng) {
                return std::vector<DT>{random_tensor({5, 4}, rng, true), random_tensor({4}, rng, true)};
            },
            [](std::vector<DT>& in) { return tc::add_bias(in[0], in[1]); }, 5);
    }
    SUBCASE("scale and add_const") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({4, 4}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::add_const(tc::scale(in[0], 1.7), -0.3); }, 6);
    }
    SUBCASE("relu") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_away_from_zero({5, 5}, rng)}; },
                        [](std::vector<DT>& in) { return tc::relu(in[0]); }, 7);
    }
    SUBCASE("tanh") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({5, 5}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::tanh_op(in[0]); }, 8);
    }
    SUBCASE("sum_all and mean_all") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({3, 7}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::add(tc::sum_all(in[0]), tc::mean_all(in[0])); }, 9);
    }
    SUBCASE("mean_rows") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({6, 4}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::mean_rows(in[0]); }, 10);
    }
    SUBCASE("mean_rows_grouped") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({8, 3}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::mean_rows_grouped(in[0], 4); }, 11);
    }
    SUBCASE("sum_cols") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({4, 6}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::sum_cols(in[0]); }, 12);
    }
    SUBCASE("concat_rows") {
        check_gradients(
            [](Rng& rng) {
                return std::vector<DT>{random_tensor({2, 5}, rng, true), random_tensor({3, 5}, rng, true)};
            },
            [](std::vector<DT>& in) { return tc::concat_rows<double>({in[0], in[1]}); }, 13);
    }
    SUBCASE("slice_cols") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({4, 8}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::slice_cols(in[0], 2, 6); }, 14);
    }
    SUBCASE("transpose") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({3, 5}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::transpose(in[0]); }, 15);
    }
    SUBCASE("l2_normalize_rows") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_away_from_zero({4, 6}, rng, 0.1)}; },
                        [](std::vector<DT>& in) { return tc::l2_normalize_rows(in[0]); }, 16);
    }
    SUBCASE("log_softmax_rows") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({4, 6}, rng, true, -2, 2)}; },
                        [](std::vector<DT>& in) { return tc::log_softmax_rows(in[0]); }, 17);
    }
    SUBCASE("take_diag") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({5, 5}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::take_diag(in[0]); }, 18);
    }
    SUBCASE("gather_rows with duplicate ids") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({6, 4}, rng, true)}; },
                        [](std::vector<DT>& in) { return tc::gather_rows(in[0], {0, 3, 3, 5, 1}); }, 19);
    }
    SUBCASE("cosine") {
        check_gradients(
            [](Rng& rng) {
                return std::vector<DT>{random_away_from_zero({6}, rng, 0.1), random_away_from_zero({6}, rng, 0.1)};
            },
            [](std::vector<DT>& in) { return tc::cosine(in[0], in[1]); }, 20);
    }
    SUBCASE("scale_shift") {
        check_gradients(
            [](Rng& rng) {
                return std::vector<DT>{random_tensor({3, 4}, rng, true), random_tensor({3, 4}, rng, true),
                                       random_tensor({3, 4}, rng, true)};
            },
            [](std::vector<DT>& in) { return tc::scale_shift(in[0], in[1], in[2]); }, 21);
    }
    SUBCASE("reshape") {
        check_gradients([](Rng& rng) { return std::vector<DT>{random_tensor({3, 4}, rng, true)}; },
                        [](std::vector<DT>& in) { return in[0].reshape({4, 3}); }, 22);
    }
}

TEST_CASE("errors") {
    tc::Tensor a({2, 3}, std::vector<float>(6, 1.0f));
    tc::Tensor b({2, 3}, std::vector<float>(6, 1.0f));

    SUBCASE("matmul shape mismatch names both shapes") {
        try {
            tc::matmul(a, b);
            FAIL("expected throw");
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            CHECK(msg.find("(2,3)") != std::string::npos);
        }
    }
    SUBCASE("backward requires scalar loss") {
        tc::Tensor x({2}, {1.0f, 2.0f}, true);
        CHECK_THROWS_AS(tc::backward(x), std::invalid_argument);
    }
    SUBCASE("normalize rejects tiny rows") {
        tc::Tensor z({1, 3}, {0.0f, 0.0f, 0.0f});
        CHECK_THROWS_AS(tc::l2_normalize_rows(z), std::domain_error);
    }
    SUBCASE("non-finite input is rejected") {
        tc::Tensor bad({2, 2}, {1.0f, std::numeric_limits<float>::quiet_NaN(), 0.0f, 1.0f});
        tc::Tensor ok({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
        CHECK_THROWS_AS(tc::matmul(bad, ok), std::domain_error);
        CHECK_THROWS_AS(tc::log_softmax_rows(bad), std::domain_error);
    }
    SUBCASE("shape/data size mismatch") {
        CHECK_THROWS_AS(tc::Tensor({2, 2}, {1.0f, 2.0f}), std::invalid_argument);
    }
}

}  // TEST_SUITE
