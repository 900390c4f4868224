#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace selectkit;
using namespace selectkit::oracle;

TEST_CASE("exhaustive facility location on explicit kernels") {
    for (std::size_t n : {3, 6, 9}) {
        std::vector<double> eye(n * n, 0.0), ones(n * n, 1.0);
        for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
        const auto e = exhaustive_fl_opt(sktest::explicit_kernel(n, eye), 2);
        CHECK(e.value == 2.0);
        CHECK(e.set == std::vector<std::size_t>{0, 1});
        CHECK(exhaustive_fl_opt(sktest::explicit_kernel(n, ones), 1).value == static_cast<double>(n));
        CHECK(exhaustive_fl_opt(sktest::explicit_kernel(n, ones), 3).value == static_cast<double>(n));
    }
    const auto w = sktest::explicit_kernel(3, {1, .5, .1, .5, 1, .2, .1, .2, 1});
    const auto best = exhaustive_fl_opt(w, 1);
    CHECK(best.set == std::vector<std::size_t>{1});
    CHECK(best.value == doctest::Approx(1.7));
    const std::vector<std::size_t> s{0};
    CHECK(fl_value(w, s) == doctest::Approx(1.6));
    CHECK(fl_value(w, {}) == 0.0);
}

TEST_CASE("exhaustive mixture") {
    const auto w = sktest::explicit_kernel(2, {1, 0, 0, 1});
    const std::vector<double> u{0.0, 1.0};
    const auto best = exhaustive_mixture_opt(w, u, 1);
    CHECK(best.set == std::vector<std::size_t>{1});
    CHECK(best.value == doctest::Approx(1.0 + std::log(2.0)));
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS(exhaustive_mixture_opt(w, bad, 1), Error);
}

TEST_CASE("exhaustive k-center") {
    const auto two = sktest::from_rows({{0}, {10}});
    CHECK(exhaustive_kcenter_opt(two, 2).value == 0.0);
    const auto three = sktest::from_rows({{0}, {1}, {2}});
    const auto c = exhaustive_kcenter_opt(three, 1);
    CHECK(c.set == std::vector<std::size_t>{1});
    CHECK(c.value == 1.0);
    const auto pts = sktest::from_rows({{0, 0}, {3, 4}});
    const std::vector<std::size_t> s{0};
    CHECK(covering_radius(pts, s) == 5.0);
}

TEST_CASE("exhaustive top-k") {
    const std::vector<double> s1{-0.1, -0.5, -0.3};
    CHECK(exhaustive_topk(s1, 2).set == std::vector<std::size_t>{0, 2});
    CHECK(exhaustive_topk(s1, 2).value == -0.3);
    const std::vector<double> eq(4, 1.0);
    CHECK(exhaustive_topk(eq, 2).set == std::vector<std::size_t>{0, 1});
    // {1, 2} also attains min 5, but {1, 3} is the better profile.
    const std::vector<double> tie{1, 5, 5, 9};
    CHECK(exhaustive_topk(tie, 2).set == std::vector<std::size_t>{1, 3});
    CHECK(exhaustive_topk(tie, 3).set == std::vector<std::size_t>{1, 2, 3});
}

TEST_CASE("enumeration bounds fail fast") {
    const std::size_t n = kMaxSubsetN + 1;
    const auto big = sktest::explicit_kernel(n, std::vector<double>(n * n, 1.0));
    try {
        exhaustive_fl_opt(big, 2);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InstanceTooLarge);
    }
    const auto ok = sktest::explicit_kernel(8, std::vector<double>(64, 1.0));
    CHECK_THROWS_AS(exhaustive_fl_opt(ok, kMaxSubsetK + 1), Error);
    CHECK_THROWS_AS(exhaustive_kcenter_opt(sktest::gaussian(kMaxSubsetN + 1, 2, 1), 2), Error);
    const std::vector<double> scores(kMaxTopkN + 1, 0.0);
    CHECK_THROWS_AS(exhaustive_topk(scores, 2), Error);
}

TEST_CASE("naive kernels") {
    const auto pts = sktest::from_rows({{0, 0}, {3, 4}});
    const auto d = naive_sq_distances(pts);
    CHECK(d(0, 1) == 25.0);
    CHECK(d(1, 1) == 0.0);
    const auto w = naive_kernel(pts, KernelSpec::rbf(25.0));
    CHECK(w(0, 1) == doctest::Approx(std::exp(-1.0)));
    CHECK_THROWS_AS(naive_kernel(pts, KernelSpec::clipped_cosine()), Error);
}
