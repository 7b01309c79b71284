#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"
#include "unetseg/tensor.hpp"

using namespace unetseg;

TEST_CASE("create fills every element") {
    const Tensor4 zeros = create({1, 1, 2, 2}, 0.0);
    CHECK(zeros.size() == 4);
    for (double v : zeros) CHECK(v == 0.0);

    const Tensor4 filled = create({1, 2, 1, 1}, 3.5);
    CHECK(filled.size() == 2);
    CHECK(filled[0] == 3.5);
    CHECK(filled[1] == 3.5);
}

TEST_CASE("create rejects zero dimensions") {
    CHECK_THROWS_AS(create({1, 0, 2, 2}, 0.0), ShapeError);
    CHECK_THROWS_AS(create({0, 1, 1, 1}, 0.0), ShapeError);
    CHECK_THROWS_AS(create({1, 1, -3, 1}, 0.0), ShapeError);
}

TEST_CASE("create rejects element-count overflow") {
    CHECK_THROWS_AS(create({1 << 30, 1 << 30, 1 << 30, 2}, 0.0), ShapeError);
}

TEST_CASE("elementwise add/sub/mul") {
    Tensor4 a({1, 1, 1, 2});
    a[0] = 1.0;
    a[1] = 2.0;
    Tensor4 b({1, 1, 1, 2});
    b[0] = 3.0;
    b[1] = 4.0;

    const Tensor4 sum = elementwise(a, b, Elementwise::add);
    CHECK(sum[0] == 4.0);
    CHECK(sum[1] == 6.0);

    const Tensor4 diff = elementwise(a, a, Elementwise::sub);
    for (double v : diff) CHECK(v == 0.0);

    Tensor4 c({1, 1, 1, 2});
    c[0] = 2.0;
    c[1] = 3.0;
    Tensor4 d({1, 1, 1, 2});
    d[0] = 0.0;
    d[1] = 5.0;
    const Tensor4 prod = elementwise(c, d, Elementwise::mul);
    CHECK(prod[0] == 0.0);
    CHECK(prod[1] == 15.0);
}

TEST_CASE("elementwise rejects shape mismatch") {
    const Tensor4 a({1, 1, 2, 2});
    const Tensor4 b({1, 2, 2, 2});
    CHECK_THROWS_AS(elementwise(a, b, Elementwise::add), ShapeError);
}

TEST_CASE("reduce_sum") {
    CHECK(reduce_sum(create({1, 1, 4, 4}, 0.0)) == 0.0);

    Tensor4 t({1, 1, 1, 4});
    t[0] = 1.0;
    t[1] = 2.0;
    t[2] = 3.0;
    t[3] = 4.0;
    CHECK(reduce_sum(t) == 10.0);

    CHECK(reduce_sum(create({2, 3, 4, 5}, 1.0)) == 120.0);
}

TEST_CASE("reduce_sum of a constant integer fill is exact") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Shape4 s{1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(6), 1 + rng.below(6)};
        const double k = static_cast<double>(rng.below(17)) - 8.0;
        CHECK(reduce_sum(create(s, k)) == k * static_cast<double>(s.elems()));
    }
}

TEST_CASE("indexing round trip") {
    Rng rng(7);
    Tensor4 t({2, 3, 4, 5});
    for (int trial = 0; trial < 100; ++trial) {
        const std::int64_t i = rng.below(2);
        const std::int64_t j = rng.below(3);
        const std::int64_t y = rng.below(4);
        const std::int64_t x = rng.below(5);
        const double v = rng.uniform(-10.0, 10.0);
        t.at(i, j, y, x) = v;
        CHECK(t.at(i, j, y, x) == v);
        CHECK(t[((i * 3 + j) * 4 + y) * 5 + x] == v);
    }
}

TEST_CASE("elementwise add commutes and associates on integer values") {
    Rng rng(13);
    const Shape4 s{1, 2, 3, 3};
    Tensor4 a(s), b(s), c(s);
    for (std::int64_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<double>(rng.below(100)) - 50.0;
        b[i] = static_cast<double>(rng.below(100)) - 50.0;
        c[i] = static_cast<double>(rng.below(100)) - 50.0;
    }
    CHECK(elementwise(a, b, Elementwise::add) == elementwise(b, a, Elementwise::add));
    CHECK(elementwise(elementwise(a, b, Elementwise::add), c, Elementwise::add) ==
          elementwise(a, elementwise(b, c, Elementwise::add), Elementwise::add));
}

TEST_CASE("reshaped preserves data and validates count") {
    Rng rng(3);
    const Tensor4 t = testutil::random_tensor(rng, {1, 2, 3, 4});
    const Tensor4 r = t.reshaped({1, 1, 1, 24});
    for (std::int64_t i = 0; i < t.size(); ++i) CHECK(r[i] == t[i]);
    CHECK_THROWS_AS(t.reshaped({1, 1, 1, 23}), ShapeError);
}
