#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fsfl/tensor.hpp"

using namespace fsfl;

TEST_CASE("shape and data sizes must agree") {
  const TensorF t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(TensorF({2, 3}, {1.0f, 2.0f}), ShapeError);
  CHECK_THROWS_AS(TensorF({0, 3}), ShapeError);
  CHECK_THROWS_AS(TensorF({-1}), ShapeError);
}

TEST_CASE("element access is row-major") {
  TensorF t({2, 3}, {0, 1, 2, 3, 4, 5});
  CHECK(t(0, 2) == 2.0f);
  CHECK(t(1, 0) == 3.0f);
  TensorF u({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(u(1, 0, 1) == 5.0f);
}

TEST_CASE("full and zeros") {
  const TensorF z = TensorF::zeros({4});
  for (float v : z.data) CHECK(v == 0.0f);
  const TensorF f = TensorF::full({2, 2}, 3.5f);
  for (float v : f.data) CHECK(v == 3.5f);
}

TEST_CASE("finiteness check") {
  TensorF t({2}, {1.0f, 2.0f});
  CHECK(t.all_finite());
  t.data[1] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(t.all_finite());
  t.data[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("shape_str names both dims") {
  CHECK(TensorF({3, 4}).shape_str() == "[3x4]");
  CHECK(TensorF({5}).shape_str() == "[5]");
}

TEST_CASE("equality is shape and bit exact") {
  const TensorF a({2}, {1.0f, 2.0f});
  CHECK(a == TensorF({2}, {1.0f, 2.0f}));
  CHECK_FALSE(a == TensorF({2}, {1.0f, 2.00001f}));
  CHECK_FALSE(a == TensorF({1, 2}, {1.0f, 2.0f}));
}
