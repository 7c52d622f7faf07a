#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "wi/error.hpp"
#include "wi/losses.hpp"

using namespace wi;

namespace {

using Vec = std::vector<double>;

/// Checks every gradient component of a triplet loss against central differences.
void check_triplet_grads(const TripletLossParams& p, const Vec& a, const Vec& pos, const Vec& n) {
  const TripletLoss l = triplet_loss(a, pos, n, p);
  const std::size_t d = a.size();
  auto f = [&](const Vec& x) {
    return triplet_loss({x.data(), d}, {x.data() + d, d}, {x.data() + 2 * d, d}, p).value;
  };
  Vec x = a;
  x.insert(x.end(), pos.begin(), pos.end());
  x.insert(x.end(), n.begin(), n.end());
  for (std::size_t i = 0; i < 3 * d; ++i) {
    const double analytic = i < d ? l.grad_anchor[i] : i < 2 * d ? l.grad_positive[i - d] : l.grad_negative[i - 2 * d];
    ASSERT_LE(test::rel_err(analytic, test::central_diff(f, x, i)), 1e-4) << "component " << i;
  }
}

}  // namespace

TEST(TripletEuclidean, PointValue) {
  const TripletLoss l = triplet_euclidean(Vec{0, 0}, Vec{3, 0}, Vec{1, 0}, 1.0);
  EXPECT_EQ(l.value, 9.0);
}

TEST(TripletEuclidean, SatisfiedTripletHasZeroLossAndGradient) {
  const TripletLoss l = triplet_euclidean(Vec{0, 0}, Vec{0.1, 0}, Vec{5, 0}, 1.0);
  EXPECT_EQ(l.value, 0.0);
  for (double g : l.grad_anchor) EXPECT_EQ(g, 0.0);
}

TEST(TripletEuclidean, NonNegativeAndZeroIffSatisfied) {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 200; ++t) {
    const Vec a = test::random_vector(4, gen), p = test::random_vector(4, gen), n = test::random_vector(4, gen);
    const double v = triplet_euclidean(a, p, n, 0.5).value;
    double dp = 0, dn = 0;
    for (int i = 0; i < 4; ++i) dp += (a[i] - p[i]) * (a[i] - p[i]), dn += (a[i] - n[i]) * (a[i] - n[i]);
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v == 0.0, dp - dn + 0.5 <= 0.0);
  }
}

TEST(TripletEuclidean, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(2);
  const TripletLossParams p{1.0, TripletVariant::euclidean, 0.0};
  for (int t = 0; t < 100; ++t)
    check_triplet_grads(p, test::random_vector(8, gen), test::random_vector(8, gen), test::random_vector(8, gen));
}

TEST(TripletCosine, IdenticalUnitVectors) {
  const Vec u{0.6, 0.8};
  EXPECT_NEAR(triplet_cosine_l2(u, u, u, 0.5, 0.0).value, 0.5, 1e-12);
  EXPECT_NEAR(triplet_cosine_l2(u, u, u, 0.5, 0.1).value, 0.8, 1e-12);
}

TEST(TripletCosine, AlignedPositiveOrthogonalNegative) {
  EXPECT_EQ(triplet_cosine_l2(Vec{1, 0}, Vec{2, 0}, Vec{0, 3}, 0.2, 0.0).value, 0.0);
}

TEST(TripletCosine, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(3);
  const TripletLossParams p{0.5, TripletVariant::cosine, 0.1};
  for (int t = 0; t < 100; ++t)
    check_triplet_grads(p, test::random_vector(8, gen), test::random_vector(8, gen), test::random_vector(8, gen));
}

TEST(TripletCosine, ZeroVectorIsError) {
  EXPECT_THROW(triplet_cosine_l2(Vec{0, 0}, Vec{1, 0}, Vec{0, 1}, 0.5, 0.0), NumericError);
}

TEST(TripletLoss, MismatchAndInvalidParams) {
  EXPECT_THROW(triplet_euclidean(Vec{0, 0}, Vec{1}, Vec{0, 1}, 1.0), ConfigError);
  EXPECT_THROW((TripletLossParams{0.0, TripletVariant::euclidean, 0.0}.validate()), ConfigError);
  EXPECT_THROW((TripletLossParams{1.0, TripletVariant::cosine, -1.0}.validate()), ConfigError);
  EXPECT_EQ(triplet_variant_from_string("cosine"), TripletVariant::cosine);
  EXPECT_THROW(triplet_variant_from_string("manhattan"), ConfigError);
}

TEST(ArcFace, TwoClassPointValue) {
  const ArcFaceHead head{2, 2, {1, 0, 0, 1}, 0.0, 1.0};
  const std::vector<int> y{0};
  EXPECT_NEAR(arcface(Vec{1, 0}, y, head).value, -std::log(std::numbers::e / (std::numbers::e + 1.0)), 1e-12);
  EXPECT_NEAR(arcface(Vec{1, 0}, y, head).value, 0.31326168751822286, 1e-12);
}

TEST(ArcFace, ZeroMarginEqualsSoftmaxCrossEntropy) {
  std::mt19937_64 gen(4);
  for (int t = 0; t < 50; ++t) {
    const int classes = 3 + t % 4, dim = 5, rows = 4;
    ArcFaceHead head = init_arcface_head(classes, dim, t, 0.0, 7.5);
    const Vec f = test::random_vector(static_cast<std::size_t>(rows) * dim, gen);
    std::vector<int> y;
    for (int i = 0; i < rows; ++i) y.push_back(static_cast<int>(gen() % classes));
    double want = 0;
    for (int i = 0; i < rows; ++i) {
      std::vector<double> z(classes);
      double fn = 0;
      for (int k = 0; k < dim; ++k) fn += f[i * dim + k] * f[i * dim + k];
      for (int j = 0; j < classes; ++j) {
        double dotv = 0, wn = 0;
        for (int k = 0; k < dim; ++k) {
          dotv += f[i * dim + k] * head.weights[j * dim + k];
          wn += head.weights[j * dim + k] * head.weights[j * dim + k];
        }
        z[j] = head.scale * dotv / std::sqrt(fn * wn);
      }
      double lse = 0;
      for (double v : z) lse += std::exp(v);
      want += std::log(lse) - z[y[i]];
    }
    EXPECT_NEAR(arcface(f, y, head).value, want / rows, 1e-12);
  }
}

TEST(ArcFace, MarginNeverHelpsCorrectSample) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 50; ++t) {
    ArcFaceHead head = init_arcface_head(4, 6, 100 + t);
    Vec f(head.weights.begin(), head.weights.begin() + 6);
    const Vec jitter = test::random_vector(6, gen, 0.05);
    for (int k = 0; k < 6; ++k) f[k] += jitter[k];
    const std::vector<int> y{0};
    double prev = -1.0;
    for (int step = 0; step <= 5; ++step) {
      head.margin = 0.1 * step;
      const double v = arcface(f, y, head).value;
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(ArcFace, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(6);
  for (int t = 0; t < 100; ++t) {
    const int classes = 4, dim = 6, rows = 3;
    ArcFaceHead head = init_arcface_head(classes, dim, 1000 + t, 0.5, 8.0);
    const Vec f = test::random_vector(static_cast<std::size_t>(rows) * dim, gen);
    std::vector<int> y;
    for (int i = 0; i < rows; ++i) y.push_back(static_cast<int>(gen() % classes));
    const ArcFaceLoss l = arcface(f, y, head);
    auto by_features = [&](const Vec& x) { return arcface(x, y, head).value; };
    for (std::size_t i = 0; i < f.size(); ++i)
      ASSERT_LE(test::rel_err(l.grad_features[i], test::central_diff(by_features, f, i)), 1e-4) << t << ":" << i;
    auto by_weights = [&](const Vec& w) {
      ArcFaceHead h = head;
      h.weights = w;
      return arcface(f, y, h).value;
    };
    for (std::size_t i = 0; i < head.weights.size(); ++i)
      ASSERT_LE(test::rel_err(l.grad_weights[i], test::central_diff(by_weights, head.weights, i)), 1e-4)
          << t << ":w" << i;
  }
}

TEST(ArcFace, Errors) {
  const ArcFaceHead head{2, 2, {1, 0, 0, 1}, 0.5, 30.0};
  EXPECT_THROW(arcface(Vec{0, 0}, std::vector<int>{0}, head), NumericError);
  EXPECT_THROW(arcface(Vec{1, 0}, std::vector<int>{2}, head), DataError);
  EXPECT_THROW(arcface(Vec{1, 0, 0}, std::vector<int>{0}, head), ConfigError);
  EXPECT_THROW(init_arcface_head(1, 4, 0), ConfigError);
}
