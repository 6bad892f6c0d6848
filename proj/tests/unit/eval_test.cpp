#include <gtest/gtest.h>

#include <cmath>

#include "stgraph/eval.hpp"
#include "support/oracles.hpp"

using namespace stgraph;

namespace {

// Expands confusion counts into label/prediction vectors.
void expand(std::size_t tn, std::size_t fp, std::size_t fn, std::size_t tp, std::vector<int>& yt,
            std::vector<int>& yp) {
  auto push = [&](std::size_t k, int t, int p) {
    for (std::size_t i = 0; i < k; ++i) {
      yt.push_back(t);
      yp.push_back(p);
    }
  };
  push(tn, 0, 0);
  push(fp, 0, 1);
  push(fn, 1, 0);
  push(tp, 1, 1);
}

}  // namespace

TEST(Confusion, PaperCounts) {
  std::vector<int> yt, yp;
  expand(62, 2, 1, 68, yt, yp);
  const auto c = confusion_matrix(yt, yp);
  EXPECT_EQ(c.tn(), 62u);
  EXPECT_EQ(c.fp(), 2u);
  EXPECT_EQ(c.fn(), 1u);
  EXPECT_EQ(c.tp(), 68u);
  EXPECT_DOUBLE_EQ(c.accuracy(), 130.0 / 133.0);
  EXPECT_NEAR(c.accuracy(), 0.9774, 1e-4);
  // Per-class F1 by hand: 2*62/(2*62+1+2) and 2*68/(2*68+2+1), weighted by supports 64 and 69.
  const double expected = (64.0 * (124.0 / 127.0) + 69.0 * (136.0 / 139.0)) / 133.0;
  EXPECT_NEAR(c.weighted_f1(), expected, 1e-15);
  EXPECT_NEAR(c.weighted_f1(), 0.9774, 0.002);
}

TEST(Confusion, PerfectAndAllZero) {
  const std::vector<int> y{0, 1, 1, 0, 1, 0};
  const auto c = confusion_matrix(y, y);
  EXPECT_EQ(c.fp() + c.fn(), 0u);
  EXPECT_EQ(c.accuracy(), 1.0);
  EXPECT_EQ(c.weighted_f1(), 1.0);
  const std::vector<int> zeros(6, 0);
  const auto z = confusion_matrix(y, zeros);
  EXPECT_EQ(z.accuracy(), 0.5);
  EXPECT_NEAR(z.weighted_f1(), 1.0 / 3.0, 1e-15);
}

TEST(Confusion, ErrorCases) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(confusion_matrix(a, b), ShapeError);
  EXPECT_THROW(confusion_matrix({}, {}), DataError);
  const std::vector<int> bad{2, 0};
  EXPECT_THROW(confusion_matrix(bad, a), DataError);
}

TEST(Confusion, FlippingPredictions) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> yt(40), yp(40), flipped(40);
    for (std::size_t i = 0; i < 40; ++i) {
      yt[i] = static_cast<int>(rng.below(2));
      yp[i] = static_cast<int>(rng.below(2));
      flipped[i] = 1 - yp[i];
    }
    const auto c = confusion_matrix(yt, yp), f = confusion_matrix(yt, flipped);
    EXPECT_NEAR(f.accuracy(), 1.0 - c.accuracy(), 1e-15);
    EXPECT_EQ(f.tn(), c.fp());
    EXPECT_EQ(f.fp(), c.tn());
    EXPECT_EQ(f.fn(), c.tp());
    EXPECT_EQ(f.tp(), c.fn());
  }
}

TEST(Confusion, WeightedEqualsMacroWhenBalanced) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> yt, yp;
    for (int i = 0; i < 30; ++i) {
      yt.push_back(i % 2);
      yp.push_back(static_cast<int>(rng.below(2)));
    }
    const auto c = confusion_matrix(yt, yp);
    double macro = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      const double tp = static_cast<double>(c.counts[k][k]);
      const double denom = 2 * tp + static_cast<double>(c.counts[1 - k][k] + c.counts[k][1 - k]);
      macro += denom > 0 ? 2 * tp / denom / 2 : 0.0;
    }
    EXPECT_NEAR(c.weighted_f1(), macro, 1e-12);
  }
}

TEST(RocAuc, Examples) {
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_EQ(roc_auc(y, std::vector<double>{0.1, 0.2, 0.8, 0.9}).auc, 1.0);
  EXPECT_EQ(roc_auc(y, std::vector<double>{0.5, 0.5, 0.5, 0.5}).auc, 0.5);
  EXPECT_THROW(roc_auc(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), DataError);
}

TEST(RocAuc, MatchesPairCounting) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> y(50);
    std::vector<double> s(50);
    for (std::size_t i = 0; i < 50; ++i) {
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2));
      // Coarse grid of scores so ties happen.
      s[i] = static_cast<double>(rng.below(12)) / 11.0;
    }
    EXPECT_NEAR(roc_auc(y, s).auc, oracle::auc_pair_counting(y, s), 1e-12);
  }
}

TEST(RocAuc, CurveShapeAndMonotoneInvariance) {
  Rng rng(6);
  std::vector<int> y(60);
  std::vector<double> s(60);
  for (std::size_t i = 0; i < 60; ++i) {
    y[i] = static_cast<int>(i % 2);
    s[i] = rng.uniform();
  }
  const auto roc = roc_auc(y, s);
  EXPECT_EQ(roc.points.front().x, 0.0);
  EXPECT_EQ(roc.points.front().y, 0.0);
  EXPECT_EQ(roc.points.back().x, 1.0);
  EXPECT_EQ(roc.points.back().y, 1.0);
  for (std::size_t k = 1; k < roc.points.size(); ++k) {
    EXPECT_GE(roc.points[k].x, roc.points[k - 1].x);
    EXPECT_GE(roc.points[k].y, roc.points[k - 1].y);
  }
  std::vector<double> t(60);
  for (std::size_t i = 0; i < 60; ++i) t[i] = std::exp(3 * s[i]) - 7;
  EXPECT_EQ(roc_auc(y, t).auc, roc.auc);
}

TEST(PrAp, Examples) {
  const std::vector<int> y{0, 1, 0, 1, 1};
  EXPECT_EQ(pr_ap(y, std::vector<double>{0.1, 0.9, 0.2, 0.8, 0.7}).average_precision, 1.0);
  EXPECT_NEAR(pr_ap(y, std::vector<double>(5, 0.3)).average_precision, 0.6, 1e-15);
  EXPECT_THROW(pr_ap(std::vector<int>{0, 0}, std::vector<double>{0.1, 0.2}), DataError);
}

TEST(PrAp, MatchesBruteForce) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> y(10);
    std::vector<double> s(10);
    for (std::size_t i = 0; i < 10; ++i) {
      y[i] = i == 0 ? 1 : static_cast<int>(rng.below(2));
      s[i] = static_cast<double>(rng.below(6)) / 5.0;
    }
    EXPECT_NEAR(pr_ap(y, s).average_precision, oracle::ap_bruteforce(y, s), 1e-12);
  }
}

TEST(EvaluatePredictions, ClassZeroCurveMirrorsClassOne) {
  Rng rng(8);
  std::vector<int> y(40), yp(40);
  std::vector<double> s(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = static_cast<int>(i % 2);
    s[i] = rng.uniform();
    yp[i] = s[i] > 0.5;
  }
  const auto r = evaluate_predictions(y, yp, s);
  EXPECT_NEAR(r.roc[0].auc, r.roc[1].auc, 1e-12);
  EXPECT_EQ(r.accuracy, confusion_matrix(y, yp).accuracy());
  EXPECT_GT(r.pr.average_precision, 0.0);
}
