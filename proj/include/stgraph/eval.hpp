#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "stgraph/error.hpp"

namespace stgraph {

// counts[true][predicted]
struct Confusion {
  std::array<std::array<std::size_t, 2>, 2> counts{};

  std::size_t tn() const { return counts[0][0]; }
  std::size_t fp() const { return counts[0][1]; }
  std::size_t fn() const { return counts[1][0]; }
  std::size_t tp() const { return counts[1][1]; }
  std::size_t total() const { return tn() + fp() + fn() + tp(); }

  double accuracy() const {
    if (total() == 0) throw DataError("accuracy of an empty evaluation set");
    return static_cast<double>(tn() + tp()) / static_cast<double>(total());
  }

  // Per-class F1 weighted by class support; a class with precision+recall
  // of zero contributes F1 = 0.
  double weighted_f1() const {
    if (total() == 0) throw DataError("F1 of an empty evaluation set");
    double acc = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      const double tp_c = static_cast<double>(counts[c][c]);
      const double fp_c = static_cast<double>(counts[1 - c][c]);
      const double fn_c = static_cast<double>(counts[c][1 - c]);
      const double denom = 2.0 * tp_c + fp_c + fn_c;
      const double f1 = denom > 0.0 ? 2.0 * tp_c / denom : 0.0;
      acc += f1 * (tp_c + fn_c);
    }
    return acc / static_cast<double>(total());
  }

  static Confusion from_counts(std::size_t tn, std::size_t fp, std::size_t fn, std::size_t tp) {
    Confusion c;
    c.counts = {{{tn, fp}, {fn, tp}}};
    return c;
  }
};

inline Confusion confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw ShapeError("y_true and y_pred lengths differ");
  if (y_true.empty()) throw DataError("empty evaluation set");
  Confusion c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) throw DataError("labels must be 0 or 1");
    ++c.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return c;
}

inline double accuracy(std::span<const int> y_true, std::span<const int> y_pred) {
  return confusion_matrix(y_true, y_pred).accuracy();
}

inline double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred) {
  return confusion_matrix(y_true, y_pred).weighted_f1();
}

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<CurvePoint> points;  // (fpr, tpr), from (0,0) to (1,1)
  double auc = 0.0;
};

struct PrCurve {
  std::vector<CurvePoint> points;  // (recall, precision), one per distinct score
  double average_precision = 0.0;
};

namespace detail {

struct SweepStep {
  double threshold;
  std::size_t tp;  // cumulative positives scoring >= threshold
  std::size_t fp;
};

// Cumulative counts at each distinct score, descending; ties share a step.
inline std::vector<SweepStep> sweep(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) throw ShapeError("labels and scores lengths differ");
  if (y_true.empty()) throw DataError("empty evaluation set");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<SweepStep> steps;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = order[k];
    if (y_true[i] != 0 && y_true[i] != 1) throw DataError("labels must be 0 or 1");
    (y_true[i] ? tp : fp) += 1;
    if (k + 1 == order.size() || scores[order[k + 1]] != scores[i]) steps.push_back({scores[i], tp, fp});
  }
  return steps;
}

}  // namespace detail

// Threshold sweep over distinct scores with a trapezoidal area.
inline RocCurve roc_auc(std::span<const int> y_true, std::span<const double> scores) {
  const auto steps = detail::sweep(y_true, scores);
  const double pos = static_cast<double>(steps.back().tp), neg = static_cast<double>(steps.back().fp);
  if (pos == 0 || neg == 0) throw DataError("AUC is undefined when only one class is present");
  RocCurve roc;
  roc.points.push_back({0.0, 0.0, INFINITY});
  for (const auto& s : steps) {
    const CurvePoint p{static_cast<double>(s.fp) / neg, static_cast<double>(s.tp) / pos, s.threshold};
    const auto& prev = roc.points.back();
    roc.auc += (p.x - prev.x) * (p.y + prev.y) / 2.0;
    roc.points.push_back(p);
  }
  return roc;
}

// Step-interpolated AP: sum over thresholds of (R_n - R_{n-1}) * P_n.
inline PrCurve pr_ap(std::span<const int> y_true, std::span<const double> scores) {
  const auto steps = detail::sweep(y_true, scores);
  const double pos = static_cast<double>(steps.back().tp);
  if (pos == 0) throw DataError("average precision is undefined without positive examples");
  PrCurve pr;
  double prev_recall = 0.0;
  for (const auto& s : steps) {
    const double recall = static_cast<double>(s.tp) / pos;
    const double precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
    pr.average_precision += (recall - prev_recall) * precision;
    prev_recall = recall;
    pr.points.push_back({recall, precision, s.threshold});
  }
  return pr;
}

struct MetricsReport {
  Confusion confusion;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::array<RocCurve, 2> roc;  // per class; class 0 scored by 1 - p
  PrCurve pr;                   // positive class
};

// positive_scores: probability of class 1 per sample.
inline MetricsReport evaluate_predictions(std::span<const int> y_true, std::span<const int> y_pred,
                                          std::span<const double> positive_scores) {
  MetricsReport r;
  r.confusion = confusion_matrix(y_true, y_pred);
  r.accuracy = r.confusion.accuracy();
  r.weighted_f1 = r.confusion.weighted_f1();
  r.roc[1] = roc_auc(y_true, positive_scores);
  std::vector<int> flipped(y_true.size());
  std::vector<double> neg_scores(positive_scores.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    flipped[i] = 1 - y_true[i];
    neg_scores[i] = 1.0 - positive_scores[i];
  }
  r.roc[0] = roc_auc(flipped, neg_scores);
  r.pr = pr_ap(y_true, positive_scores);
  return r;
}

}  // namespace stgraph
