#pragma once

// Tabular and structured outputs: per-run history, search results, the
// fine-vs-coarse comparison table, metric reports and curve plot data.

#include <string>
#include <vector>

#include "json.hpp"
#include "stgraph/checkpoint.hpp"
#include "stgraph/eval.hpp"
#include "stgraph/graph.hpp"
#include "stgraph/io.hpp"
#include "stgraph/models.hpp"
#include "stgraph/training.hpp"

namespace stgraph {

inline std::string history_table(const TrainHistory& h) {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc,train_f1,val_f1\n";
  for (const auto& e : h.epochs) {
    out += std::to_string(e.epoch) + "," + io::format_double(e.train_loss) + "," + io::format_double(e.val_loss) +
           "," + io::format_double(e.train_acc) + "," + io::format_double(e.val_acc) + "," +
           io::format_double(e.train_f1) + "," + io::format_double(e.val_f1) + "\n";
  }
  return out;
}

inline std::string results_table(const GridResult& r) {
  std::string out = "rank,grid_index,arch,hidden_dim,dropout,lr,weight_decay,epochs,seed,params,status,best_epoch,best_val_f1,error\n";
  for (std::size_t k = 0; k < r.ranked.size(); ++k) {
    const auto& run = r.ranked[k];
    const auto& c = run.config;
    out += csv::join({std::to_string(k + 1), std::to_string(run.index), to_string(c.model.arch),
                      std::to_string(c.model.hidden_dim), io::format_double(c.model.dropout), io::format_double(c.lr),
                      io::format_double(c.weight_decay), std::to_string(c.epochs), std::to_string(c.seed),
                      std::to_string(run.param_count), run.ok ? "ok" : "failed",
                      run.ok ? std::to_string(run.history->best_epoch) : "",
                      run.ok ? io::format_double(run.best_val_f1()) : "", run.error}) +
           "\n";
  }
  return out;
}

inline std::string comparison_table(const std::vector<ComparisonRow>& rows) {
  std::string out = "model,fine_best_val_f1,coarse_best_val_f1\n";
  for (const auto& r : rows)
    out += to_string(r.arch) + "," + io::format_double(r.fine_f1) + "," + io::format_double(r.coarse_f1) + "\n";
  return out;
}

enum class Split { train, val, test };

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(s) + "' (expected train|val|test)");
}

inline std::string to_string(Split s) { return s == Split::train ? "train" : s == Split::val ? "val" : "test"; }

// Evaluation-mode metrics of a checkpoint on one split of a graph.
inline MetricsReport evaluate_checkpoint(const Graph& g, const Checkpoint& ckpt, Split split) {
  if (ckpt.params.input_dim != g.feature_dim)
    throw ShapeError("checkpoint expects feature dimension " + std::to_string(ckpt.params.input_dim) +
                     " but the graph has " + std::to_string(g.feature_dim));
  const auto& mask = split == Split::train ? g.masks.train : split == Split::val ? g.masks.val : g.masks.test;
  if (mask.size() != g.num_nodes || count(mask) == 0) throw DataError("split '" + to_string(split) + "' is empty");
  const GraphContext ctx(g);
  const Matrix logits = infer_logits(from_graph_features(g), ctx, ckpt.config.model, ckpt.params);
  const auto pred = predict(logits);
  std::vector<int> yt, yp;
  std::vector<double> score;
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    if (!mask[i]) continue;
    yt.push_back(g.labels[i]);
    yp.push_back(pred.labels[i]);
    score.push_back(pred.probabilities(i, 1));
  }
  return evaluate_predictions(yt, yp, score);
}

inline nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  const auto& c = r.confusion;
  j["confusion"] = {{"tn", c.tn()}, {"fp", c.fp()}, {"fn", c.fn()}, {"tp", c.tp()}};
  j["support"] = c.total();
  j["accuracy"] = r.accuracy;
  j["weighted_f1"] = r.weighted_f1;
  j["auc"] = {{"class_0", r.roc[0].auc}, {"class_1", r.roc[1].auc}};
  j["average_precision"] = r.pr.average_precision;
  return j;
}

// Columns: class, threshold, fpr, tpr.
inline std::string roc_points_table(const MetricsReport& r) {
  std::string out = "class,threshold,fpr,tpr\n";
  for (int cls : {0, 1})
    for (const auto& p : r.roc[static_cast<std::size_t>(cls)].points)
      out += std::to_string(cls) + "," + io::format_double(p.threshold) + "," + io::format_double(p.x) + "," +
             io::format_double(p.y) + "\n";
  return out;
}

// Columns: threshold, recall, precision (positive class).
inline std::string pr_points_table(const MetricsReport& r) {
  std::string out = "threshold,recall,precision\n";
  for (const auto& p : r.pr.points)
    out += io::format_double(p.threshold) + "," + io::format_double(p.x) + "," + io::format_double(p.y) + "\n";
  return out;
}

}  // namespace stgraph
