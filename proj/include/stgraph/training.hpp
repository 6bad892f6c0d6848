#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "stgraph/autodiff.hpp"
#include "stgraph/eval.hpp"
#include "stgraph/graph.hpp"
#include "stgraph/io.hpp"
#include "stgraph/models.hpp"
#include "stgraph/random.hpp"

namespace stgraph {

struct TrainConfig {
  ModelConfig model{};
  double lr = 0.05;
  double weight_decay = 0.005;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    model.validate();
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be a non-negative number");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be non-negative");
    if (epochs == 0) throw ConfigError("epochs must be positive");
  }

  // Canonical text of every hyperparameter except the seed.
  std::string key() const {
    return "arch=" + to_string(model.arch) + ";hidden=" + std::to_string(model.hidden_dim) +
           ";blocks=" + std::to_string(model.num_blocks) + ";dropout=" + io::format_double(model.dropout) +
           ";kt=" + std::to_string(model.temporal_kernel) + ";lr=" + io::format_double(lr) +
           ";wd=" + io::format_double(weight_decay) + ";epochs=" + std::to_string(epochs);
  }
};

inline std::uint64_t derive_run_seed(std::uint64_t master_seed, std::string_view key) {
  return mix_seed(master_seed, fnv1a64(key));
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double train_f1 = 0.0;
  double val_f1 = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  ModelParams best_params;

  double best_val_f1() const { return epochs.at(best_epoch).val_f1; }
};

struct SplitMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

// Loss/accuracy/weighted F1 of evaluation logits restricted to `mask`.
inline SplitMetrics split_metrics(const Matrix& logits, std::span<const int> labels,
                                  std::span<const std::uint8_t> mask) {
  SplitMetrics m;
  m.loss = softmax_xent(logits, labels, mask).loss;
  const auto pred = predict(logits);
  std::vector<int> yt, yp;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    yt.push_back(labels[i]);
    yp.push_back(pred.labels[i]);
  }
  const auto c = confusion_matrix(yt, yp);
  m.accuracy = c.accuracy();
  m.f1 = c.weighted_f1();
  return m;
}

// Full-batch training for a fixed number of epochs, keeping the parameters
// of the best validation-F1 epoch (earliest on ties). Test labels are
// masked out before any computation.
inline TrainHistory train(const Graph& g, const TrainConfig& cfg) {
  cfg.validate();
  const auto n = g.num_nodes;
  if (g.masks.train.size() != n || g.masks.val.size() != n || g.masks.test.size() != n)
    throw DataError("graph has no train/val/test masks");
  if (count(g.masks.train) == 0 || count(g.masks.val) == 0) throw DataError("train and val masks must be non-empty");

  std::vector<int> labels(g.labels);
  for (std::size_t i = 0; i < n; ++i)
    if (g.masks.test[i]) labels[i] = 0;

  const GraphContext ctx(g);
  const Matrix features = from_graph_features(g);
  TrainHistory hist;
  hist.config = cfg;
  ModelParams params = init_params(cfg.model, g.feature_dim, cfg.seed);
  AdamState adam;
  double best = -1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    {
      Tape t;
      BoundParams bp(t, params);
      Var x = t.leaf(features);
      const ForwardOptions opt{true, mix_seed(cfg.seed, 0x1000 + epoch)};
      Var logits = forward(t, x, ctx, cfg.model, params, bp, opt);
      Var loss = ad::softmax_xent(t, logits, labels, g.masks.train);
      const double lv = t.value(loss)(0, 0);
      if (!std::isfinite(lv))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + " (" + cfg.key() + ")");
      t.backward(loss);
      std::vector<Matrix> grads;
      std::vector<Matrix> values;
      for (std::size_t k = 0; k < params.entries.size(); ++k) {
        grads.push_back(t.grad(bp.vars()[k]));
        values.push_back(std::move(params.entries[k].value));
      }
      adam_step(values, grads, adam, cfg.lr, cfg.weight_decay);
      for (std::size_t k = 0; k < params.entries.size(); ++k) params.entries[k].value = std::move(values[k]);
    }

    const Matrix logits = infer_logits(features, ctx, cfg.model, params);
    const auto tr = split_metrics(logits, labels, g.masks.train);
    const auto va = split_metrics(logits, labels, g.masks.val);
    if (!std::isfinite(tr.loss))
      throw NumericError("non-finite evaluation loss at epoch " + std::to_string(epoch) + " (" + cfg.key() + ")");
    hist.epochs.push_back({epoch, tr.loss, va.loss, tr.accuracy, va.accuracy, tr.f1, va.f1});
    if (va.f1 > best) {
      best = va.f1;
      hist.best_epoch = epoch;
      hist.best_params = params;
    }
  }
  return hist;
}

struct GridSpec {
  std::vector<std::size_t> hidden_dims{32, 64};
  std::vector<double> dropouts{0.3, 0.4};
  std::vector<double> lrs{0.10, 0.07, 0.04, 0.001};
  std::vector<double> weight_decays{5e-3, 5e-4, 5e-5};
  std::size_t epochs = 30;
  ModelConfig base{};  // architecture, depth and kernel shared by every run

  std::vector<TrainConfig> expand() const {
    std::vector<TrainConfig> out;
    for (auto h : hidden_dims)
      for (auto d : dropouts)
        for (auto lr : lrs)
          for (auto wd : weight_decays) {
            TrainConfig c;
            c.model = base;
            c.model.hidden_dim = h;
            c.model.dropout = d;
            c.lr = lr;
            c.weight_decay = wd;
            c.epochs = epochs;
            out.push_back(c);
          }
    return out;
  }
};

struct GridRun {
  std::size_t index = 0;  // position in grid expansion order
  TrainConfig config;
  bool ok = false;
  std::string error;
  std::size_t param_count = 0;
  std::optional<TrainHistory> history;

  double best_val_f1() const { return ok ? history->best_val_f1() : -1.0; }
};

struct GridResult {
  std::vector<GridRun> ranked;

  const GridRun& best() const {
    if (ranked.empty() || !ranked.front().ok) throw NumericError("grid search produced no successful run");
    return ranked.front();
  }
};

// Runs `configs` across `workers` threads and ranks them: best validation F1
// descending, then fewer parameters, then grid order. Failed runs sink to
// the bottom and do not stop the search.
inline GridResult run_configs(const Graph& g, std::vector<TrainConfig> configs, std::uint64_t master_seed,
                              std::size_t workers = 1) {
  if (configs.empty()) throw ConfigError("grid is empty");
  std::vector<GridRun> runs(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    runs[i].index = i;
    runs[i].config = configs[i];
    runs[i].config.seed = derive_run_seed(master_seed, configs[i].key());
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < runs.size();) {
      auto& r = runs[i];
      try {
        r.param_count = parameter_count(r.config.model, g.feature_dim);
        r.history = train(g, r.config);
        r.ok = true;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, runs.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  std::stable_sort(runs.begin(), runs.end(), [](const GridRun& a, const GridRun& b) {
    if (a.ok != b.ok) return a.ok;
    if (a.best_val_f1() != b.best_val_f1()) return a.best_val_f1() > b.best_val_f1();
    if (a.param_count != b.param_count) return a.param_count < b.param_count;
    return a.index < b.index;
  });
  return {std::move(runs)};
}

inline GridResult grid_search(const Graph& g, const GridSpec& spec, std::uint64_t master_seed,
                              std::size_t workers = 1) {
  return run_configs(g, spec.expand(), master_seed, workers);
}

struct ComparisonRow {
  Arch arch = Arch::gcn;
  double fine_f1 = 0.0;
  double coarse_f1 = 0.0;
  std::optional<TrainHistory> fine;
  std::optional<TrainHistory> coarse;
};

// Trains each architecture on both graphs with shared hyperparameters and
// reports best validation F1 per graph.
inline std::vector<ComparisonRow> compare_models(const Graph& fine, const Graph& coarse, std::span<const Arch> archs,
                                                 const TrainConfig& base, std::uint64_t master_seed) {
  if (fine.meta.mode != GraphMode::fine || coarse.meta.mode != GraphMode::coarse)
    throw DataError("compare expects a fine graph and a coarse graph");
  std::vector<ComparisonRow> rows;
  for (auto arch : archs) {
    TrainConfig cfg = base;
    cfg.model.arch = arch;
    ComparisonRow row;
    row.arch = arch;
    cfg.seed = derive_run_seed(master_seed, "fine;" + cfg.key());
    row.fine = train(fine, cfg);
    cfg.seed = derive_run_seed(master_seed, "coarse;" + cfg.key());
    row.coarse = train(coarse, cfg);
    row.fine_f1 = row.fine->best_val_f1();
    row.coarse_f1 = row.coarse->best_val_f1();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace stgraph
