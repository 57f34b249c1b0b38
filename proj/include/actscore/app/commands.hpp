#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "actscore/app/config.hpp"
#include "actscore/app/experiment.hpp"
#include "actscore/binary_io.hpp"
#include "actscore/data/dataset.hpp"
#include "actscore/data/trace_io.hpp"
#include "actscore/nn/checkpoint.hpp"
#include "actscore/nn/trainer.hpp"
#include "actscore/scoring/profile.hpp"
#include "actscore/ssl/pipeline.hpp"
#include "actscore/stats/bins.hpp"
#include "actscore/stats/bootstrap.hpp"

namespace actscore::app {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"generate-data", "train",     "score",    "select",
                                              "ssl-run",       "bootstrap", "assemble", "report"};
  return names;
}

/// Shared state of one command invocation.
class Workspace {
 public:
  explicit Workspace(RunConfig cfg) : cfg_(std::move(cfg)) {
    std::filesystem::create_directories(out());
  }

  const RunConfig& config() const noexcept { return cfg_; }
  std::filesystem::path out() const { return cfg_.out_dir; }
  std::filesystem::path in() const { return cfg_.data_dir.empty() ? out() : std::filesystem::path(cfg_.data_dir); }
  std::filesystem::path checkpoint() const {
    return cfg_.checkpoint.empty() ? in() / "model.amd" : std::filesystem::path(cfg_.checkpoint);
  }
  std::uint64_t seed() const { return cfg_.seeds.front(); }

  data::Dataset split(const std::string& name) const { return data::load_dataset(in() / (name + ".tds")); }

  void write(const std::string& name, std::string_view text) {
    io::write_text(out() / name, text);
    outputs_.push_back(name);
  }
  void write_model(const std::string& name, const nn::Model& model) {
    nn::save_checkpoint(model, out() / name);
    outputs_.push_back(name);
  }
  void write_dataset(const std::string& name, const data::Dataset& ds) {
    data::save_dataset(ds, out() / name);
    outputs_.push_back(name);
  }

  /// effective_config.txt and manifest-<command>.json
  void finish(const std::string& command) {
    const std::string text = effective_config_text(cfg_);
    io::write_text(out() / "effective_config.txt", text);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    nlohmann::ordered_json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["config_hash"] = hash;
    m["seeds"] = cfg_.seeds;
    m["formats"] = {{"dataset", "TDS1"}, {"trace", "ATR1"}, {"checkpoint", "AMD1"}};
    m["outputs"] = outputs_;
    io::write_text(out() / ("manifest-" + command + ".json"), m.dump(2) + "\n");
  }

 private:
  RunConfig cfg_;
  std::vector<std::string> outputs_;
};

namespace detail {

inline nn::TrainOptions train_options(const RunConfig& c, std::uint64_t seed) {
  return {c.batch_size, c.learning_rate, seed};
}

inline std::string metrics_header(std::size_t classes) {
  std::string h = "epoch,phase,train_size,train_loss,test_accuracy";
  for (std::size_t c = 0; c < classes; ++c) h += ",acc_" + std::to_string(c);
  return h + ",selected,selected_correct\n";
}

inline std::string metrics_line(const nn::EpochMetrics& m, const char* phase, std::size_t classes,
                                std::optional<std::size_t> selected = {},
                                std::optional<std::size_t> correct = {}) {
  std::string s = std::to_string(m.epoch) + "," + phase + "," + std::to_string(m.train_size) + "," +
                  shortest(m.train_loss) + ",";
  if (m.test) s += shortest(m.test->accuracy);
  for (std::size_t c = 0; c < classes; ++c) {
    s += ",";
    if (m.test && !std::isnan(m.test->class_accuracy[c])) s += shortest(m.test->class_accuracy[c]);
  }
  s += "," + (selected ? std::to_string(*selected) : std::string()) + "," +
       (correct ? std::to_string(*correct) : std::string());
  return s + "\n";
}

inline std::string selection_csv(std::span<const ssl::SelectionLogEntry> log) {
  std::string s = "epoch,class,mode,pool_size,quota,selected_ids\n";
  for (const auto& e : log) {
    s += std::to_string(e.epoch) + "," + std::to_string(e.class_id) + "," + ssl::mode_name(e.mode) + "," +
         std::to_string(e.pool_size) + "," + std::to_string(e.quota) + ",";
    for (std::size_t i = 0; i < e.selected_ids.size(); ++i) {
      if (i) s += ";";
      s += std::to_string(e.selected_ids[i]);
    }
    s += "\n";
  }
  return s;
}

inline ssl::SslData load_ssl_data(const Workspace& ws) {
  return ssl::SslData::from(ws.split("train"), ws.split("additional"), ws.split("test"));
}

inline void check_classes(const RunConfig& c, const data::Dataset& ds) {
  if (ds.num_classes != c.num_classes)
    throw ArgumentError("dataset has " + std::to_string(ds.num_classes) + " classes but num_classes=" +
                        std::to_string(c.num_classes));
}

/// Per-class profiles from the labeled split, then every image scored under
/// the profile of its predicted class.
inline std::vector<scoring::ScoredImage> score_by_prediction(const nn::Model& model, const nn::LabeledImages& train,
                                                             std::span<const std::uint64_t> train_ids,
                                                             std::span<const Tensor> images,
                                                             std::span<const std::uint64_t> ids,
                                                             const scoring::ScoreConfig& config) {
  const std::size_t classes = nn::num_classes(model);
  std::vector<std::optional<scoring::ClassActivationProfile>> profiles(classes);
  for (std::size_t c = 0; c < classes; ++c)
    if (std::find(train.labels.begin(), train.labels.end(), c) != train.labels.end())
      profiles[c] = ssl::labeled_profile(model, train, train_ids, c, config);
  std::vector<scoring::ScoredImage> out(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    const auto fr = nn::forward_with_trace(model, images[i], ids[i]);
    const std::size_t label = nn::argmax(fr.probs.values());
    if (!profiles[label])
      throw ArgumentError("no labeled images of predicted class " + std::to_string(label) + " to build a profile");
    out[i] = {ids[i], label, scoring::score_image(fr.trace, *profiles[label]).score};
  });
  return out;
}

inline int cmd_generate(Workspace& ws) {
  const auto& c = ws.config();
  const auto ds = data::generate_synthetic(c.num_classes, c.per_class, c.height, c.width, c.noise, ws.seed());
  const auto sp = data::split_dataset(ds, {c.split_train, c.split_additional, c.split_test, ws.seed()});
  ws.write_dataset("train.tds", sp.train);
  ws.write_dataset("additional.tds", sp.additional);
  ws.write_dataset("test.tds", sp.test);
  std::string s = "split,images\n";
  s += "train," + std::to_string(sp.train.size()) + "\nadditional," + std::to_string(sp.additional.size()) +
       "\ntest," + std::to_string(sp.test.size()) + "\n";
  ws.write("splits.csv", s);
  return 0;
}

inline int cmd_train(Workspace& ws) {
  const auto& c = ws.config();
  const auto train_ds = ws.split("train");
  check_classes(c, train_ds);
  const auto train = data::labeled_images(train_ds);
  const auto test_ds = ws.split("test");
  const auto test = data::labeled_images(test_ds);
  auto model = nn::make_default_model({train_ds.channels, train_ds.height, train_ds.width},
                                      c.num_classes, ws.seed(), c.arch);
  auto fit = nn::fit(std::move(model), train, c.pretrain_epochs, train_options(c, ws.seed()),
                     test.empty() ? nullptr : &test);
  std::string csv = metrics_header(c.num_classes);
  for (const auto& m : fit.metrics) csv += metrics_line(m, "pretrain", c.num_classes);
  ws.write("train_metrics.csv", csv);
  ws.write_model("model.amd", fit.model);
  return 0;
}

inline int cmd_score(Workspace& ws) {
  const auto& c = ws.config();
  const auto model = nn::load_checkpoint(ws.checkpoint());
  const auto train_ds = ws.split("train");
  const auto add_ds = ws.split("additional");
  const auto train = data::labeled_images(train_ds);
  const auto images = data::image_tensors(add_ds);
  const auto rows = score_by_prediction(model, train, train_ds.ids, images, add_ds.ids, c.score);
  ws.write("scores.csv", scoring::score_csv(rows));
  return 0;
}

inline int cmd_select(Workspace& ws) {
  const auto& c = ws.config();
  const auto model = nn::load_checkpoint(ws.checkpoint());
  const auto data = load_ssl_data(ws);
  const auto policy = c.policy();
  ssl::validate_policy(policy, nn::num_classes(model));
  const auto round = ssl::select_round(model, data, policy, c.score, 0);
  ws.write("selection.csv", selection_csv(round.log));
  return 0;
}

inline int cmd_ssl_run(Workspace& ws) {
  const auto& c = ws.config();
  const auto data = load_ssl_data(ws);
  const Shape input = data.train.images.front().shape();
  const auto policy = c.policy();
  nn::Trainer trainer(nn::make_default_model(input, c.num_classes, ws.seed(), c.arch), train_options(c, ws.seed()));
  ssl::validate_policy(policy, c.num_classes);
  std::string csv = metrics_header(c.num_classes);
  for (std::size_t e = 0; e < c.pretrain_epochs; ++e)
    csv += metrics_line(trainer.train_epoch(data.train, data.test.empty() ? nullptr : &data.test), "pretrain", c.num_classes);
  if (c.ssl_learning_rate) trainer.set_learning_rate(*c.ssl_learning_rate);
  const auto r = ssl::ssl_continue(std::move(trainer), data, policy, c.ssl_epochs, c.score);
  for (const auto& e : r.epochs) csv += metrics_line(e.metrics, "ssl", c.num_classes, e.selected, e.selected_correct);
  ws.write("metrics.csv", csv);
  ws.write("selection_log.csv", selection_csv(r.selections));
  ws.write_model("model-ssl.amd", r.model);
  return 0;
}

inline ExperimentSettings experiment_settings(const RunConfig& c) {
  ExperimentSettings s;
  s.arch = c.arch;
  s.batch_size = c.batch_size;
  s.learning_rate = c.learning_rate;
  s.ssl_learning_rate = c.ssl_learning_rate;
  s.pretrain_epochs = c.pretrain_epochs;
  s.ssl_epochs = c.ssl_epochs;
  s.alpha = c.alpha();
  s.update_interval = c.update_interval;
  s.scope = c.scope;
  s.score = c.score;
  s.bootstrap_resamples = c.bootstrap_resamples;
  s.last_k = c.bootstrap_last_k;
  return s;
}

inline std::string regime_csv(const ClassComparison& ex, std::size_t classes) {
  std::string s = "regime,class," + metrics_header(classes);
  auto add = [&](const std::string& regime, const std::string& cls, const RegimeRun& r) {
    for (const auto& e : r.epochs)
      s += regime + "," + cls + "," + metrics_line(e.metrics, "ssl", classes, e.selected, e.selected_correct);
  };
  add("baseline", "", ex.baseline);
  for (std::size_t c = 0; c < classes; ++c) {
    add("score", std::to_string(c), ex.score_specialists[c]);
    add("softmax", std::to_string(c), ex.softmax_specialists[c]);
  }
  return s;
}

/// The class-by-class comparison for every configured seed. Each seed uses
/// its own generated dataset.
inline int cmd_bootstrap(Workspace& ws) {
  const auto& c = ws.config();
  const auto settings = experiment_settings(c);
  std::string summary = "seed,class,baseline,train,diff_tb,p_tb,softmax,diff_sb,p_sb,diff_ts\n";
  for (auto seed : c.seeds) {
    const auto ds = data::generate_synthetic(c.num_classes, c.per_class, c.height, c.width, c.noise, seed);
    const auto sp = data::split_dataset(ds, {c.split_train, c.split_additional, c.split_test, seed});
    const auto data = ssl::SslData::from(sp.train, sp.additional, sp.test);
    const auto ex = run_class_comparison(data, c.num_classes, settings, seed);
    const std::string tag = "seed" + std::to_string(seed);
    ws.write("significance-" + tag + ".csv", stats::significance_csv(ex.rows));
    ws.write("regimes-" + tag + ".csv", regime_csv(ex, c.num_classes));
    for (const auto& row : ex.rows) summary += std::to_string(seed) + "," + stats::significance_line(row) + "\n";
    ws.write_model("baseline-" + tag + ".amd", ex.baseline.model);
    for (std::size_t k = 0; k < c.num_classes; ++k)
      ws.write_model("specialist-" + tag + "-" + std::to_string(k) + ".amd", ex.score_specialists[k].model);
  }
  ws.write("significance.csv", summary);
  return 0;
}

/// Combines the score-mode specialists written by `bootstrap` and compares
/// the ensemble with the baseline on each seed's test split.
inline int cmd_assemble(Workspace& ws) {
  const auto& c = ws.config();
  std::string summary = "seed,assembled_accuracy,baseline_accuracy\n";
  std::string labels = "seed,image_id,label,assembled,baseline\n";
  for (auto seed : c.seeds) {
    const auto ds = data::generate_synthetic(c.num_classes, c.per_class, c.height, c.width, c.noise, seed);
    const auto sp = data::split_dataset(ds, {c.split_train, c.split_additional, c.split_test, seed});
    const auto train = data::labeled_images(sp.train);
    const auto test = data::labeled_images(sp.test);
    const std::string tag = "seed" + std::to_string(seed);
    ssl::Ensemble ens;
    for (std::size_t k = 0; k < c.num_classes; ++k) {
      auto model = nn::load_checkpoint(ws.in() / ("specialist-" + tag + "-" + std::to_string(k) + ".amd"));
      auto profile = ssl::labeled_profile(model, train, sp.train.ids, k, c.score);
      ens.members.push_back({k, std::move(model), std::move(profile)});
    }
    const auto baseline = nn::load_checkpoint(ws.in() / ("baseline-" + tag + ".amd"));
    const auto assembled = ssl::assemble(ens, test.images);
    const auto base = nn::predict_batch(baseline, test.images);
    std::vector<std::size_t> base_labels;
    for (std::size_t i = 0; i < base.size(); ++i) {
      base_labels.push_back(base[i].label);
      labels += std::to_string(seed) + "," + std::to_string(sp.test.ids[i]) + "," + std::to_string(test.labels[i]) +
                "," + std::to_string(assembled[i]) + "," + std::to_string(base[i].label) + "\n";
    }
    summary += std::to_string(seed) + "," + stats::fixed(accuracy_of(assembled, test.labels), 6) + "," +
               stats::fixed(accuracy_of(base_labels, test.labels), 6) + "\n";
  }
  ws.write("assembly.csv", labels);
  ws.write("assembly_summary.csv", summary);
  return 0;
}

/// Score-interval report of the trained model over train and test images,
/// each scored under its predicted class profile.
inline int cmd_report(Workspace& ws) {
  const auto& c = ws.config();
  const auto model = nn::load_checkpoint(ws.checkpoint());
  const auto train_ds = ws.split("train");
  const auto test_ds = ws.split("test");
  const auto train = data::labeled_images(train_ds);
  const auto test = data::labeled_images(test_ds);
  std::vector<double> scores;
  std::vector<bool> correct;
  std::vector<stats::SplitTag> tags;
  auto add = [&](const nn::LabeledImages& set, std::span<const std::uint64_t> ids, stats::SplitTag tag) {
    const auto rows = score_by_prediction(model, train, train_ds.ids, set.images, ids, c.score);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      scores.push_back(rows[i].score);
      correct.push_back(rows[i].predicted_class == set.labels[i]);
      tags.push_back(tag);
    }
  };
  add(train, train_ds.ids, stats::SplitTag::train);
  const auto edges = c.bin_quantiles > 0 ? stats::quantile_bin_edges(scores, c.bin_quantiles) : c.bin_edges;
  add(test, test_ds.ids, stats::SplitTag::test);
  std::unique_ptr<bool[]> flag_array(new bool[correct.size()]);
  for (std::size_t i = 0; i < correct.size(); ++i) flag_array[i] = correct[i];
  const auto rows =
      stats::bin_score_report(scores, std::span<const bool>(flag_array.get(), correct.size()), tags, edges);
  ws.write("bin_report.csv", stats::bin_report_csv(rows));
  const auto trend = [&](stats::SplitTag t) {
    const double r = stats::bin_trend(rows, t);
    return std::isnan(r) ? std::string() : shortest(r);
  };
  ws.write("bin_trend.csv", "split,spearman\ntrain," + trend(stats::SplitTag::train) + "\ntest," +
                                trend(stats::SplitTag::test) + "\n");
  return 0;
}

}  // namespace detail

/// Runs one command against an already parsed config.
inline int run_command(const std::string& command, const RunConfig& cfg) {
  Workspace ws(cfg);
  int status = 0;
  if (command == "generate-data") status = detail::cmd_generate(ws);
  else if (command == "train") status = detail::cmd_train(ws);
  else if (command == "score") status = detail::cmd_score(ws);
  else if (command == "select") status = detail::cmd_select(ws);
  else if (command == "ssl-run") status = detail::cmd_ssl_run(ws);
  else if (command == "bootstrap") status = detail::cmd_bootstrap(ws);
  else if (command == "assemble") status = detail::cmd_assemble(ws);
  else if (command == "report") status = detail::cmd_report(ws);
  else throw ArgumentError("unknown command '" + command + "'");
  ws.finish(command);
  return status;
}

}  // namespace actscore::app
