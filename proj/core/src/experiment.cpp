// ----------------------------------------------------------------------------
// Copyright 2026 The pairfuse Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#include "pairfuse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <thread>

#include "pairfuse/error.hpp"
#include "pairfuse/fuse_graph.hpp"
#include "pairfuse/fusion_kernels.hpp"
#include "pairfuse/persist.hpp"
#include "pairfuse/random.hpp"
#include "pairfuse/serialize.hpp"

namespace pairfuse {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Optimiser and scheduler

Adam::Adam(const Model& model, AdamConfig cfg) : cfg_(cfg) {
  for (const Parameter& p : model.parameters()) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step(Model& model, const std::vector<Tensor>& grads, double lr) {
  auto& params = model.parameters();
  if (grads.size() != params.size() || m_.size() != params.size()) {
    raise(ErrorCode::shape_mismatch, "gradient list does not match the model parameters");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::span<double> w = params[k].value.values();
    std::span<const double> g = grads[k].values();
    if (g.size() != w.size()) raise(ErrorCode::shape_mismatch, "gradient shape differs for " + params[k].name);
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

std::string_view to_string(Monitor m) { return m == Monitor::val_loss ? "val_loss" : "train_loss"; }

Monitor monitor_from_string(std::string_view text) {
  if (text == "val_loss") return Monitor::val_loss;
  if (text == "train_loss") return Monitor::train_loss;
  raise(ErrorCode::invalid_config, "unknown plateau monitor '" + std::string(text) + "'");
}

PlateauState lr_plateau_step(PlateauState s, const PlateauConfig& cfg, double monitored) {
  const bool improved = !std::isfinite(s.best) ? monitored < s.best
                                               : monitored < s.best - std::abs(s.best) * cfg.threshold;
  if (improved) {
    s.best = monitored;
    s.bad_epochs = 0;
    return s;
  }
  ++s.bad_epochs;
  if (s.bad_epochs >= std::max<std::size_t>(cfg.patience, 1)) {
    const double next = std::max(s.lr * cfg.factor, cfg.min_lr);
    if (next < s.lr) {
      s.lr = next;
      ++s.reductions;
    }
    s.bad_epochs = 0;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Configuration

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) raise(ErrorCode::invalid_config, "epochs must be at least 1");
  if (cfg.seeds < 1) raise(ErrorCode::invalid_config, "seeds must be at least 1");
  if (cfg.batch_size < 1) raise(ErrorCode::invalid_config, "batch size must be at least 1");
  if (!(cfg.adam.lr >= 0.0) || !std::isfinite(cfg.adam.lr)) {
    raise(ErrorCode::invalid_config, "learning rate must be finite and non-negative");
  }
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0 && cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0) ||
      !(cfg.adam.eps > 0.0)) {
    raise(ErrorCode::invalid_config, "Adam betas must lie in [0, 1) and eps must be positive");
  }
  if (!(cfg.plateau.factor > 0.0 && cfg.plateau.factor < 1.0)) {
    raise(ErrorCode::invalid_config, "plateau factor must lie in (0, 1)");
  }
  if (!(cfg.plateau.min_lr >= 0.0) || !(cfg.plateau.threshold >= 0.0)) {
    raise(ErrorCode::invalid_config, "plateau min_lr and threshold must be non-negative");
  }
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction <= 0.5)) {
    raise(ErrorCode::invalid_config, "validation fraction must lie in [0, 0.5]");
  }
  pairfuse::validate(cfg.augmentation);
}

TrainConfig default_train_config(FusePlan plan, std::size_t input_size) {
  TrainConfig cfg;
  cfg.model = desk_scale_config(plan, input_size);
  return cfg;
}

namespace {

json augment_json(const AugmentParams& a) {
  return json{{"p_hflip", a.p_hflip},
              {"p_vflip", a.p_vflip},
              {"rotation_deg", a.rotation_deg},
              {"translate", a.translate},
              {"scale_min", a.scale_min},
              {"scale_max", a.scale_max},
              {"p_blur", a.p_blur},
              {"blur_sigma_min", a.blur_sigma_min},
              {"blur_sigma_max", a.blur_sigma_max},
              {"p_noise", a.p_noise},
              {"noise_sigma_min", a.noise_sigma_min},
              {"noise_sigma_max", a.noise_sigma_max}};
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      raise(ErrorCode::validation_error, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

json train_json(const TrainConfig& c) {
  return json{{"model", json::parse(model_config_to_json(c.model))},
              {"epochs", c.epochs},
              {"seeds", c.seeds},
              {"seed", c.seed},
              {"batch_size", c.batch_size},
              {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
              {"plateau",
               {{"monitor", std::string(to_string(c.plateau.monitor))},
                {"factor", c.plateau.factor},
                {"patience", c.plateau.patience},
                {"threshold", c.plateau.threshold},
                {"min_lr", c.plateau.min_lr}}},
              {"val_fraction", c.val_fraction},
              {"augment", c.augment},
              {"augmentation", augment_json(c.augmentation)}};
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) { return train_json(cfg).dump(2) + "\n"; }

TrainConfig train_config_from_json(std::string_view text) {
  TrainConfig c = default_train_config(FusePlan{Architecture::fuse_hv, FuseFunctionId(11), FuseFunctionId(8)});
  try {
    const json j = json::parse(text);
    reject_unknown(j, {"model", "epochs", "seeds", "seed", "batch_size", "adam", "plateau", "val_fraction",
                       "augment", "augmentation"},
                   "train config");
    if (j.contains("model")) c.model = model_config_from_json(j.at("model").dump());
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "seeds", c.seeds);
    read_opt(j, "seed", c.seed);
    read_opt(j, "batch_size", c.batch_size);
    read_opt(j, "val_fraction", c.val_fraction);
    read_opt(j, "augment", c.augment);
    if (j.contains("adam")) {
      const json& a = j.at("adam");
      reject_unknown(a, {"lr", "beta1", "beta2", "eps"}, "adam");
      read_opt(a, "lr", c.adam.lr);
      read_opt(a, "beta1", c.adam.beta1);
      read_opt(a, "beta2", c.adam.beta2);
      read_opt(a, "eps", c.adam.eps);
    }
    if (j.contains("plateau")) {
      const json& p = j.at("plateau");
      reject_unknown(p, {"monitor", "factor", "patience", "threshold", "min_lr"}, "plateau");
      if (p.contains("monitor")) c.plateau.monitor = monitor_from_string(p.at("monitor").get<std::string>());
      read_opt(p, "factor", c.plateau.factor);
      read_opt(p, "patience", c.plateau.patience);
      read_opt(p, "threshold", c.plateau.threshold);
      read_opt(p, "min_lr", c.plateau.min_lr);
    }
    if (j.contains("augmentation")) {
      const json& a = j.at("augmentation");
      reject_unknown(a, {"p_hflip", "p_vflip", "rotation_deg", "translate", "scale_min", "scale_max", "p_blur",
                         "blur_sigma_min", "blur_sigma_max", "p_noise", "noise_sigma_min", "noise_sigma_max"},
                     "augmentation");
      AugmentParams& g = c.augmentation;
      read_opt(a, "p_hflip", g.p_hflip);
      read_opt(a, "p_vflip", g.p_vflip);
      read_opt(a, "rotation_deg", g.rotation_deg);
      read_opt(a, "translate", g.translate);
      read_opt(a, "scale_min", g.scale_min);
      read_opt(a, "scale_max", g.scale_max);
      read_opt(a, "p_blur", g.p_blur);
      read_opt(a, "blur_sigma_min", g.blur_sigma_min);
      read_opt(a, "blur_sigma_max", g.blur_sigma_max);
      read_opt(a, "p_noise", g.p_noise);
      read_opt(a, "noise_sigma_min", g.noise_sigma_min);
      read_opt(a, "noise_sigma_max", g.noise_sigma_max);
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::parse_error, std::string("train config: ") + e.what());
  }
  validate(c);
  return c;
}

std::string train_config_hash(const TrainConfig& cfg) { return hash_hex(fnv1a64(train_json(cfg).dump())); }

// ---------------------------------------------------------------------------
// Evaluation

EvalMetrics compute_metrics(std::span<const int> preds, std::span<const int> labels, std::size_t classes) {
  EvalMetrics m;
  m.accuracy = accuracy(preds, labels);
  m.per_class_f1 = per_class_f1(preds, labels, classes);
  m.macro_f1 = macro_f1(preds, labels, classes);
  m.confusion = confusion_matrix(preds, labels, classes);
  return m;
}

namespace {

void check_input_shape(const Model& model, const SamplePair& p) {
  const ModelConfig& c = model.config();
  for (const Image* img : {&p.pre, &p.post}) {
    if (img->channels != c.input_channels || img->height != c.input_height || img->width != c.input_width) {
      raise(ErrorCode::shape_mismatch, "crop " + std::to_string(img->width) + "x" +
                                           std::to_string(img->height) + "x" + std::to_string(img->channels) +
                                           " does not fit model input " + std::to_string(c.input_width) + "x" +
                                           std::to_string(c.input_height) + "x" +
                                           std::to_string(c.input_channels));
    }
  }
}

Batch normalized_batch(std::span<const SamplePair> pairs, const std::vector<std::size_t>& idx,
                       const ChannelStats& stats) {
  std::vector<SamplePair> chosen;
  chosen.reserve(idx.size());
  for (std::size_t i : idx) chosen.push_back(normalize(pairs[i], stats));
  Batch b = make_batch(chosen);
  b.indices = idx;
  return b;
}

template <typename Fn>
void for_each_batch(std::size_t n, std::size_t batch_size, Fn&& fn) {
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, n - start));
    std::iota(idx.begin(), idx.end(), start);
    fn(idx);
  }
}

}  // namespace

std::vector<int> predict(const Model& model, std::span<const SamplePair> pairs, const ChannelStats& stats,
                         std::size_t batch_size) {
  if (batch_size == 0) raise(ErrorCode::invalid_config, "batch size must be at least 1");
  for (const SamplePair& p : pairs) check_input_shape(model, p);
  std::vector<int> preds;
  preds.reserve(pairs.size());
  for_each_batch(pairs.size(), batch_size, [&](const std::vector<std::size_t>& idx) {
    const Batch b = normalized_batch(pairs, idx, stats);
    for (int p : predict_labels(predict_logits(model, b.tensor_a, b.tensor_b))) preds.push_back(p);
  });
  return preds;
}

EvalMetrics evaluate(const Model& model, std::span<const SamplePair> pairs, const ChannelStats& stats,
                     std::size_t batch_size) {
  if (pairs.empty()) raise(ErrorCode::empty_input, "nothing to evaluate");
  const std::vector<int> preds = predict(model, pairs, stats, batch_size);
  std::vector<int> labels;
  labels.reserve(pairs.size());
  for (const SamplePair& p : pairs) labels.push_back(p.label);
  return compute_metrics(preds, labels, model.config().head.out_classes);
}

// ---------------------------------------------------------------------------
// Training

bool RunResult::operator==(const RunResult& o) const {
  return seed == o.seed && h_fid == o.h_fid && v_fid == o.v_fid && epochs == o.epochs &&
         best_epoch == o.best_epoch && best_val_loss == o.best_val_loss &&
         final_train_accuracy == o.final_train_accuracy && test_accuracy == o.test_accuracy &&
         test_macro_f1 == o.test_macro_f1 && test_per_class_f1 == o.test_per_class_f1 &&
         test_confusion == o.test_confusion && test_samples == o.test_samples && parameters == o.parameters;
}

std::vector<std::size_t> validation_indices(const PairDataset& data, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed({seed, 0x7A1ull}));
  std::vector<std::size_t> held;
  for (std::size_t k = 0; k < kDamageClasses; ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i : data.indices(Split::train)) {
      if (data.samples[i].label == static_cast<int>(k)) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    held.insert(held.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(held.begin(), held.end());
  return held;
}

namespace {

std::vector<SamplePair> gather(const PairDataset& data, std::span<const std::size_t> idx) {
  std::vector<SamplePair> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.samples[i]);
  return out;
}

double mean_loss(const Model& model, std::span<const SamplePair> pairs, const ChannelStats& stats,
                 const ClassWeights& weights, std::size_t batch_size) {
  double total = 0.0;
  for_each_batch(pairs.size(), batch_size, [&](const std::vector<std::size_t>& idx) {
    const Batch b = normalized_batch(pairs, idx, stats);
    const LossBatch lb{one_hot(b.labels, kDamageClasses), predict_logits(model, b.tensor_a, b.tensor_b), b.labels};
    total += weighted_mse(lb, weights) * static_cast<double>(idx.size());
  });
  return total / static_cast<double>(pairs.size());
}

// Inputs are normalised and finite, so a non-finite value reaching a fuse
// kernel means the parameters have blown up.
Activations forward_or_diverge(const Model& model, const Batch& b, std::size_t epoch) {
  try {
    return forward(model, b.tensor_a, b.tensor_b);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::non_finite_input) throw;
    raise(ErrorCode::diverged_loss, "non-finite activations at epoch " + std::to_string(epoch + 1) + ": " + e.what());
  }
}

// Classes absent from the fitting split never index the weight vector, so
// they get a neutral weight instead of failing the run.
ClassWeights training_weights(std::span<const SamplePair> fit) {
  std::vector<int> labels;
  for (const SamplePair& p : fit) labels.push_back(p.label);
  const std::vector<std::size_t> counts = class_counts(labels, kDamageClasses);
  ClassWeights w;
  w.w.assign(kDamageClasses, 1.0);
  for (std::size_t k = 0; k < kDamageClasses; ++k) {
    if (counts[k] > 0) {
      w.w[k] = static_cast<double>(fit.size()) / (static_cast<double>(kDamageClasses) * static_cast<double>(counts[k]));
    }
  }
  return w;
}

}  // namespace

TrainOutcome train(const TrainConfig& cfg, const PairDataset& data, std::uint64_t seed,
                   const EpochCallback& on_epoch) {
  validate(cfg);
  const auto started = std::chrono::steady_clock::now();
  if (data.samples.size() != data.splits.size()) {
    raise(ErrorCode::dataset_error, "dataset has " + std::to_string(data.samples.size()) + " samples but " +
                                        std::to_string(data.splits.size()) + " split tags");
  }
  const std::vector<std::size_t> train_idx = data.indices(Split::train);
  if (train_idx.empty()) raise(ErrorCode::dataset_error, "dataset has no training samples");
  for (const SamplePair& p : data.samples) {
    if (p.label < 0 || p.label >= static_cast<int>(kDamageClasses)) {
      raise(ErrorCode::dataset_error, "label " + std::to_string(p.label) + " outside [0, 3]");
    }
    if (p.pre.width != cfg.model.input_width || p.pre.height != cfg.model.input_height ||
        p.post.width != cfg.model.input_width || p.post.height != cfg.model.input_height ||
        p.pre.channels != cfg.model.input_channels || p.post.channels != cfg.model.input_channels) {
      raise(ErrorCode::dataset_error, "crop size does not match the model input");
    }
  }

  const std::vector<std::size_t> val_idx = validation_indices(data, cfg.val_fraction, seed);
  std::vector<std::size_t> fit_idx;
  std::set_difference(train_idx.begin(), train_idx.end(), val_idx.begin(), val_idx.end(),
                      std::back_inserter(fit_idx));
  const std::vector<SamplePair> all_train = gather(data, train_idx);
  const std::vector<SamplePair> fit = gather(data, fit_idx);
  const std::vector<SamplePair> val = gather(data, val_idx);
  const std::vector<SamplePair> test = gather(data, data.indices(Split::test));

  TrainOutcome out;
  out.stats = compute_channel_stats(all_train);
  const ClassWeights weights = training_weights(fit);

  Model model = build_model(cfg.model);
  initialize_parameters(model, mix_seed({seed, 0x1417ull}));
  Adam adam(model, cfg.adam);
  PlateauState plateau;
  plateau.lr = cfg.adam.lr;
  std::vector<Parameter> best_params = model.parameters();
  double best_monitored = std::numeric_limits<double>::infinity();

  RunResult& r = out.result;
  r.seed = seed;
  if (cfg.model.plan.h_fid) r.h_fid = cfg.model.plan.h_fid->value();
  if (cfg.model.plan.v_fid) r.v_fid = cfg.model.plan.v_fid->value();
  r.parameters = parameter_count(model);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& idx : epoch_batches(fit.size(), cfg.batch_size, seed, epoch)) {
      std::vector<SamplePair> chosen;
      chosen.reserve(idx.size());
      for (std::size_t i : idx) {
        if (cfg.augment) {
          AugmentParams a = cfg.augmentation;
          a.seed = mix_seed({seed, epoch, fit_idx[i]});
          chosen.push_back(normalize(augment(fit[i], a), out.stats));
        } else {
          chosen.push_back(normalize(fit[i], out.stats));
        }
      }
      const Batch b = make_batch(chosen);
      const Activations acts = forward_or_diverge(model, b, epoch);
      const LossBatch lb{one_hot(b.labels, kDamageClasses), acts.result(), b.labels};
      const double loss = weighted_mse(lb, weights);
      if (!std::isfinite(loss)) {
        raise(ErrorCode::diverged_loss, "non-finite training loss at epoch " + std::to_string(epoch + 1) +
                                            " (lr " + std::to_string(plateau.lr) + ")");
      }
      adam.step(model, backward(model, acts, weighted_mse_grad(lb, weights)), plateau.lr);
      loss_sum += loss * static_cast<double>(idx.size());
      const std::vector<int> preds = predict_labels(acts.result());
      for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == b.labels[i] ? 1 : 0;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = plateau.lr;
    rec.train_loss = loss_sum / static_cast<double>(fit.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(fit.size());
    try {
      rec.val_loss = val.empty() ? rec.train_loss : mean_loss(model, val, out.stats, weights, 64);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::non_finite_input) throw;
      raise(ErrorCode::diverged_loss, "non-finite validation activations at epoch " + std::to_string(epoch + 1));
    }
    if (!std::isfinite(rec.val_loss)) {
      raise(ErrorCode::diverged_loss, "non-finite validation loss at epoch " + std::to_string(epoch + 1));
    }
    const double monitored = cfg.plateau.monitor == Monitor::val_loss ? rec.val_loss : rec.train_loss;
    plateau = lr_plateau_step(plateau, cfg.plateau, monitored);
    if (monitored < best_monitored) {
      best_monitored = monitored;
      best_params = model.parameters();
      r.best_epoch = rec.epoch;
      r.best_val_loss = rec.val_loss;
    }
    r.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  model.parameters() = std::move(best_params);
  r.final_train_accuracy = evaluate(model, fit, out.stats).accuracy;
  r.test_samples = test.size();
  if (!test.empty()) {
    const EvalMetrics m = evaluate(model, test, out.stats);
    r.test_accuracy = m.accuracy;
    r.test_macro_f1 = m.macro_f1;
    r.test_per_class_f1 = m.per_class_f1;
    r.test_confusion = m.confusion;
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  out.model = std::move(model);
  return out;
}

// ---------------------------------------------------------------------------
// Grid

double GridCell::mean_test_accuracy() const {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const RunResult& r : runs) s += r.test_accuracy;
  return s / static_cast<double>(runs.size());
}

double GridCell::mean_test_f1() const {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const RunResult& r : runs) s += r.test_macro_f1;
  return s / static_cast<double>(runs.size());
}

const GridCell* GridResult::cell(int h, int v) const {
  for (const GridCell& c : cells) {
    if (c.h_fid == h && c.v_fid == v) return &c;
  }
  return nullptr;
}

std::vector<int> default_h_fids() { return {1, 2, 3, 5, 6, 7, 8, 9, 11, 12, 13}; }
std::vector<int> default_v_fids() { return {1, 2, 5, 6, 7, 8, 9, 10, 11, 12, 13}; }

namespace {

TrainConfig cell_config(const TrainConfig& base, int h, int v) {
  TrainConfig c = base;
  c.model.plan = FusePlan{Architecture::fuse_hv, FuseFunctionId(h), FuseFunctionId(v)};
  return c;
}

void check_fid_list(const std::vector<int>& fids, const char* what) {
  if (fids.empty()) raise(ErrorCode::invalid_config, std::string(what) + " fid list is empty");
  for (int f : fids) (void)FuseFunctionId(f);
  std::vector<int> sorted = fids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    raise(ErrorCode::invalid_config, std::string(what) + " fid list has duplicates");
  }
}

}  // namespace

GridResult grid_cross_analysis(const GridConfig& cfg, const PairDataset& data, const CellCallback& on_cell) {
  check_fid_list(cfg.h_fids, "horizontal");
  check_fid_list(cfg.v_fids, "vertical");
  validate(cfg.train);
  if (cfg.jobs < 1) raise(ErrorCode::invalid_config, "jobs must be at least 1");

  GridResult grid;
  grid.h_fids = cfg.h_fids;
  grid.v_fids = cfg.v_fids;
  grid.config_hash = train_config_hash(cfg.train);
  const std::size_t n_cells = cfg.h_fids.size() * cfg.v_fids.size();
  std::vector<std::optional<GridCell>> slots(n_cells);
  const bool persist = !cfg.out_dir.empty();

  std::atomic<std::size_t> next{0}, started_new{0}, computed{0};
  std::atomic<bool> skipped{false};
  std::mutex report_mutex;
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < n_cells; k = next.fetch_add(1)) {
      const int h = cfg.h_fids[k / cfg.v_fids.size()];
      const int v = cfg.v_fids[k % cfg.v_fids.size()];
      const TrainConfig cell_cfg = cell_config(cfg.train, h, v);
      const std::string cell_hash = train_config_hash(cell_cfg);
      if (persist) {
        if (auto existing = load_cell(cell_path(cfg.out_dir, h, v), cell_hash)) {
          slots[k] = std::move(existing);
          std::lock_guard lock(report_mutex);
          if (on_cell) on_cell(*slots[k], false);
          continue;
        }
      }
      if (cfg.max_new_cells && started_new.fetch_add(1) >= *cfg.max_new_cells) {
        skipped = true;
        continue;
      }
      GridCell cell;
      cell.h_fid = h;
      cell.v_fid = v;
      try {
        for (std::size_t s = 0; s < cell_cfg.seeds; ++s) {
          cell.runs.push_back(train(cell_cfg, data, cell_cfg.seed + s).result);
        }
      } catch (const Error& e) {
        cell.failed = true;
        cell.error = e.what();
      }
      if (persist) save_cell(cell, cell_hash, cell_path(cfg.out_dir, h, v), cfg.record_timing);
      ++computed;
      slots[k] = std::move(cell);
      std::lock_guard lock(report_mutex);
      if (on_cell) on_cell(*slots[k], true);
    }
  };
  const std::size_t n_threads = std::min(cfg.jobs, n_cells);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (auto& slot : slots) {
    if (slot) grid.cells.push_back(std::move(*slot));
  }
  grid.computed_cells = computed;
  grid.complete = !skipped && grid.cells.size() == n_cells;
  if (persist) save_grid(grid, cfg.out_dir, cfg.record_timing);
  return grid;
}

// ---------------------------------------------------------------------------
// Benchmark

LatencySummary summarize_latency(std::span<const double> samples) {
  if (samples.empty()) raise(ErrorCode::empty_input, "no latency samples to summarise");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  LatencySummary out;
  const std::size_t n = s.size();
  out.median_ms = n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  out.p95_ms = s[std::max<std::size_t>(rank, 1) - 1];
  out.mean_ms = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
  return out;
}

BenchReport bench_fuse_overhead(const BenchConfig& cfg) {
  if (cfg.n_inputs < 1) raise(ErrorCode::invalid_config, "benchmark needs at least one input");
  if (cfg.warmup >= cfg.n_inputs) raise(ErrorCode::invalid_config, "warm-up must leave at least one sample");
  if (cfg.shape.size() == 0) raise(ErrorCode::invalid_config, "benchmark shape is empty");
  std::vector<FuseFunctionId> fids;
  for (int f : cfg.fids) {
    const FuseFunctionId id(f);
    if (auto problem = validate_shapes(id, cfg.shape, cfg.shape)) {
      raise(ErrorCode::invalid_config, "fid " + std::to_string(f) + ": " + problem->message);
    }
    fids.push_back(id);
  }

  constexpr std::size_t kPool = 8;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<std::pair<Tensor, Tensor>> inputs;
  for (std::size_t i = 0; i < std::min(kPool, cfg.n_inputs); ++i) {
    Tensor a(cfg.shape), b(cfg.shape);
    for (double& x : a.values()) x = dist(rng);
    for (double& x : b.values()) x = dist(rng);
    inputs.emplace_back(std::move(a), std::move(b));
  }

  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  BenchReport rep;
  rep.shape = cfg.shape;
  rep.n_inputs = cfg.n_inputs;
  rep.warmup = cfg.warmup;
  rep.baseline_ms.reserve(cfg.n_inputs);
  for (int f : cfg.fids) rep.fids.push_back(FidLatency{f, {}, {}, 0.0});
  volatile double sink = 0.0;
  for (std::size_t i = 0; i < cfg.n_inputs; ++i) {
    const auto& [a, b] = inputs[i % inputs.size()];
    const auto t0 = clock::now();
    Tensor passthrough = a;
    const auto t1 = clock::now();
    sink = sink + passthrough[i % passthrough.size()];
    rep.baseline_ms.push_back(ms(t1 - t0));
    for (std::size_t k = 0; k < fids.size(); ++k) {
      const auto f0 = clock::now();
      Tensor fused = fuse_forward(fids[k], a, b);
      const auto f1 = clock::now();
      sink = sink + fused[i % fused.size()];
      rep.fids[k].samples_ms.push_back(ms(f1 - f0));
    }
  }
  auto tail = [&](const std::vector<double>& s) {
    return std::span<const double>(s).subspan(cfg.warmup);
  };
  rep.baseline = summarize_latency(tail(rep.baseline_ms));
  for (FidLatency& f : rep.fids) {
    f.summary = summarize_latency(tail(f.samples_ms));
    f.overhead_ratio = f.summary.median_ms / std::max(rep.baseline.median_ms, 1e-9);
  }
  return rep;
}

}  // namespace pairfuse
