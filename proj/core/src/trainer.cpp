// Copyright 2026 The debugcn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "debugcn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <set>
#include <thread>

#include "debugcn/adam.hpp"
#include "debugcn/error.hpp"
#include "debugcn/ops.hpp"
#include "debugcn/random.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace debugcn {
namespace {

// Every training step allocates and frees a few hundred MB of activations and
// gradients. glibc would hand large blocks back to the kernel each time and
// fault them in again on the next step, which costs more than the arithmetic.
void keep_freed_memory() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int label_index(Label l) { return static_cast<int>(l); }

Json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn},
          {"accuracy", c.accuracy()}};
}

Json epochs_json(const std::vector<EpochRecord>& epochs) {
  Json arr = Json::array();
  for (const auto& e : epochs)
    arr.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"lr", e.learning_rate}});
  return arr;
}

struct Batches {
  GraphBatch fc;
  std::optional<GraphBatch> conv;
};

Batches batch_samples(std::span<const Sample> samples, std::span<const std::size_t> which,
                      bool with_conv, bool with_labels) {
  std::vector<const LayerGraph*> fc, conv;
  std::vector<int> labels;
  for (std::size_t i : which) {
    fc.push_back(&samples[i].fc);
    if (with_conv) conv.push_back(&*samples[i].conv);
    labels.push_back(label_index(samples[i].label));
  }
  Batches b{make_batch(fc, with_labels ? std::span<const int>(labels) : std::span<const int>()),
            std::nullopt};
  if (with_conv) b.conv = make_batch(conv);
  return b;
}

void check_samples(std::span<const Sample> samples, const GcnModel& model) {
  const ModelConfig& cfg = model.config();
  for (const Sample& s : samples) {
    if (s.fc.feature_width() != cfg.fc_input_width) {
      throw ConfigError("model " + s.model_id + ": fc feature width " +
                        std::to_string(s.fc.feature_width()) + " does not match model width " +
                        std::to_string(cfg.fc_input_width));
    }
    if (cfg.dual_branch() != s.conv.has_value()) {
      throw ConfigError("model " + s.model_id + ": conv graph presence does not match modality " +
                        std::string(modality_name(cfg.modality)));
    }
    if (s.conv && s.conv->feature_width() != cfg.conv_input_width) {
      throw ConfigError("model " + s.model_id + ": conv feature width " +
                        std::to_string(s.conv->feature_width()) +
                        " does not match model width " + std::to_string(cfg.conv_input_width));
    }
  }
}

// Logits for samples[which], in order.
std::vector<std::array<float, 2>> batched_logits(const GcnModel& model,
                                                 std::span<const Sample> samples,
                                                 std::span<const std::size_t> which,
                                                 std::size_t batch_size) {
  std::vector<std::array<float, 2>> out;
  out.reserve(which.size());
  const bool with_conv = model.config().dual_branch();
  for (std::size_t start = 0; start < which.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, which.size() - start);
    Batches b = batch_samples(samples, which.subspan(start, n), with_conv, false);
    Tape tape;
    Tensor logits = model.forward(tape, b.fc, b.conv ? &*b.conv : nullptr);
    for (std::size_t r = 0; r < n; ++r) out.push_back({logits.at(r, 0), logits.at(r, 1)});
  }
  return out;
}

Confusion confusion_of(const GcnModel& model, std::span<const Sample> samples,
                       std::span<const std::size_t> which, std::size_t batch_size) {
  Confusion c;
  if (which.empty()) return c;
  auto logits = batched_logits(model, samples, which, batch_size);
  for (std::size_t i = 0; i < which.size(); ++i) {
    c.add(samples[which[i]].label, prediction_from_logits(logits[i][0], logits[i][1]).label);
  }
  return c;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (num_runs < 1) throw ConfigError("num_runs must be >= 1");
  if (step_size < 1) throw ConfigError("step_size must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(decay_factor > 0) || !std::isfinite(decay_factor))
    throw ConfigError("decay_factor must be positive");
  if (!(split_ratio > 0 && split_ratio < 1)) throw ConfigError("split_ratio must be in (0, 1)");
}

TrainConfig TrainConfig::from_json(std::string_view json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("train config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  auto get_int = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError("train config: \"" + key + "\" must be an integer");
    return v.get<std::int64_t>();
  };
  auto get_num = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("train config: \"" + key + "\" must be a number");
    return v.get<double>();
  };
  auto get_str = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("train config: \"" + key + "\" must be a string");
    return v.get<std::string>();
  };
  for (const auto& [key, value] : doc.items()) {
    if (key == "epochs") c.epochs = static_cast<int>(get_int(value, key));
    else if (key == "batch_size") c.batch_size = static_cast<int>(get_int(value, key));
    else if (key == "learning_rate") c.learning_rate = get_num(value, key);
    else if (key == "decay_factor") c.decay_factor = get_num(value, key);
    else if (key == "step_size") c.step_size = static_cast<int>(get_int(value, key));
    else if (key == "split_ratio") c.split_ratio = get_num(value, key);
    else if (key == "num_runs") c.num_runs = static_cast<int>(get_int(value, key));
    else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError("train config: \"seed\" must be a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "feature_config") c.feature_config = FeatureConfig::named(get_str(value, key)).id;
    else if (key == "modality") c.modality = parse_modality(get_str(value, key));
    else throw ConfigError("train config: unknown key \"" + key + "\"");
  }
  c.validate();
  return c;
}

std::string TrainConfig::to_json() const {
  Json j = {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"decay_factor", decay_factor},
            {"step_size", step_size},
            {"split_ratio", split_ratio},
            {"num_runs", num_runs},
            {"seed", seed},
            {"feature_config", FeatureConfig::of(feature_config).name()},
            {"modality", modality_name(modality)}};
  return j.dump(2);
}

Sample make_sample(std::string model_id, Label label, const WeightBundle& bundle,
                   FeatureSet features, Modality modality) {
  Sample s;
  s.model_id = std::move(model_id);
  s.label = label;
  s.fc = build_fc_bipartite(bundle.fc_weight, FeatureConfig::of(features));
  if (modality != Modality::fc_only) {
    if (!bundle.conv1_weight) {
      throw ConfigError("modality " + std::string(modality_name(modality)) +
                        " needs conv1.weight, missing in: " + s.model_id);
    }
    s.conv = modality == Modality::fc_plus_flat ? build_conv_flat(*bundle.conv1_weight)
                                                : build_conv_2d(*bundle.conv1_weight);
  }
  return s;
}

std::vector<Sample> prepare_samples(const Manifest& manifest, FeatureSet features,
                                    Modality modality, unsigned threads) {
  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<Sample>> built(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<char> missing_conv(n, 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const ManifestEntry& entry = manifest.entries[i];
        WeightBundle bundle = load_entry(entry);
        if (modality != Modality::fc_only && !bundle.conv1_weight) {
          missing_conv[i] = 1;
          continue;
        }
        built[i] = make_sample(entry.model_id, entry.label, bundle, features, modality);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  unsigned count = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  count = static_cast<unsigned>(std::min<std::size_t>(count, std::max<std::size_t>(n, 1)));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ParseError& e) {
      throw ParseError(e.kind(), "model " + manifest.entries[i].model_id + ": " + e.what());
    } catch (const Error& e) {
      throw ValidationError("model " + manifest.entries[i].model_id + ": " + e.what());
    }
  }
  std::string missing;
  for (std::size_t i = 0; i < n; ++i) {
    if (!missing_conv[i]) continue;
    missing += (missing.empty() ? "" : ",") + manifest.entries[i].model_id;
  }
  if (!missing.empty()) {
    throw ConfigError("modality " + std::string(modality_name(modality)) +
                      " needs conv1.weight, missing in: " + missing);
  }
  std::vector<Sample> out;
  out.reserve(n);
  for (auto& s : built) out.push_back(std::move(*s));
  return out;
}

SplitIndices split_indices(std::span<const Label> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0 && ratio < 1)) throw ConfigError("split ratio must be in (0, 1)");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[label_index(labels[i])].push_back(i);
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 2) {
      throw ConfigError("cannot stratify: class \"" +
                        std::string(label_name(static_cast<Label>(c))) + "\" has " +
                        std::to_string(by_class[c].size()) + " entries, need at least 2");
    }
  }

  const std::size_t n = labels.size();
  // The epsilon absorbs representation error such as 0.8 * 10 = 7.999...
  const auto total_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  std::size_t train_count[2];
  double remainder[2];
  for (int c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(by_class[c].size()) * ratio + 1e-9;
    train_count[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
  }
  // Largest remainder; ties go to the clean class.
  std::size_t assigned = train_count[0] + train_count[1];
  while (assigned < total_train) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    ++train_count[c];
    remainder[c] = -1;
    ++assigned;
  }
  for (int c = 0; c < 2; ++c) {
    train_count[c] = std::clamp<std::size_t>(train_count[c], 1, by_class[c].size() - 1);
  }

  Rng rng(seed);
  SplitIndices out;
  for (int c = 0; c < 2; ++c) {
    auto& items = by_class[c];
    rng.shuffle(items.begin(), items.end());
    out.train.insert(out.train.end(), items.begin(), items.begin() + train_count[c]);
    out.test.insert(out.test.end(), items.begin() + train_count[c], items.end());
  }
  rng.shuffle(out.train.begin(), out.train.end());
  rng.shuffle(out.test.begin(), out.test.end());
  return out;
}

std::pair<Manifest, Manifest> split(const Manifest& manifest, double ratio, std::uint64_t seed) {
  std::vector<Label> labels;
  for (const auto& e : manifest.entries) labels.push_back(e.label);
  SplitIndices idx = split_indices(labels, ratio, seed);
  std::pair<Manifest, Manifest> out;
  for (std::size_t i : idx.train) out.first.entries.push_back(manifest.entries[i]);
  for (std::size_t i : idx.test) out.second.entries.push_back(manifest.entries[i]);
  return out;
}

void Confusion::add(Label truth, Label predicted) {
  if (truth == Label::trojaned) {
    (predicted == Label::trojaned ? tp : fn) += 1;
  } else {
    (predicted == Label::clean ? tn : fp) += 1;
  }
}

double Confusion::accuracy() const {
  if (total() == 0) return 0.0;
  return 100.0 * static_cast<double>(tp + tn) / static_cast<double>(total());
}

std::string RunReport::to_json(bool include_timing) const {
  Json runs_json = Json::array();
  for (const RunRecord& r : runs) {
    Json j = {{"seed", r.seed},
              {"epochs", epochs_json(r.epochs)},
              {"train", confusion_json(r.train)},
              {"test", confusion_json(r.test)}};
    if (include_timing) j["seconds"] = r.seconds;
    runs_json.push_back(std::move(j));
  }
  Json doc = {{"runs", std::move(runs_json)},
              {"mean_train_accuracy", mean_train_accuracy},
              {"mean_test_accuracy", mean_test_accuracy},
              {"mean_epochs", epochs_json(mean_epochs)}};
  if (include_timing) doc["seconds"] = seconds;
  return doc.dump(2);
}

std::string RunReport::loss_csv() const {
  // Shortest representation that reads back to the same double.
  auto shortest = [](double v) {
    char buf[400];  // fixed notation of any finite double fits
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    return std::string(buf, r.ptr);
  };
  std::string out = "epoch,mean_loss,lr\n";
  for (const auto& e : mean_epochs) {
    out += std::to_string(e.epoch) + ',' + shortest(e.mean_loss) + ',' +
           shortest(e.learning_rate) + '\n';
  }
  return out;
}

TrainResult train(const Manifest& manifest, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  std::vector<Sample> samples =
      prepare_samples(manifest, config.feature_config, config.modality, options.threads);
  return train_samples(samples, config);
}

TrainResult train_samples(std::span<const Sample> samples, const TrainConfig& config) {
  keep_freed_memory();
  config.validate();
  if (samples.empty()) throw ConfigError("train: no samples");
  const bool with_conv = config.modality != Modality::fc_only;

  ModelConfig model_config;
  model_config.modality = config.modality;
  model_config.features = config.feature_config;
  model_config.fc_input_width = samples.front().fc.feature_width();
  model_config.conv_input_width = with_conv && samples.front().conv
                                      ? samples.front().conv->feature_width()
                                      : 0;

  std::vector<Label> labels;
  for (const Sample& s : samples) labels.push_back(s.label);

  const auto started = Clock::now();
  RunReport report;
  std::optional<GcnModel> last;
  for (int run = 0; run < config.num_runs; ++run) {
    const auto run_started = Clock::now();
    const std::uint64_t run_seed = config.seed + static_cast<std::uint64_t>(run);
    SplitIndices split = split_indices(labels, config.split_ratio, mix_seed(run_seed, 1));
    GcnModel model(model_config, run_seed);
    check_samples(samples, model);
    std::vector<Tensor> params = model.parameters();
    AdamState adam;
    Rng order_rng(mix_seed(run_seed, 2));

    RunRecord record;
    record.seed = run_seed;
    std::vector<std::size_t> order = split.train;
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const double lr = step_lr(config.learning_rate, config.decay_factor, config.step_size, epoch);
      order_rng.shuffle(order.begin(), order.end());
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t n = std::min(batch, order.size() - start);
        Batches b = batch_samples(samples, std::span(order).subspan(start, n), with_conv, true);
        Tape tape;
        Tensor logits = model.forward(tape, b.fc, b.conv ? &*b.conv : nullptr);
        Tensor loss = softmax_cross_entropy(tape, logits, b.fc.labels);
        tape.backward(loss);
        adam_step(params, adam, lr);
        tape.clear();
        loss_sum += static_cast<double>(loss.item()) * static_cast<double>(n);
      }
      record.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), lr});
    }
    model.mark_trained();
    record.train = confusion_of(model, samples, split.train, batch);
    record.test = confusion_of(model, samples, split.test, batch);
    record.seconds = seconds_since(run_started);
    report.runs.push_back(std::move(record));
    last = std::move(model);
  }

  for (const RunRecord& r : report.runs) {
    report.mean_train_accuracy += r.train.accuracy();
    report.mean_test_accuracy += r.test.accuracy();
  }
  const auto runs = static_cast<double>(report.runs.size());
  report.mean_train_accuracy /= runs;
  report.mean_test_accuracy /= runs;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord mean{epoch, 0.0, report.runs.front().epochs[epoch].learning_rate};
    for (const RunRecord& r : report.runs) mean.mean_loss += r.epochs[epoch].mean_loss;
    mean.mean_loss /= runs;
    report.mean_epochs.push_back(mean);
  }
  report.seconds = seconds_since(started);
  return TrainResult{std::move(*last), std::move(report)};
}

Evaluation evaluate(const GcnModel& model, std::span<const Sample> samples,
                    std::size_t batch_size) {
  keep_freed_memory();
  if (model.state() == ModelState::initialized) {
    throw StateError("evaluate: model has not been trained or loaded");
  }
  if (samples.empty()) throw ConfigError("evaluate: empty test set");
  check_samples(samples, model);
  const auto which = iota(samples.size());
  auto logits = batched_logits(model, samples, which, std::max<std::size_t>(batch_size, 1));
  Evaluation out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.predictions.push_back(prediction_from_logits(logits[i][0], logits[i][1]));
    out.confusion.add(samples[i].label, out.predictions.back().label);
  }
  return out;
}

PermutationReport permutation_trial(const GcnModel& model, std::span<const Sample> samples,
                                    std::size_t swaps, std::uint64_t seed,
                                    std::size_t batch_size) {
  return permutation_trial(model, samples, evaluate(model, samples, batch_size), swaps, seed,
                           batch_size);
}

PermutationReport permutation_trial(const GcnModel& model, std::span<const Sample> samples,
                                    const Evaluation& plain, std::size_t swaps,
                                    std::uint64_t seed, std::size_t batch_size) {
  if (plain.predictions.size() != samples.size())
    throw ShapeError("baseline has " + std::to_string(plain.predictions.size()) +
                     " predictions for " + std::to_string(samples.size()) + " samples");
  std::vector<Sample> permuted;
  permuted.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Sample s = samples[i];
    s.fc = random_pair_swaps(samples[i].fc, swaps, mix_seed(seed, i));
    permuted.push_back(std::move(s));
  }
  Evaluation shuffled = evaluate(model, permuted, batch_size);

  PermutationReport report;
  report.swaps = swaps;
  report.seed = seed;
  report.plain = plain.confusion;
  report.permuted = shuffled.confusion;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (int c = 0; c < 2; ++c) {
      report.max_logit_deviation =
          std::max(report.max_logit_deviation,
                   std::abs(static_cast<double>(plain.predictions[i].logits[c]) -
                            static_cast<double>(shuffled.predictions[i].logits[c])));
    }
    if (plain.predictions[i].label != shuffled.predictions[i].label) {
      report.identical_predictions = false;
    }
  }
  return report;
}

std::string PermutationReport::to_json() const {
  Json j = {{"swaps", swaps},
            {"seed", seed},
            {"plain", confusion_json(plain)},
            {"permuted", confusion_json(permuted)},
            {"accuracy", plain.accuracy()},
            {"permuted_accuracy", permuted.accuracy()},
            {"max_logit_deviation", max_logit_deviation},
            {"identical_predictions", identical_predictions}};
  return j.dump(2);
}

}  // namespace debugcn
