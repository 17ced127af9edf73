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

#include "debugcn/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <vector>

#include "debugcn/bundle.hpp"
#include "debugcn/container.hpp"
#include "debugcn/error.hpp"
#include "debugcn/gcn.hpp"
#include "debugcn/graph.hpp"
#include "debugcn/manifest.hpp"
#include "debugcn/synth.hpp"
#include "debugcn/trainer.hpp"

namespace debugcn::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

// Flags taking JSON accept either a file path or the document itself.
std::string json_argument(const std::string& value) {
  const auto first = value.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && value[first] == '{') return value;
  return read_text(value);
}

// DEBUGCN_THREADS caps graph-building parallelism; unset, empty or 0 means
// machine parallelism.
unsigned thread_cap() {
  const char* env = std::getenv("DEBUGCN_THREADS");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0') throw ConfigError("DEBUGCN_THREADS must be a non-negative integer");
  return static_cast<unsigned>(std::min<unsigned long>(v, 1024));
}

Json confusion_json(const Confusion& c) {
  return {{"count", c.total()}, {"tp", c.tp},     {"tn", c.tn},
          {"fp", c.fp},         {"fn", c.fn},     {"accuracy", c.accuracy()}};
}

std::string format_probability(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

std::vector<Sample> samples_for(const GcnModel& model, const fs::path& manifest_path) {
  const Manifest manifest = load_manifest(manifest_path);
  return prepare_samples(manifest, model.config().features, model.config().modality,
                         thread_cap());
}

struct Options {
  std::string path;
  std::string spec;
  std::string out;
  std::string manifest;
  std::string config;
  std::string report;
  std::string loss_csv;
  std::string model;
  std::string bundle;
  std::string features = "GCN_16b";
  std::string kind = "fc";
  std::size_t swaps = 1000;
  std::uint64_t seed = 0;
};

int cmd_bundle_validate(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const WeightBundle b = read_bundle(o.path, &warnings);
  for (const auto& w : warnings) err << "debugcn: warning: " << w << "\n";
  out << "ok\t" << b.model_id << "\tfc.weight " << shape_string(b.fc_weight.dims());
  if (b.conv1_weight) out << "\tconv1.weight " << shape_string(b.conv1_weight->dims());
  out << "\n";
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream&) {
  const SynthSpec spec = SynthSpec::from_json(json_argument(o.spec));
  const Manifest m = generate(spec, o.out);
  out << "wrote " << m.entries.size() << " bundles (" << m.count(Label::clean) << " clean, "
      << m.count(Label::trojaned) << " trojaned) and manifest.json to " << o.out << "\n";
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const TrainConfig config = TrainConfig::from_json(json_argument(o.config));
  config.validate();
  const Manifest manifest = load_manifest(o.manifest);
  TrainOptions options;
  options.threads = thread_cap();
  TrainResult result = train(manifest, config, options);
  result.model.save(o.out);
  if (!o.report.empty()) write_text(o.report, result.report.to_json(true) + "\n");
  if (!o.loss_csv.empty()) write_text(o.loss_csv, result.report.loss_csv());
  out << result.report.to_json(false) << "\n";
  err << "debugcn: trained " << result.report.runs.size() << " run(s) in "
      << result.report.seconds << " s\n";
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  const GcnModel model = GcnModel::load(o.model);
  const std::vector<Sample> samples = samples_for(model, o.manifest);
  const Evaluation ev = evaluate(model, samples);
  out << confusion_json(ev.confusion).dump(2) << "\n";
  return kOk;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  const GcnModel model = GcnModel::load(o.model);
  std::vector<std::string> warnings;
  const WeightBundle b = read_bundle(o.bundle, &warnings);
  for (const auto& w : warnings) err << "debugcn: warning: " << w << "\n";
  const Sample s =
      make_sample(b.model_id, Label::clean, b, model.config().features, model.config().modality);
  const Prediction p = predict(model, s.fc, s.conv ? &*s.conv : nullptr);
  out << b.model_id << "\t" << label_name(p.label) << "\t"
      << format_probability(p.probabilities[1]) << "\n";
  return kOk;
}

int cmd_permute(const Options& o, std::ostream& out, std::ostream&) {
  const GcnModel model = GcnModel::load(o.model);
  const std::vector<Sample> samples = samples_for(model, o.manifest);
  const PermutationReport r = permutation_trial(model, samples, o.swaps, o.seed);
  out << r.to_json() << "\n";
  return kOk;
}

int cmd_stats(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const WeightBundle b = read_bundle(o.bundle, &warnings);
  for (const auto& w : warnings) err << "debugcn: warning: " << w << "\n";
  out << stats_to_json(summary_stats(b)) << "\n";
  return kOk;
}

int cmd_graph(const Options& o, std::ostream& out, std::ostream&) {
  const WeightBundle b = read_bundle(o.bundle);
  std::optional<LayerGraph> g;
  if (o.kind == "fc") {
    g = build_fc_bipartite(b.fc_weight, FeatureConfig::named(o.features));
  } else {
    if (!b.conv1_weight) throw ConfigError(b.model_id + " has no conv1.weight");
    g = o.kind == "flat" ? build_conv_flat(*b.conv1_weight) : build_conv_2d(*b.conv1_weight);
  }
  out << graph_to_json(*g) << "\n";
  return kOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Backdoor detection from static CNN weights with graph convolutional networks",
               "debugcn"};
  app.require_subcommand(1);
  Options o;
  int (*action)(const Options&, std::ostream&, std::ostream&) = nullptr;

  auto* bundle = app.add_subcommand("bundle", "Weight bundle utilities");
  bundle->require_subcommand(1);
  auto* validate = bundle->add_subcommand("validate", "Parse and validate a bundle file");
  validate->add_option("path", o.path, "Bundle file")->required();
  validate->callback([&] { action = cmd_bundle_validate; });

  auto* synth = app.add_subcommand("synth", "Generate a synthetic clean/trojaned population");
  synth->add_option("--spec", o.spec, "SynthSpec JSON (file or inline)")->required();
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->callback([&] { action = cmd_synth; });

  auto* train = app.add_subcommand("train", "Train a detector; prints the report");
  train->add_option("--manifest", o.manifest, "Manifest JSON")->required();
  train->add_option("--config", o.config, "TrainConfig JSON (file or inline)")->required();
  train->add_option("--out", o.out, "Model checkpoint to write")->required();
  train->add_option("--report", o.report, "Also write the full report, timing included");
  train->add_option("--loss-csv", o.loss_csv, "Write the averaged loss curve as CSV");
  train->callback([&] { action = cmd_train; });

  auto* eval = app.add_subcommand("eval", "Evaluate a model on every manifest entry");
  eval->add_option("--model", o.model, "Model checkpoint")->required();
  eval->add_option("--manifest", o.manifest, "Manifest JSON")->required();
  eval->callback([&] { action = cmd_eval; });

  auto* predict = app.add_subcommand("predict", "Classify one bundle");
  predict->add_option("--model", o.model, "Model checkpoint")->required();
  predict->add_option("--bundle", o.bundle, "Bundle file")->required();
  predict->callback([&] { action = cmd_predict; });

  auto* permute = app.add_subcommand("permute", "Evaluate with node-swapped fc graphs");
  permute->add_option("--model", o.model, "Model checkpoint")->required();
  permute->add_option("--manifest", o.manifest, "Manifest JSON")->required();
  permute->add_option("--swaps", o.swaps, "Random node-pair swaps per graph")
      ->capture_default_str();
  permute->add_option("--seed", o.seed, "Swap seed")->capture_default_str();
  permute->callback([&] { action = cmd_permute; });

  auto* stats = app.add_subcommand("stats", "Summary statistics of a bundle's tensors");
  stats->add_option("--bundle", o.bundle, "Bundle file")->required();
  stats->callback([&] { action = cmd_stats; });

  auto* graph = app.add_subcommand("graph", "Dump the graph built from a bundle as JSON");
  graph->add_option("--bundle", o.bundle, "Bundle file")->required();
  graph->add_option("--kind", o.kind, "fc, flat or 2d")
      ->check(CLI::IsMember({"fc", "flat", "2d"}))
      ->capture_default_str();
  graph->add_option("--features", o.features, "Feature config for fc graphs")
      ->capture_default_str();
  graph->callback([&] { action = cmd_graph; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "debugcn: error: " << msg << "\n";
    return kUsageError;
  }

  try {
    return action(o, out, err);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "debugcn: error: " << msg << "\n";
    return kDataError;
  }
}

}  // namespace debugcn::cli
