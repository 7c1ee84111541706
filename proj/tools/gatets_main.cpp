// gatets: univariate time-series forecasting with a sparse
// mixture-of-experts model and interchangeable routers.
//
// Subcommands: prepare, train, evaluate, route-trace, selfcheck.
// Exit codes: 0 ok, 2 usage/config, 3 data, 4 numeric.

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gatets/config_io.hpp"
#include "gatets/data.hpp"
#include "gatets/metrics.hpp"
#include "gatets/model.hpp"
#include "gatets/selfcheck.hpp"
#include "gatets/trainer.hpp"
#include "json.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

namespace fs = std::filesystem;

std::string output_root() {
  const char* env = std::getenv("GATETS_OUT_ROOT");
  return env && *env ? std::string(env) : std::string(".");
}

fs::path resolve_out(const std::string& out, const std::string& fallback) {
  fs::path p = out.empty() ? fs::path(output_root()) / fallback
                           : fs::path(out);
  return p;
}

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gatets::DataError("cannot open '" + path + "'");
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return std::string(buf);
}

void write_text(const fs::path& path, const std::string& contents) {
  std::ofstream out(path);
  if (!out) throw gatets::DataError("cannot write '" + path.string() + "'");
  out << contents;
}

// Every command drops a manifest next to its artifacts: resolved config,
// input checksums, seed, and the produced files. No timestamps, so reruns
// are byte-identical.
void write_manifest_at(const fs::path& path, nlohmann::ordered_json manifest) {
  manifest["tool"] = std::string("gatets ") + kVersion;
  std::ofstream out(path);
  if (!out) throw gatets::DataError("cannot write '" + path.string() + "'");
  out << manifest.dump(1) << "\n";
}

gatets::Split split_from_string(const std::string& s) {
  if (s == "train") return gatets::Split::train;
  if (s == "val") return gatets::Split::val;
  if (s == "test") return gatets::Split::test;
  throw gatets::ConfigError("unknown split '" + s +
                            "' (expected train|val|test)");
}

std::array<double, 3> parse_ratios(const std::string& s) {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::stringstream ss(s);
  std::string field;
  int i = 0;
  while (std::getline(ss, field, ',') && i < 3) {
    ratios[i++] = std::stod(field);
  }
  if (i != 3) {
    throw gatets::ConfigError("--split expects three comma-separated ratios");
  }
  return ratios;
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
  std::string input;
  std::string format = "csv";
  std::string synth;
  int64_t length = 2000;
  uint64_t seed = 42;
  int64_t aggregate = 1;
  std::string split = "0.8,0.1,0.1";
  std::string out;
  std::string name;
};

int cmd_prepare(const PrepareArgs& args) {
  gatets::RawSeries raw;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  if (!args.synth.empty()) {
    raw = gatets::synth_series(gatets::synth_kind_from_string(args.synth),
                               args.length, args.seed);
  } else {
    if (args.input.empty()) {
      throw gatets::ConfigError("prepare: provide --input FILE or --synth KIND");
    }
    raw = gatets::load_series(args.input,
                              gatets::series_format_from_string(args.format));
    inputs.push_back({{"path", args.input},
                      {"fnv64", hex64(fnv1a_file(args.input))}});
  }
  if (!args.name.empty()) raw.name = args.name;

  gatets::PreparedSeries prepared =
      gatets::prepare_series(raw, args.aggregate, parse_ratios(args.split));

  const fs::path out = resolve_out(args.out, "prepared.json");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  gatets::save_prepared(prepared, out.string());

  nlohmann::ordered_json manifest;
  manifest["command"] = "prepare";
  manifest["inputs"] = inputs;
  manifest["synth"] = args.synth;
  manifest["seed"] = args.seed;
  manifest["aggregate"] = args.aggregate;
  manifest["split"] = args.split;
  manifest["outputs"] = {out.filename().string()};
  write_manifest_at(out.string() + ".manifest.json", manifest);

  std::cout << "prepared " << prepared.values.size() << " points ("
            << prepared.imputed_count << " imputed, aggregation x"
            << prepared.aggregation_factor << ") -> " << out.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string data;
  std::string config;
  int64_t stride = 1;
  std::string router;
  int64_t experts = -1;
  int64_t active = -1;
  int64_t context = -1;
  int64_t horizon = -1;
  int64_t epochs = -1;
  int64_t batch = -1;
  double lr = -1.0;
  int64_t seed = -1;
  std::vector<std::string> overrides;
  std::string out;
  bool quiet = false;
};

int cmd_train(const TrainArgs& args) {
  if (args.data.empty()) throw gatets::ConfigError("train: --data is required");
  gatets::GateTSConfig model_config;
  gatets::TrainConfig train_config;
  if (!args.config.empty()) {
    std::ifstream in(args.config);
    if (!in) throw gatets::DataError("cannot open config '" + args.config + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw gatets::DataError("bad config file: " + std::string(e.what()));
    }
    if (j.contains("model")) {
      model_config = gatets::model_config_from_json(j["model"]);
    }
    if (j.contains("train")) {
      train_config = gatets::train_config_from_json(j["train"]);
    }
  }
  if (!args.router.empty()) {
    model_config.router = gatets::router_kind_from_string(args.router);
  }
  if (args.experts > 0) model_config.n_experts = args.experts;
  if (args.active > 0) model_config.active_experts = args.active;
  if (args.context > 0) model_config.context = args.context;
  if (args.horizon > 0) model_config.horizon = args.horizon;
  if (args.epochs > 0) train_config.epochs = args.epochs;
  if (args.batch > 0) train_config.batch_size = args.batch;
  if (args.lr >= 0.0) train_config.base_lr = args.lr;
  if (args.seed >= 0) {
    model_config.seed = static_cast<uint64_t>(args.seed);
    train_config.seed = static_cast<uint64_t>(args.seed);
  }
  for (const std::string& assignment : args.overrides) {
    gatets::apply_override(&model_config, &train_config, assignment);
  }
  model_config.validate();
  train_config.validate();

  gatets::PreparedSeries prepared = gatets::load_prepared(args.data);
  gatets::WindowDataset train_data =
      gatets::make_windows(prepared, gatets::Split::train,
                           model_config.context, model_config.horizon,
                           args.stride);
  gatets::WindowDataset val_data =
      gatets::make_windows(prepared, gatets::Split::val, model_config.context,
                           model_config.horizon, args.stride);

  const fs::path out_dir = resolve_out(args.out, "run");
  fs::create_directories(out_dir);

  gatets::GateTS model(model_config);
  gatets::Trainer trainer(model, train_config, train_data, val_data);

  gatets::ProgressFn progress;
  if (!args.quiet) {
    progress = [](int64_t epoch, int64_t step, double lr, double loss) {
      std::cout << "epoch=" << epoch << " step=" << step << " lr=" << lr
                << " loss=" << loss << "\n";
    };
  }

  std::vector<gatets::EpochStats> history;
  gatets::TrainResult result;
  const int64_t cadence = train_config.checkpoint_every;
  int64_t next_stop = cadence > 0 ? cadence : train_config.epochs;
  while (true) {
    result = trainer.run(progress, next_stop);
    history.insert(history.end(), result.history.begin(),
                   result.history.end());
    if (cadence > 0 && !result.diverged &&
        next_stop < train_config.epochs) {
      gatets::save_checkpoint(
          trainer.snapshot(),
          (out_dir / ("epoch_" + std::to_string(next_stop) + ".gtsc"))
              .string());
      next_stop = std::min(next_stop + cadence, train_config.epochs);
      continue;
    }
    break;
  }

  // Best-validation checkpoint; the final state goes alongside it.
  const fs::path best_path = out_dir / "checkpoint.gtsc";
  if (trainer.has_best()) {
    gatets::save_checkpoint(trainer.best(), best_path.string());
  } else {
    gatets::save_checkpoint(trainer.snapshot(), best_path.string());
  }
  gatets::save_checkpoint(trainer.snapshot(),
                          (out_dir / "final.gtsc").string());

  std::ostringstream hist;
  hist << "epoch,train_loss,val_loss,lr,expert_utilization\n";
  for (const gatets::EpochStats& s : history) {
    hist << s.epoch << "," << s.train_loss << "," << s.val_loss << "," << s.lr
         << ",";
    for (size_t e = 0; e < s.expert_utilization.size(); ++e) {
      if (e) hist << "|";
      hist << s.expert_utilization[e];
    }
    hist << "\n";
  }
  write_text(out_dir / "history.csv", hist.str());

  nlohmann::ordered_json manifest;
  manifest["command"] = "train";
  manifest["model_config"] = gatets::to_json(model_config);
  manifest["train_config"] = gatets::to_json(train_config);
  manifest["inputs"] = {{{"path", args.data},
                         {"fnv64", hex64(fnv1a_file(args.data))}}};
  manifest["outputs"] = {"checkpoint.gtsc", "final.gtsc", "history.csv"};
  manifest["diverged"] = result.diverged;
  write_manifest_at(out_dir / "manifest.json", manifest);

  if (result.diverged) {
    std::cerr << "training diverged (non-finite or exploding loss); last good "
                 "checkpoint written to "
              << best_path.string() << "\n";
    return kExitNumeric;
  }
  std::cout << "best_val=" << result.best_val_loss
            << " best_epoch=" << result.best_epoch << " steps=" << result.steps
            << " -> " << best_path.string() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- evaluate

nlohmann::ordered_json report_to_json(const gatets::EvalReport& report,
                                      const gatets::ParameterCounts& counts) {
  nlohmann::ordered_json j;
  j["split"] = report.split;
  j["windows"] = report.window_count;
  auto metric = [](const gatets::MetricSummary& m) {
    return nlohmann::ordered_json{{"mean", m.mean},
                                  {"ci95_half_width", m.half_width}};
  };
  j["mae"] = metric(report.mae);
  j["rmse"] = metric(report.rmse);
  j["smape"] = metric(report.smape);
  j["smape"]["suppressed"] = report.smape_suppressed;
  if (report.smape_suppressed) j["smape"]["note"] = report.smape_note;
  j["mase"] = metric(report.mase);
  j["target_zero_share"] = report.target_zero_share;
  j["params_total"] = counts.total;
  j["params_active"] = counts.active;
  if (!report.utilization.frequencies.empty()) {
    j["expert_utilization"] = report.utilization.frequencies;
    j["distinct_expert_sets"] = report.utilization.distinct_sets;
    j["utilization_entropy"] = report.utilization.entropy;
  }
  return j;
}

std::string report_to_text(const nlohmann::ordered_json& j) {
  std::ostringstream out;
  out << "split: " << j["split"].get<std::string>() << "\n";
  out << "windows: " << j["windows"] << "\n";
  for (const char* m : {"mae", "rmse", "smape", "mase"}) {
    out << m << ": " << j[m]["mean"] << " +/- " << j[m]["ci95_half_width"];
    if (std::string(m) == "smape" && j["smape"]["suppressed"].get<bool>()) {
      out << "  [" << j["smape"]["note"].get<std::string>() << "]";
    }
    out << "\n";
  }
  out << "target_zero_share: " << j["target_zero_share"] << "\n";
  out << "params_total: " << j["params_total"] << "\n";
  out << "params_active: " << j["params_active"] << "\n";
  if (j.contains("expert_utilization")) {
    out << "expert_utilization:";
    for (const auto& f : j["expert_utilization"]) out << " " << f;
    out << "\n";
    out << "distinct_expert_sets: " << j["distinct_expert_sets"] << "\n";
    out << "utilization_entropy: " << j["utilization_entropy"] << "\n";
  }
  return out.str();
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out;
  bool naive = false;
  int64_t stride = 1;
  int64_t context = 64;  // naive mode only; models carry their own T/H
  int64_t horizon = 48;
};

int cmd_evaluate(const EvaluateArgs& args) {
  if (args.data.empty()) {
    throw gatets::ConfigError("evaluate: --data is required");
  }
  gatets::PreparedSeries prepared = gatets::load_prepared(args.data);
  const gatets::Split split = split_from_string(args.split);

  gatets::EvalReport report;
  gatets::ParameterCounts counts;
  if (args.naive) {
    gatets::WindowDataset data = gatets::make_windows(
        prepared, split, args.context, args.horizon, args.stride);
    report = gatets::evaluate_naive(data);
  } else {
    if (args.checkpoint.empty()) {
      throw gatets::ConfigError("evaluate: --checkpoint is required");
    }
    gatets::Checkpoint ckpt = gatets::load_checkpoint(args.checkpoint);
    gatets::GateTS model = gatets::model_from_checkpoint(ckpt);
    gatets::WindowDataset data =
        gatets::make_windows(prepared, split, model.config().context,
                             model.config().horizon, args.stride);
    report = gatets::evaluate(model, data);
    counts = gatets::GateTS::count_parameters(model.config());
  }

  const nlohmann::ordered_json j = report_to_json(report, counts);
  const std::string text = report_to_text(j);
  std::cout << text;

  const fs::path out_dir = resolve_out(args.out, "eval");
  fs::create_directories(out_dir);
  write_text(out_dir / "report.txt", text);
  write_text(out_dir / "report.json", j.dump(1) + "\n");

  nlohmann::ordered_json manifest;
  manifest["command"] = "evaluate";
  manifest["split"] = args.split;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  inputs.push_back({{"path", args.data},
                    {"fnv64", hex64(fnv1a_file(args.data))}});
  if (!args.checkpoint.empty()) {
    inputs.push_back({{"path", args.checkpoint},
                      {"fnv64", hex64(fnv1a_file(args.checkpoint))}});
  }
  manifest["inputs"] = inputs;
  manifest["outputs"] = {"report.txt", "report.json"};
  write_manifest_at(out_dir / "manifest.json", manifest);
  return kExitOk;
}

// ------------------------------------------------------------ route-trace

struct TraceArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  int64_t from = 0;
  int64_t to = -1;
  std::string out;
};

std::string set_color(int64_t set_index) {
  const int hue = static_cast<int>((set_index * 137) % 360);
  std::ostringstream c;
  c << "hsl(" << hue << ",70%,45%)";
  return c.str();
}

int cmd_route_trace(const TraceArgs& args) {
  if (args.checkpoint.empty() || args.data.empty()) {
    throw gatets::ConfigError("route-trace: --checkpoint and --data are required");
  }
  gatets::Checkpoint ckpt = gatets::load_checkpoint(args.checkpoint);
  gatets::GateTS model = gatets::model_from_checkpoint(ckpt);
  const int64_t horizon = model.config().horizon;
  const int64_t context = model.config().context;
  gatets::PreparedSeries prepared = gatets::load_prepared(args.data);
  gatets::WindowDataset data = gatets::make_windows(
      prepared, split_from_string(args.split), context, horizon);

  const int64_t window_count = static_cast<int64_t>(data.size());
  const int64_t to = args.to < 0
                         ? std::min(window_count, args.from + 40 * horizon)
                         : args.to;
  if (args.from < 0 || args.from >= to || to > window_count) {
    throw gatets::DataError("route-trace: window range [" +
                            std::to_string(args.from) + "," +
                            std::to_string(to) + ") out of bounds (0," +
                            std::to_string(window_count) + ")");
  }

  // Non-overlapping forecast blocks give one contiguous trace; each block
  // is colored by the expert set routed at the read-out token.
  struct Row {
    int64_t step;
    double forecast;
    double actual;
    std::vector<int> experts;
    std::vector<double> weights;
  };
  std::vector<Row> rows;
  gatets::NoGradGuard guard;
  const int64_t k = model.config().active_experts;
  const int64_t n_experts = model.config().n_experts;
  for (int64_t w = args.from; w < to; w += horizon) {
    gatets::Tensor x = gatets::Tensor::zeros({1, context});
    std::copy(data.context_ptr(w), data.context_ptr(w) + context, x.data());
    gatets::RngCtx ctx{false, 0, 0, 0};
    gatets::ModelForward out = model.forward(x, ctx);
    // Routing of the last context token, the one the head reads.
    const int64_t token = context - 1;
    std::vector<int> experts(k);
    std::vector<double> weights(k);
    for (int64_t j = 0; j < k; ++j) {
      experts[j] = out.routing.selected[token * k + j];
      weights[j] =
          out.routing.weights.data()[token * n_experts + experts[j]];
    }
    const double* natural = data.natural->data() + data.starts[w] + context;
    for (int64_t h = 0; h < horizon; ++h) {
      Row row;
      row.step = data.starts[w] + context + h;
      row.forecast = data.norm.to_natural(out.forecast.data()[h]);
      row.actual = natural[h];
      row.experts = experts;
      row.weights = weights;
      rows.push_back(std::move(row));
    }
  }

  // CSV
  std::ostringstream csv;
  csv << "step,forecast,actual,expert_ids,weights\n";
  csv.precision(12);
  for (const Row& row : rows) {
    csv << row.step << "," << row.forecast << "," << row.actual << ",";
    for (size_t j = 0; j < row.experts.size(); ++j) {
      if (j) csv << "|";
      csv << row.experts[j];
    }
    csv << ",";
    for (size_t j = 0; j < row.weights.size(); ++j) {
      if (j) csv << "|";
      csv << row.weights[j];
    }
    csv << "\n";
  }

  // Distinct expert sets in first-seen order drive the palette.
  std::vector<std::vector<int>> seen_sets;
  auto set_id = [&seen_sets](std::vector<int> set) {
    std::sort(set.begin(), set.end());
    for (size_t i = 0; i < seen_sets.size(); ++i) {
      if (seen_sets[i] == set) return static_cast<int64_t>(i);
    }
    seen_sets.push_back(set);
    return static_cast<int64_t>(seen_sets.size() - 1);
  };

  double lo = rows[0].actual, hi = rows[0].actual;
  for (const Row& row : rows) {
    lo = std::min({lo, row.actual, row.forecast});
    hi = std::max({hi, row.actual, row.forecast});
  }
  if (hi <= lo) hi = lo + 1.0;
  const double width = 960.0, height = 320.0, margin = 24.0;
  auto sx = [&](size_t i) {
    return margin + (width - 2 * margin) * static_cast<double>(i) /
                        std::max<size_t>(1, rows.size() - 1);
  };
  auto sy = [&](double v) {
    return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<polyline class=\"actual\" fill=\"none\" stroke=\"#bbbbbb\" "
         "stroke-width=\"1\" points=\"";
  for (size_t i = 0; i < rows.size(); ++i) {
    svg << sx(i) << "," << sy(rows[i].actual) << " ";
  }
  svg << "\"/>\n";
  // One polyline per forecast block, colored by its expert set.
  for (size_t i = 0; i < rows.size();) {
    size_t j = i;
    while (j < rows.size() && rows[j].experts == rows[i].experts &&
           (j == i || rows[j].step == rows[j - 1].step + 1)) {
      ++j;
    }
    const int64_t id = set_id(rows[i].experts);
    svg << "<polyline class=\"forecast\" fill=\"none\" stroke=\""
        << set_color(id) << "\" stroke-width=\"2\" points=\"";
    for (size_t p = i; p < j; ++p) {
      svg << sx(p) << "," << sy(rows[p].forecast) << " ";
    }
    if (j == i + 1) {  // lone point still needs visible extent
      svg << sx(i) + 1.0 << "," << sy(rows[i].forecast) << " ";
    }
    svg << "\"/>\n";
    i = j;
  }
  svg << "</svg>\n";

  const fs::path out_dir = resolve_out(args.out, "trace");
  fs::create_directories(out_dir);
  write_text(out_dir / "trace.csv", csv.str());
  write_text(out_dir / "trace.svg", svg.str());

  nlohmann::ordered_json manifest;
  manifest["command"] = "route-trace";
  manifest["split"] = args.split;
  manifest["from"] = args.from;
  manifest["to"] = to;
  manifest["inputs"] = {{{"path", args.data},
                         {"fnv64", hex64(fnv1a_file(args.data))}},
                        {{"path", args.checkpoint},
                         {"fnv64", hex64(fnv1a_file(args.checkpoint))}}};
  manifest["outputs"] = {"trace.csv", "trace.svg"};
  write_manifest_at(out_dir / "manifest.json", manifest);

  std::cout << "traced " << rows.size() << " steps, "
            << seen_sets.size() << " distinct expert sets -> "
            << out_dir.string() << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- selfcheck

int cmd_selfcheck(uint64_t seed, bool perturb) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<gatets::CheckResult> results =
      gatets::run_selfcheck(seed, perturb);
  bool all_ok = true;
  for (const gatets::CheckResult& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " — "
              << r.detail << "\n";
    all_ok = all_ok && r.passed;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  std::cout << (all_ok ? "selfcheck OK" : "selfcheck FAILED") << " ("
            << results.size() << " checks, " << secs << "s)\n";
  return all_ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GateTS univariate forecasting toolkit"};
  app.require_subcommand(1);

  PrepareArgs prepare_args;
  CLI::App* prepare = app.add_subcommand(
      "prepare", "Clean, aggregate, split and normalize a series");
  prepare->add_option("--input,--dataset", prepare_args.input,
                      "Input series file");
  prepare->add_option("--format", prepare_args.format, "csv or tsf");
  prepare->add_option("--synth", prepare_args.synth,
                      "Generate a synthetic series: sine|regime|intermittent");
  prepare->add_option("--length", prepare_args.length, "Synthetic length");
  prepare->add_option("--seed", prepare_args.seed, "Synthetic seed");
  prepare->add_option("--aggregate", prepare_args.aggregate,
                      "Block-mean aggregation factor");
  prepare->add_option("--split", prepare_args.split,
                      "Train,val,test ratios (default 0.8,0.1,0.1)");
  prepare->add_option("--out", prepare_args.out, "Output file");
  prepare->add_option("--name", prepare_args.name, "Series name override");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a GateTS model");
  train->add_option("--data,--dataset", train_args.data,
                    "Prepared series file");
  train->add_option("--stride", train_args.stride,
                    "Training window stride");
  train->add_option("--config", train_args.config,
                    "JSON config file with model/train sections");
  train->add_option("--router", train_args.router,
                    "attention|hmm|classic");
  train->add_option("--experts", train_args.experts, "Expert count E");
  train->add_option("--active", train_args.active, "Active experts k");
  train->add_option("--context", train_args.context, "Context length T");
  train->add_option("--horizon", train_args.horizon, "Forecast horizon H");
  train->add_option("--epochs", train_args.epochs, "Training epochs");
  train->add_option("--batch", train_args.batch, "Batch size");
  train->add_option("--lr", train_args.lr, "Base learning rate");
  train->add_option("--seed", train_args.seed, "Seed for init/shuffle/dropout");
  train->add_option("--set", train_args.overrides,
                    "key=value config override (repeatable)");
  train->add_option("--out", train_args.out, "Output directory");
  train->add_flag("--quiet", train_args.quiet, "Suppress per-step records");

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Evaluate a checkpoint on a split");
  evaluate->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file");
  evaluate->add_option("--data,--dataset", eval_args.data,
                       "Prepared series file");
  evaluate->add_option("--stride", eval_args.stride, "Window stride");
  evaluate->add_option("--split", eval_args.split, "train|val|test");
  evaluate->add_option("--out", eval_args.out, "Output directory");
  evaluate->add_flag("--naive", eval_args.naive,
                     "Evaluate the repeat-last-value baseline instead");
  evaluate->add_option("--context", eval_args.context,
                       "Window context length (naive mode)");
  evaluate->add_option("--horizon", eval_args.horizon,
                       "Window horizon (naive mode)");

  TraceArgs trace_args;
  CLI::App* trace = app.add_subcommand(
      "route-trace", "Export per-step forecasts with routed expert sets");
  trace->add_option("--checkpoint", trace_args.checkpoint, "Checkpoint file");
  trace->add_option("--data,--dataset", trace_args.data,
                    "Prepared series file");
  trace->add_option("--split", trace_args.split, "train|val|test");
  trace->add_option("--from", trace_args.from, "First window index");
  trace->add_option("--to", trace_args.to, "One past the last window index");
  trace->add_option("--out", trace_args.out, "Output directory");

  uint64_t selfcheck_seed = 7;
  bool selfcheck_perturb = false;
  CLI::App* selfcheck = app.add_subcommand(
      "selfcheck", "Run the runtime integrity suite");
  selfcheck->add_option("--seed", selfcheck_seed, "Random seed");
  selfcheck
      ->add_flag("--perturb-gradient", selfcheck_perturb,
                 "Corrupt one gradient to prove failures are detected")
      ->group("");  // hidden test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prepare_args);
    if (train->parsed()) return cmd_train(train_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args);
    if (trace->parsed()) return cmd_route_trace(trace_args);
    if (selfcheck->parsed()) {
      return cmd_selfcheck(selfcheck_seed, selfcheck_perturb);
    }
  } catch (const gatets::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gatets::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const gatets::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const gatets::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
