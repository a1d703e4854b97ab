#include "fmim/cli/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <json.hpp>
#include <sstream>

#include "fmim/cli/log.hpp"
#include "fmim/cli/svg.hpp"
#include "fmim/common.hpp"
#include "fmim/csv.hpp"
#include "fmim/diagnostics.hpp"
#include "fmim/eval.hpp"
#include "fmim/model/checkpoint.hpp"
#include "fmim/model/vit.hpp"

namespace fmim::cli {
namespace {

namespace fs = std::filesystem;

struct Workspace {
  Dataset train;
  Dataset test;
  Dataset pool;
  Partition partition;
  std::vector<ClientSplit> splits;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

template <typename Fn>
void write_csv(const fs::path& path, Fn&& fill) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  fill(out);
}

Dataset load_labeled(const fs::path& images, const fs::path& labels, std::size_t classes) {
  auto ds = read_images(images);
  ds.classes = classes;
  read_labels(labels, ds);
  if (ds.classes > classes)
    throw FormatError(labels.string() + ": labels exceed data.classes = " + std::to_string(classes));
  return ds;
}

void check_shape(const Dataset& ds, const ImageGeometry& g, const std::string& what) {
  if (ds.shape != ImageShape{g.height, g.width, g.channels})
    throw FormatError(what + ": image shape does not match data.height/width/channels");
}

Workspace load_workspace(const ExperimentConfig& c, double label_fraction) {
  Workspace w;
  if (c.source == "synthetic") {
    auto s = synth_dataset(c.synth);
    w.train = std::move(s.train);
    w.test = std::move(s.test);
    w.pool = std::move(s.public_pool);
  } else {
    w.train = load_labeled(c.train_images, c.train_labels, c.synth.classes);
    w.test = load_labeled(c.test_images, c.test_labels, c.synth.classes);
    w.test.split = Split::test;
    w.pool = c.public_images.empty() ? w.train : read_images(c.public_images);
    check_shape(w.train, c.geometry, "train_images");
    check_shape(w.test, c.geometry, "test_images");
    check_shape(w.pool, c.geometry, "public_images");
  }
  if (!c.manifest.empty())
    w.partition = read_manifest(c.manifest, w.train);
  else if (c.iid)
    w.partition = iid_partition(w.train, c.partition.clients, c.seed);
  else
    w.partition = dirichlet_partition(w.train, c.partition);
  if (w.partition.client_count() != c.partition.clients)
    throw FormatError("partition has " + std::to_string(w.partition.client_count()) +
                      " clients, partition.clients is " + std::to_string(c.partition.clients));
  w.splits = subsample_labels(w.partition, w.train, label_fraction, c.seed);
  return w;
}

template <typename T>
struct Trained {
  ModelParams<T> params;
  std::vector<MetricRow> log;
  std::optional<Codebook> codebook;
};

Codebook fit_tokenizer(const ExperimentConfig& c, const Dataset& pool) {
  std::vector<double> patches;
  patches.reserve(pool.size() * c.geometry.pixels());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto p = patchify<float>(pool.image(i), c.geometry);
    patches.insert(patches.end(), p.begin(), p.end());
  }
  log(LogLevel::info, "fitting a " + std::to_string(c.dims.vocab) + "-token codebook on " +
                          std::to_string(patches.size() / c.geometry.patch_dim()) + " patches");
  return fit_codebook(patches, c.geometry.patch_dim(), c.dims.vocab, c.tokenizer_iterations, c.seed);
}

FedConfig clamp_warmup(FedConfig f) {
  f.warmup = std::min(f.warmup, f.rounds * f.local_epochs);
  return f;
}

template <typename T>
RunOptions<T> run_options(const ExperimentConfig& c, const std::string& label) {
  RunOptions<T> o;
  o.threads = c.threads;
  o.on_round = [label](std::size_t round, const ModelParams<T>&) {
    if (round == 1 || round % 10 == 0) log(LogLevel::debug, label + ": round " + std::to_string(round));
  };
  return o;
}

template <typename T>
Trained<T> pretrain(const ExperimentConfig& c, const Workspace& w, const FedConfig& fc) {
  Trained<T> t;
  const auto init = init_params<T>(c.geometry, c.dims, c.seed);
  StageData data{&w.train, &w.test, w.splits, nullptr, c.geometry, c.dims};
  if (fc.method == Method::beit) {
    t.codebook = fit_tokenizer(c, w.pool);
    data.codebook = &*t.codebook;
  }
  log(LogLevel::info, std::string("pre-training (") + to_string(fc.method) + ") for " +
                          std::to_string(fc.rounds) + " rounds");
  auto r = run_stage<T>(clamp_warmup(fc), data, init, run_options<T>(c, "pretrain"));
  t.params = std::move(r.params);
  t.log = std::move(r.log);
  return t;
}

template <typename T>
Trained<T> finetune(const ExperimentConfig& c, const Workspace& w, const FedConfig& fc,
                    const ModelParams<T>* pretrained) {
  auto init = pretrained ? pretrained->clone() : init_params<T>(c.geometry, c.dims, c.seed);
  init.merge(init_classifier<T>(c.dims));
  StageData data{&w.train, &w.test, w.splits, nullptr, c.geometry, c.dims};
  log(LogLevel::info, std::string("fine-tuning from ") + (pretrained ? "pre-trained" : "random") +
                          " initialization for " + std::to_string(fc.rounds) + " rounds");
  auto r = run_stage<T>(clamp_warmup(fc), data, init, run_options<T>(c, "finetune"));
  return {std::move(r.params), std::move(r.log), std::nullopt};
}

template <typename T>
Checkpoint to_checkpoint(const Trained<T>& t, std::size_t round, std::uint64_t seed) {
  Checkpoint ck;
  ck.add_params(t.params);
  if (t.codebook) add_codebook(ck, *t.codebook);
  ck.add_integers("meta/round", {1}, {round});
  ck.add_integers("meta/seed", {1}, {seed});
  return ck;
}

fs::path pretrain_checkpoint(const fs::path& out, const ExperimentConfig& c) {
  return out / ("pretrain_r" + std::to_string(c.pretrain.rounds) + ".ckpt");
}

fs::path finetune_checkpoint(const fs::path& out, const ExperimentConfig& c) {
  return out / ("finetune_r" + std::to_string(c.finetune.rounds) + ".ckpt");
}

std::vector<Series> loss_series(const std::vector<MetricRow>& rows) {
  std::map<std::size_t, Series> by_client;
  for (const auto& r : rows) {
    if (!r.client) continue;
    auto& s = by_client[*r.client];
    s.name = "client " + std::to_string(*r.client);
    s.points.emplace_back(static_cast<double>(r.round), r.loss);
  }
  std::vector<Series> out;
  for (auto& [k, s] : by_client) out.push_back(std::move(s));
  return out;
}

double final_accuracy(const std::vector<MetricRow>& rows) {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->accuracy) return *it->accuracy;
  return 0.0;
}

// ---- commands ------------------------------------------------------------------

void cmd_partition(const ExperimentConfig& c, const fs::path& out) {
  const auto w = load_workspace(c, c.label_fraction);
  write_manifest(out / "manifest.csv", w.partition);
  write_labels(out / "labels.csv", w.train, &w.partition);
  const auto report = heterogeneity_report(w.partition, w.train);
  write_csv(out / "heterogeneity.csv", [&](std::ostream& o) { write_heterogeneity_csv(o, report); });
  write_text(out / "heterogeneity.svg",
             stacked_bars("Class histogram per client (skew " + csv::format_number(report.skew) + ")",
                          "client", report.counts));
  log(LogLevel::info, "partition skew score " + csv::format_number(report.skew));
}

template <typename T>
void cmd_pretrain(const ExperimentConfig& c, const fs::path& out) {
  if (!c.pretrain_enabled) throw ContractViolation("pretrain: pretrain.method is none");
  const auto w = load_workspace(c, c.label_fraction);
  const auto t = pretrain<T>(c, w, c.pretrain);
  save_checkpoint(pretrain_checkpoint(out, c), to_checkpoint(t, c.pretrain.rounds, c.seed));
  write_csv(out / "metrics_pretrain.csv", [&](std::ostream& o) { write_metrics_csv(o, t.log); });
  write_text(out / "loss_pretrain.svg",
             line_chart("Pre-training loss", "round", "loss", loss_series(t.log)));
}

template <typename T>
void cmd_finetune(const ExperimentConfig& c, const fs::path& out) {
  const auto w = load_workspace(c, c.label_fraction);
  std::optional<ModelParams<T>> pre;
  if (c.finetune_from_pretrained) {
    const auto path = pretrain_checkpoint(out, c);
    if (!fs::exists(path))
      throw ContractViolation("finetune: " + path.string() + " not found (run pretrain first)");
    pre = load_checkpoint(path).params<T>();
  }
  const auto t = finetune<T>(c, w, c.finetune, pre ? &*pre : nullptr);
  save_checkpoint(finetune_checkpoint(out, c), to_checkpoint(t, c.finetune.rounds, c.seed));
  write_csv(out / "metrics_finetune.csv", [&](std::ostream& o) { write_metrics_csv(o, t.log); });
  write_text(out / "loss_finetune.svg",
             line_chart("Fine-tuning loss", "round", "loss", loss_series(t.log)));
  Series acc{"test accuracy", {}};
  for (const auto& r : t.log)
    if (r.accuracy) acc.points.emplace_back(static_cast<double>(r.round), *r.accuracy);
  write_text(out / "accuracy_finetune.svg",
             line_chart("Test accuracy", "round", "accuracy", {acc}));
  log(LogLevel::info, "final test accuracy " + csv::format_number(final_accuracy(t.log)));
}

template <typename T>
void cmd_evaluate(const ExperimentConfig& c, const fs::path& out) {
  const auto path = finetune_checkpoint(out, c);
  if (!fs::exists(path))
    throw ContractViolation("evaluate: " + path.string() + " not found (run finetune first)");
  const auto params = load_checkpoint(path).params<T>();
  const auto w = load_workspace(c, c.label_fraction);
  const auto ev = evaluate(params, w.test, c.geometry, c.dims);
  const auto f1 = f1_per_class(ev.predictions, w.test.labels, c.dims.classes);
  const auto cm = confusion_matrix(ev.predictions, w.test.labels, c.dims.classes);
  write_csv(out / "evaluation.csv", [&](std::ostream& o) {
    csv::write_row(o, {"metric", "class_id", "value"});
    csv::write_row(o, {"accuracy", "", csv::format_number(ev.accuracy)});
    csv::write_row(o, {"f1_macro", "", csv::format_number(f1.macro)});
    csv::write_row(o, {"loss", "", csv::format_number(ev.loss)});
    for (std::size_t j = 0; j < c.dims.classes; ++j) {
      csv::write_row(o, {"f1", csv::format_number(std::uint64_t{j}), csv::format_number(f1.per_class[j])});
      csv::write_row(o, {"f1_absent", csv::format_number(std::uint64_t{j}), f1.absent[j] ? "1" : "0"});
    }
  });
  write_csv(out / "confusion.csv", [&](std::ostream& o) {
    csv::write_row(o, {"true_class", "predicted_class", "count"});
    for (std::size_t t = 0; t < cm.classes; ++t)
      for (std::size_t p = 0; p < cm.classes; ++p)
        csv::write_row(o, {csv::format_number(std::uint64_t{t}), csv::format_number(std::uint64_t{p}),
                           csv::format_number(std::uint64_t{cm.at(t, p)})});
  });
  log(LogLevel::info, "accuracy " + csv::format_number(ev.accuracy) + ", macro F1 " +
                          csv::format_number(f1.macro));
}

bool cmd_gradcheck(const ExperimentConfig& c, const fs::path& out) {
  const auto results = gradient_suite(c.seed);
  bool ok = true;
  write_csv(out / "gradcheck.csv", [&](std::ostream& o) {
    csv::write_row(o, {"check", "max_rel_error", "coords", "passed"});
    for (const auto& r : results) {
      const bool pass = r.result.max_rel_error < 1e-4;
      ok = ok && pass;
      csv::write_row(o, {r.name, csv::format_number(r.result.max_rel_error),
                         csv::format_number(std::uint64_t{r.result.coords_checked}), pass ? "1" : "0"});
      log(pass ? LogLevel::debug : LogLevel::error,
          r.name + ": " + csv::format_number(r.result.max_rel_error));
    }
  });
  log(LogLevel::info, ok ? "gradient checks passed" : "gradient checks FAILED");
  return ok;
}

Method method_from(const std::string& name) { return name == "beit" ? Method::beit : Method::mae; }

template <typename T>
void cmd_ablate_mask(const ExperimentConfig& c, const fs::path& out) {
  const auto w = load_workspace(c, c.label_fraction);
  std::vector<std::vector<std::string>> rows;
  for (const auto& m : c.ablation_methods) {
    std::vector<std::string> row{c.name, m};
    for (const double ratio : c.mask_ratios) {
      FedConfig pc = c.pretrain;
      pc.method = method_from(m);
      pc.mask_ratio = ratio;
      const auto pre = pretrain<T>(c, w, pc);
      const auto ft = finetune<T>(c, w, c.finetune, &pre.params);
      row.push_back(csv::format_number(100.0 * final_accuracy(ft.log)));
    }
    rows.push_back(std::move(row));
  }
  write_csv(out / "mask_ablation.csv", [&](std::ostream& o) {
    std::vector<std::string> header{"dataset", "method"};
    for (const double r : c.mask_ratios) header.push_back(csv::format_number(100.0 * r) + "%");
    csv::write_row(o, header);
    for (const auto& r : rows) csv::write_row(o, r);
  });
}

template <typename T>
void cmd_ablate_rounds(const ExperimentConfig& c, const fs::path& out) {
  const auto w = load_workspace(c, c.label_fraction);
  const Method method = c.pretrain_enabled ? c.pretrain.method : Method::mae;
  const std::string label = std::string("fed-") + to_string(method);
  const auto full = init_params<T>(c.geometry, c.dims, c.seed);
  const auto pretrain_size = full.subset(trained_prefixes(StageKind::pretrain, method)).total_numel();
  const auto finetune_size =
      full.subset(trained_prefixes(StageKind::finetune, Method::supervised)).total_numel();

  struct Row {
    std::string method;
    std::size_t tp, tf;
    double accuracy;
  };
  std::vector<Row> rows;
  for (const auto tp : c.pretrain_rounds_grid) {
    FedConfig pc = c.pretrain;
    pc.method = method;
    pc.rounds = tp;
    const auto pre = pretrain<T>(c, w, pc);
    const auto ft = finetune<T>(c, w, c.finetune, &pre.params);
    rows.push_back({label, tp, c.finetune.rounds, final_accuracy(ft.log)});
  }
  for (const auto tf : c.scratch_rounds_grid) {
    FedConfig fc = c.finetune;
    fc.rounds = tf;
    const auto ft = finetune<T>(c, w, fc, nullptr);
    rows.push_back({"scratch", 0, tf, final_accuracy(ft.log)});
  }
  write_csv(out / "rounds_ablation.csv", [&](std::ostream& o) {
    csv::write_row(o, {"method", "pretrain_rounds", "finetune_rounds", "total_rounds", "accuracy",
                       "communicated_params"});
    for (const auto& r : rows) {
      const auto cost = r.tp * pretrain_size + r.tf * finetune_size;
      csv::write_row(o, {r.method, csv::format_number(std::uint64_t{r.tp}),
                         csv::format_number(std::uint64_t{r.tf}),
                         csv::format_number(std::uint64_t{r.tp + r.tf}),
                         csv::format_number(r.accuracy), csv::format_number(std::uint64_t{cost})});
    }
  });
  Series ours{label, {}};
  Series scratch{"scratch", {}};
  for (const auto& r : rows)
    (r.method == "scratch" ? scratch : ours)
        .points.emplace_back(static_cast<double>(r.tp + r.tf), r.accuracy);
  write_text(out / "rounds_ablation.svg",
             line_chart("Accuracy vs total rounds", "total rounds", "accuracy", {ours, scratch}));
}

template <typename T>
void cmd_compare(const ExperimentConfig& c, const fs::path& out) {
  std::optional<Trained<T>> pre;
  struct Row {
    double fraction;
    std::string method;
    double accuracy;
    double f1;
  };
  std::vector<Row> rows;
  for (const double fraction : c.label_fractions) {
    const auto w = load_workspace(c, fraction);
    for (const auto& m : c.compare_methods) {
      FedConfig fc = c.finetune;
      const ModelParams<T>* init = nullptr;
      if (m == "fedavg") {
        if (!c.pretrain_enabled) throw ContractViolation("compare: fedavg needs a pre-training method");
        if (!pre) pre = pretrain<T>(c, w, c.pretrain);
        init = &pre->params;
        fc.mu = 0.0;
        fc.semi_fl = false;
      } else if (m == "fedprox") {
        fc.mu = c.finetune.mu > 0.0 ? c.finetune.mu : 0.001;
        fc.semi_fl = false;
      } else if (m == "semifl") {
        fc.mu = 0.0;
        fc.semi_fl = true;
      } else {
        fc.mu = 0.0;
        fc.semi_fl = false;
      }
      const auto ft = finetune<T>(c, w, fc, init);
      double f1 = 0.0;
      for (auto it = ft.log.rbegin(); it != ft.log.rend(); ++it)
        if (it->f1_macro) {
          f1 = *it->f1_macro;
          break;
        }
      rows.push_back({fraction, m, final_accuracy(ft.log), f1});
    }
  }
  write_csv(out / "compare.csv", [&](std::ostream& o) {
    csv::write_row(o, {"label_fraction", "method", "accuracy", "f1_macro"});
    for (const auto& r : rows)
      csv::write_row(o, {csv::format_number(r.fraction), r.method, csv::format_number(r.accuracy),
                         csv::format_number(r.f1)});
  });
}

void write_provenance(const std::string& command, const ExperimentConfig& c,
                      const std::string& normalized, const fs::path& out) {
  write_text(out / "config.ini", normalized);
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = "config.ini";
  j["seed"] = c.seed;
  j["precision"] = c.precision;
  j["formats"] = {{"checkpoint", {{"magic", "FMIM"}, {"version", kCheckpointVersion}}},
                  {"images", {{"magic", "FIMG"}, {"version", 1}}},
                  {"metrics_csv", "round,stage,client_id,num_samples,loss,lr,accuracy,f1_macro"},
                  {"manifest_csv", "client_id,dataset_index"},
                  {"labels_csv", "index,label,client_id"}};
  write_text(out / "provenance.json", j.dump(2) + "\n");
}

template <typename T>
bool dispatch(const std::string& command, const ExperimentConfig& c, const fs::path& out) {
  if (command == "partition") {
    cmd_partition(c, out);
  } else if (command == "pretrain") {
    cmd_pretrain<T>(c, out);
  } else if (command == "finetune") {
    cmd_finetune<T>(c, out);
  } else if (command == "evaluate") {
    cmd_evaluate<T>(c, out);
  } else if (command == "gradcheck") {
    return cmd_gradcheck(c, out);
  } else if (command == "ablate-mask") {
    cmd_ablate_mask<T>(c, out);
  } else if (command == "ablate-rounds") {
    cmd_ablate_rounds<T>(c, out);
  } else if (command == "compare") {
    cmd_compare<T>(c, out);
  } else if (command == "run") {
    for (const auto& stage : c.stages) {
      if (stage == "pretrain" && !c.pretrain_enabled) continue;
      log(LogLevel::info, "stage " + stage);
      if (!dispatch<T>(stage, c, out)) return false;
    }
  } else {
    throw ContractViolation("unknown command " + command);
  }
  return true;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "run", "partition", "pretrain", "finetune", "evaluate", "gradcheck", "ablate-mask",
      "ablate-rounds", "compare"};
  return names;
}

int run_command(const std::string& command, const ExperimentConfig& config,
                const std::string& normalized, const fs::path& out) {
  try {
    fs::create_directories(out);
    write_provenance(command, config, normalized, out);
    const bool ok = config.precision == 64 ? dispatch<double>(command, config, out)
                                           : dispatch<float>(command, config, out);
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    log(LogLevel::error, command + ": " + e.what());
    std::ofstream err(out / "error.txt", std::ios::trunc);
    if (err) err << "command: " << command << "\nerror: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fmim::cli
