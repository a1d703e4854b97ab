#include "fmim/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "fmim/common.hpp"
#include "fmim/csv.hpp"

namespace fmim::cli {
namespace {

enum class Kind { uint, real, boolean, text, choice, real_list, uint_list, choice_list };

struct KeyDef {
  const char* section;
  const char* key;
  Kind kind;
  const char* fallback;  // nullptr: required
  std::vector<std::string> choices;
  const char* help;
};

const std::vector<KeyDef>& schema() {
  static const std::vector<KeyDef> defs = {
      {"run", "seed", Kind::uint, nullptr, {}, "master seed"},
      {"run", "precision", Kind::choice, "32", {"32", "64"}, "floating-point width of training"},
      {"run", "threads", Kind::uint, "1", {}, "client-update worker threads (speed only)"},
      {"run", "stages", Kind::choice_list, "partition,pretrain,finetune,evaluate",
       {"partition", "pretrain", "finetune", "evaluate"}, "stages executed by `run`, in order"},
      {"run", "name", Kind::text, "synthetic", {}, "dataset label used in summary tables"},

      {"data", "source", Kind::choice, nullptr, {"synthetic", "files"}, "synthetic generator or image files"},
      {"data", "train_images", Kind::text, "", {}, "FIMG container (files source)"},
      {"data", "train_labels", Kind::text, "", {}, "labels CSV for train_images"},
      {"data", "test_images", Kind::text, "", {}, "FIMG container (files source)"},
      {"data", "test_labels", Kind::text, "", {}, "labels CSV for test_images"},
      {"data", "public_images", Kind::text, "", {}, "optional tokenizer pool (defaults to the training set)"},
      {"data", "classes", Kind::uint, "2", {}, "number of classes (synthetic)"},
      {"data", "train_per_class", Kind::uint, "300", {}, "training images per class (synthetic)"},
      {"data", "test_per_class", Kind::uint, "100", {}, "test images per class (synthetic)"},
      {"data", "height", Kind::uint, "16", {}, "image height"},
      {"data", "width", Kind::uint, "16", {}, "image width"},
      {"data", "channels", Kind::uint, "1", {}, "image channels"},
      {"data", "noise", Kind::real, "0.15", {}, "pixel noise standard deviation (synthetic)"},
      {"data", "phase_spread", Kind::real, "0.6", {}, "grating phase range in turns (synthetic)"},

      {"model", "patch", Kind::uint, "4", {}, "patch side in pixels"},
      {"model", "dim", Kind::uint, "32", {}, "encoder width"},
      {"model", "depth", Kind::uint, "2", {}, "encoder blocks"},
      {"model", "heads", Kind::uint, "4", {}, "encoder attention heads"},
      {"model", "mlp_ratio", Kind::uint, "4", {}, "hidden width multiplier of the MLPs"},
      {"model", "decoder_dim", Kind::uint, "32", {}, "pixel decoder width"},
      {"model", "decoder_depth", Kind::uint, "1", {}, "pixel decoder blocks"},
      {"model", "decoder_heads", Kind::uint, "4", {}, "pixel decoder attention heads"},
      {"model", "vocab", Kind::uint, "64", {}, "visual-token codebook size"},
      {"model", "init_std", Kind::real, "0.02", {}, "initialization standard deviation"},

      {"partition", "clients", Kind::uint, nullptr, {}, "number of clients N"},
      {"partition", "alpha", Kind::real, nullptr, {}, "Dirichlet concentration"},
      {"partition", "iid", Kind::boolean, "false", {}, "class-balanced split instead of Dirichlet"},
      {"partition", "resample_empty", Kind::boolean, "false", {}, "redraw partitions with empty clients"},
      {"partition", "manifest", Kind::text, "", {}, "read the partition from a manifest CSV"},
      {"partition", "label_fraction", Kind::real, "1", {}, "labeled share per client and class"},

      {"pretrain", "method", Kind::choice, nullptr, {"mae", "beit", "none"}, "masked-image-modeling objective"},
      {"pretrain", "rounds", Kind::uint, nullptr, {}, "communication rounds T"},
      {"pretrain", "selected", Kind::uint, "0", {}, "clients per round K (0: all)"},
      {"pretrain", "local_epochs", Kind::uint, "1", {}, "local epochs E"},
      {"pretrain", "batch", Kind::uint, "32", {}, "batch size B"},
      {"pretrain", "lr", Kind::real, "0.0015", {}, "base learning rate"},
      {"pretrain", "floor_lr", Kind::real, "0", {}, "final learning rate of the cosine decay"},
      {"pretrain", "warmup", Kind::uint, "0", {}, "warmup length in local epochs"},
      {"pretrain", "weight_decay", Kind::real, "0.05", {}, "decoupled weight decay"},
      {"pretrain", "mask_ratio", Kind::real, "auto", {}, "mask ratio (auto: 0.75 mae, 0.4 beit)"},
      {"pretrain", "min_block", Kind::uint, "4", {}, "smallest block area (beit)"},
      {"pretrain", "max_aspect", Kind::real, "3", {}, "largest block aspect ratio (beit)"},
      {"pretrain", "tokenizer_iterations", Kind::uint, "50", {}, "k-means iterations (beit)"},
      {"pretrain", "aug_scale_lo", Kind::real, "1", {}, "smallest rescale factor"},
      {"pretrain", "aug_scale_hi", Kind::real, "1.25", {}, "largest rescale factor"},
      {"pretrain", "aug_flip", Kind::real, "0.5", {}, "horizontal flip probability"},
      {"pretrain", "aug_rotation", Kind::real, "0", {}, "rotation range in degrees"},
      {"pretrain", "aug_jitter", Kind::real, "0.2", {}, "brightness/contrast jitter"},
      {"pretrain", "aug_grayscale", Kind::real, "0", {}, "grayscale probability"},

      {"finetune", "rounds", Kind::uint, nullptr, {}, "communication rounds T"},
      {"finetune", "init", Kind::choice, "pretrained", {"pretrained", "scratch"}, "encoder initialization"},
      {"finetune", "selected", Kind::uint, "0", {}, "clients per round K (0: all)"},
      {"finetune", "local_epochs", Kind::uint, "1", {}, "local epochs E"},
      {"finetune", "batch", Kind::uint, "32", {}, "batch size B"},
      {"finetune", "lr", Kind::real, "0.001", {}, "base learning rate"},
      {"finetune", "floor_lr", Kind::real, "0", {}, "final learning rate of the cosine decay"},
      {"finetune", "warmup", Kind::uint, "0", {}, "warmup length in local epochs"},
      {"finetune", "weight_decay", Kind::real, "0.05", {}, "decoupled weight decay"},
      {"finetune", "mu", Kind::real, "0", {}, "FedProx coefficient (0 disables)"},
      {"finetune", "semi_fl", Kind::boolean, "false", {}, "add the unlabeled consistency client"},
      {"finetune", "semifl_threshold", Kind::real, "0", {}, "pseudo-label confidence threshold"},
      {"finetune", "eval_interval", Kind::uint, "10", {}, "rounds between test evaluations (0: last only)"},
      {"finetune", "aug_scale_lo", Kind::real, "1", {}, "smallest rescale factor"},
      {"finetune", "aug_scale_hi", Kind::real, "1.2", {}, "largest rescale factor"},
      {"finetune", "aug_flip", Kind::real, "0.5", {}, "horizontal flip probability"},
      {"finetune", "aug_rotation", Kind::real, "10", {}, "rotation range in degrees"},
      {"finetune", "aug_jitter", Kind::real, "0", {}, "brightness/contrast jitter"},
      {"finetune", "aug_grayscale", Kind::real, "0", {}, "grayscale probability"},
      {"finetune", "semifl_aug_flip", Kind::real, "0.5", {}, "consistency view: flip probability"},
      {"finetune", "semifl_aug_rotation", Kind::real, "15", {}, "consistency view: rotation degrees"},
      {"finetune", "semifl_aug_jitter", Kind::real, "0.2", {}, "consistency view: jitter"},

      {"ablation", "mask_ratios", Kind::real_list, "0.3,0.4,0.5,0.6,0.7", {}, "ablate-mask grid"},
      {"ablation", "methods", Kind::choice_list, "beit,mae", {"mae", "beit"}, "ablate-mask methods"},
      {"ablation", "pretrain_rounds", Kind::uint_list, "200,500,1000", {}, "ablate-rounds pre-training grid"},
      {"ablation", "scratch_rounds", Kind::uint_list, "200,500,1000,1100", {}, "ablate-rounds scratch fine-tuning grid"},
      {"ablation", "compare_methods", Kind::choice_list, "fedavg,fedprox,semifl,scratch",
       {"fedavg", "fedprox", "semifl", "scratch"}, "compare grid"},
      {"ablation", "label_fractions", Kind::real_list, "0.1,0.3,0.7,1", {}, "compare label fractions"},
  };
  return defs;
}

std::string full_key(const KeyDef& d) { return std::string(d.section) + "." + d.key; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// Returns the canonical spelling or an error message.
std::optional<std::string> canonical_scalar(Kind kind, const std::string& raw,
                                            const std::vector<std::string>& choices,
                                            std::string& error) {
  switch (kind) {
    case Kind::uint:
    case Kind::uint_list:
      if (const auto v = csv::parse_uint(raw)) return csv::format_number(*v);
      error = "expected a non-negative integer, got '" + raw + "'";
      return std::nullopt;
    case Kind::real:
    case Kind::real_list:
      if (const auto v = csv::parse_double(raw); v && std::isfinite(*v)) return csv::format_number(*v);
      error = "expected a finite number, got '" + raw + "'";
      return std::nullopt;
    case Kind::boolean:
      if (raw == "true" || raw == "yes" || raw == "1") return std::string("true");
      if (raw == "false" || raw == "no" || raw == "0") return std::string("false");
      error = "expected true or false, got '" + raw + "'";
      return std::nullopt;
    case Kind::choice:
    case Kind::choice_list:
      if (std::find(choices.begin(), choices.end(), raw) != choices.end()) return raw;
      {
        std::string list;
        for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
        error = "expected one of {" + list + "}, got '" + raw + "'";
      }
      return std::nullopt;
    case Kind::text:
      return raw;
  }
  return std::nullopt;
}

std::optional<std::string> canonical(const KeyDef& d, const std::string& raw, std::string& error) {
  if (d.kind == Kind::real_list || d.kind == Kind::uint_list || d.kind == Kind::choice_list) {
    std::string out;
    for (const auto& item : split_list(raw)) {
      const auto c = canonical_scalar(d.kind, item, d.choices, error);
      if (!c) return std::nullopt;
      out += (out.empty() ? "" : ",") + *c;
    }
    return out;
  }
  return canonical_scalar(d.kind, raw, d.choices, error);
}

struct Values {
  std::map<std::string, std::string> canon;
  std::map<std::string, std::size_t> lines;

  const std::string& str(const std::string& key) const { return canon.at(key); }
  std::size_t line(const std::string& key) const {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  }
  std::uint64_t u(const std::string& key) const { return *csv::parse_uint(str(key)); }
  double r(const std::string& key) const { return *csv::parse_double(str(key)); }
  bool b(const std::string& key) const { return str(key) == "true"; }
  std::vector<std::string> list(const std::string& key) const { return split_list(str(key)); }
};

AugmentPolicy policy_from(const Values& v, const std::string& section, const ImageGeometry& g) {
  AugmentPolicy p;
  p.scale_lo = v.r(section + ".aug_scale_lo");
  p.scale_hi = v.r(section + ".aug_scale_hi");
  p.crop_height = g.height;
  p.crop_width = g.width;
  p.flip_probability = v.r(section + ".aug_flip");
  p.rotation_degrees = v.r(section + ".aug_rotation");
  p.color_jitter = v.r(section + ".aug_jitter");
  p.grayscale_probability = v.r(section + ".aug_grayscale");
  if (p.scale_lo == 1.0 && p.scale_hi == 1.0 && p.flip_probability == 0.0 &&
      p.rotation_degrees == 0.0 && p.color_jitter == 0.0 && p.grayscale_probability == 0.0)
    return AugmentPolicy::identity();
  return p;
}

FedConfig stage_from(const Values& v, const std::string& s, StageKind stage, std::size_t clients) {
  FedConfig c;
  c.clients = clients;
  const auto k = v.u(s + ".selected");
  c.selected = k == 0 ? clients : k;
  c.local_epochs = v.u(s + ".local_epochs");
  c.rounds = v.u(s + ".rounds");
  c.batch = v.u(s + ".batch");
  c.stage = stage;
  c.base_lr = v.r(s + ".lr");
  c.floor_lr = v.r(s + ".floor_lr");
  c.warmup = v.u(s + ".warmup");
  c.weight_decay = v.r(s + ".weight_decay");
  return c;
}

class Checker {
 public:
  Checker(const Values& v, std::vector<ConfigIssue>& issues) : v_(v), issues_(issues) {}
  void check(bool ok, const std::string& key, const std::string& message) {
    if (!ok) issues_.push_back({v_.line(key), key, message});
  }

 private:
  const Values& v_;
  std::vector<ConfigIssue>& issues_;
};

ExperimentConfig build(const Values& v, std::vector<ConfigIssue>& issues) {
  Checker check(v, issues);
  ExperimentConfig c;
  c.seed = v.u("run.seed");
  c.precision = static_cast<unsigned>(v.u("run.precision"));
  c.threads = v.u("run.threads");
  check.check(c.threads >= 1, "run.threads", "must be at least 1");
  c.stages = v.list("run.stages");
  check.check(!c.stages.empty(), "run.stages", "at least one stage required");
  c.name = v.str("run.name");

  c.source = v.str("data.source");
  c.synth.classes = v.u("data.classes");
  c.synth.train_per_class = v.u("data.train_per_class");
  c.synth.test_per_class = v.u("data.test_per_class");
  c.synth.shape = {v.u("data.height"), v.u("data.width"), v.u("data.channels")};
  c.synth.noise = v.r("data.noise");
  c.synth.phase_spread = v.r("data.phase_spread");
  c.synth.seed = c.seed;
  c.train_images = v.str("data.train_images");
  c.train_labels = v.str("data.train_labels");
  c.test_images = v.str("data.test_images");
  c.test_labels = v.str("data.test_labels");
  c.public_images = v.str("data.public_images");
  if (c.source == "files") {
    for (const char* key : {"data.train_images", "data.train_labels", "data.test_images", "data.test_labels"})
      check.check(!v.str(key).empty(), key, "required when data.source = files");
  } else {
    check.check(c.synth.classes >= 2, "data.classes", "at least two classes required");
    check.check(c.synth.train_per_class >= 1, "data.train_per_class", "must be at least 1");
    check.check(c.synth.test_per_class >= 1, "data.test_per_class", "must be at least 1");
    check.check(c.synth.noise >= 0.0, "data.noise", "must be non-negative");
    check.check(c.synth.phase_spread >= 0.0 && c.synth.phase_spread <= 1.0, "data.phase_spread",
                "must lie in [0, 1]");
  }

  c.geometry = {c.synth.shape.height, c.synth.shape.width, c.synth.shape.channels, v.u("model.patch")};
  check.check(c.geometry.height >= 1 && c.geometry.width >= 1 && c.geometry.channels >= 1,
              "data.height", "image extents must be positive");
  check.check(c.geometry.patch >= 1 && c.geometry.height % std::max<std::size_t>(1, c.geometry.patch) == 0 &&
                  c.geometry.width % std::max<std::size_t>(1, c.geometry.patch) == 0,
              "model.patch", "patch side must divide data.height and data.width");
  c.dims.dim = v.u("model.dim");
  c.dims.depth = v.u("model.depth");
  c.dims.heads = v.u("model.heads");
  c.dims.mlp_ratio = v.u("model.mlp_ratio");
  c.dims.decoder_dim = v.u("model.decoder_dim");
  c.dims.decoder_depth = v.u("model.decoder_depth");
  c.dims.decoder_heads = v.u("model.decoder_heads");
  c.dims.vocab = v.u("model.vocab");
  c.dims.classes = c.synth.classes;
  c.dims.init_std = v.r("model.init_std");
  check.check(c.dims.heads >= 1 && c.dims.dim % std::max<std::size_t>(1, c.dims.heads) == 0 && c.dims.dim >= 1,
              "model.heads", "model.dim must be a positive multiple of model.heads");
  check.check(c.dims.decoder_heads >= 1 && c.dims.decoder_dim >= 1 &&
                  c.dims.decoder_dim % std::max<std::size_t>(1, c.dims.decoder_heads) == 0,
              "model.decoder_heads", "model.decoder_dim must be a positive multiple of model.decoder_heads");
  check.check(c.dims.depth >= 1, "model.depth", "must be at least 1");
  check.check(c.dims.mlp_ratio >= 1, "model.mlp_ratio", "must be at least 1");
  check.check(c.dims.vocab >= 2, "model.vocab", "must be at least 2");
  check.check(c.dims.init_std > 0.0, "model.init_std", "must be positive");

  c.partition.clients = v.u("partition.clients");
  c.partition.alpha = v.r("partition.alpha");
  c.partition.seed = c.seed;
  c.partition.resample_empty = v.b("partition.resample_empty");
  c.iid = v.b("partition.iid");
  c.manifest = v.str("partition.manifest");
  c.label_fraction = v.r("partition.label_fraction");
  check.check(c.partition.clients >= 1, "partition.clients", "at least one client required");
  check.check(c.partition.alpha > 0.0, "partition.alpha", "must be positive");
  check.check(c.label_fraction > 0.0 && c.label_fraction <= 1.0, "partition.label_fraction",
              "must lie in (0, 1]");

  const std::size_t n = std::max<std::size_t>(1, c.partition.clients);
  const std::size_t patches = c.geometry.patch >= 1 ? c.geometry.patch_count() : 0;
  const auto method = v.str("pretrain.method");
  c.pretrain_enabled = method != "none";
  c.pretrain = stage_from(v, "pretrain", StageKind::pretrain, n);
  c.pretrain.method = method == "beit" ? Method::beit : Method::mae;
  c.pretrain.mask_ratio = v.r("pretrain.mask_ratio");
  c.pretrain.block.min_block = v.u("pretrain.min_block");
  c.pretrain.block.max_aspect = v.r("pretrain.max_aspect");
  c.pretrain.augment = policy_from(v, "pretrain", c.geometry);
  c.pretrain.seed = c.seed;
  c.tokenizer_iterations = v.u("pretrain.tokenizer_iterations");
  const double gamma = c.pretrain.mask_ratio;
  const std::size_t masked = round_half_up(gamma, patches);
  check.check(gamma > 0.0 && gamma < 1.0 && masked >= 1 && masked + 1 <= patches,
              "pretrain.mask_ratio", "must mask at least one and leave at least one patch visible");
  if (c.pretrain.method == Method::beit)
    check.check(static_cast<double>(c.pretrain.block.min_block) <= gamma * static_cast<double>(patches),
                "pretrain.min_block", "exceeds the number of patches to mask");
  check.check(c.pretrain.block.min_block >= 1, "pretrain.min_block", "must be at least 1");
  check.check(c.pretrain.block.max_aspect >= 1.0, "pretrain.max_aspect", "must be at least 1");

  c.finetune = stage_from(v, "finetune", StageKind::finetune, n);
  c.finetune.method = Method::supervised;
  c.finetune.mu = v.r("finetune.mu");
  c.finetune.semi_fl = v.b("finetune.semi_fl");
  c.finetune.semifl_threshold = v.r("finetune.semifl_threshold");
  c.finetune.eval_interval = v.u("finetune.eval_interval");
  c.finetune.augment = policy_from(v, "finetune", c.geometry);
  c.finetune.semifl_augment = AugmentPolicy::identity();
  c.finetune.semifl_augment.flip_probability = v.r("finetune.semifl_aug_flip");
  c.finetune.semifl_augment.rotation_degrees = v.r("finetune.semifl_aug_rotation");
  c.finetune.semifl_augment.color_jitter = v.r("finetune.semifl_aug_jitter");
  c.finetune.seed = c.seed;
  c.finetune_from_pretrained = v.str("finetune.init") == "pretrained";
  check.check(!(c.finetune_from_pretrained && !c.pretrain_enabled), "finetune.init",
              "pretrained initialization needs a pre-training method");
  check.check(c.finetune.semifl_threshold >= 0.0 && c.finetune.semifl_threshold <= 1.0,
              "finetune.semifl_threshold", "must lie in [0, 1]");
  check.check(c.finetune.mu >= 0.0, "finetune.mu", "must be non-negative");

  for (const char* s : {"pretrain", "finetune"}) {
    const std::string sec = s;
    auto& f = sec == "pretrain" ? c.pretrain : c.finetune;
    check.check(f.selected <= n, sec + ".selected", "exceeds partition.clients");
    check.check(f.local_epochs >= 1, sec + ".local_epochs", "must be at least 1");
    check.check(f.batch >= 1, sec + ".batch", "must be at least 1");
    check.check(f.base_lr >= 0.0, sec + ".lr", "must be non-negative");
    check.check(f.floor_lr >= 0.0 && f.floor_lr <= f.base_lr, sec + ".floor_lr",
                "must lie in [0, lr]");
    check.check(f.weight_decay >= 0.0, sec + ".weight_decay", "must be non-negative");
    check.check(f.warmup <= f.rounds * f.local_epochs, sec + ".warmup",
                "exceeds rounds * local_epochs");
    const auto& p = f.augment;
    check.check(p.scale_lo >= 1.0 && p.scale_lo <= p.scale_hi, sec + ".aug_scale_lo",
                "need 1 <= aug_scale_lo <= aug_scale_hi");
    for (const char* key : {"aug_flip", "aug_grayscale"}) {
      const double prob = v.r(sec + "." + key);
      check.check(prob >= 0.0 && prob <= 1.0, sec + "." + key, "must lie in [0, 1]");
    }
    check.check(v.r(sec + ".aug_rotation") >= 0.0, sec + ".aug_rotation", "must be non-negative");
    check.check(v.r(sec + ".aug_jitter") >= 0.0 && v.r(sec + ".aug_jitter") < 1.0,
                sec + ".aug_jitter", "must lie in [0, 1)");
  }

  c.mask_ratios.clear();
  for (const auto& s : v.list("ablation.mask_ratios")) c.mask_ratios.push_back(*csv::parse_double(s));
  for (const double g : c.mask_ratios) {
    const std::size_t m = round_half_up(g, patches);
    check.check(g > 0.0 && g < 1.0 && m >= 1 && m + 1 <= patches, "ablation.mask_ratios",
                "every ratio must mask at least one and leave one patch visible");
  }
  c.ablation_methods = v.list("ablation.methods");
  for (const auto& s : v.list("ablation.pretrain_rounds")) c.pretrain_rounds_grid.push_back(*csv::parse_uint(s));
  for (const auto& s : v.list("ablation.scratch_rounds")) c.scratch_rounds_grid.push_back(*csv::parse_uint(s));
  c.compare_methods = v.list("ablation.compare_methods");
  for (const auto& s : v.list("ablation.label_fractions")) c.label_fractions.push_back(*csv::parse_double(s));
  for (const double f : c.label_fractions)
    check.check(f > 0.0 && f <= 1.0, "ablation.label_fractions", "fractions must lie in (0, 1]");
  return c;
}

}  // namespace

ConfigResult validate_config_text(const std::string& text, const Overrides& overrides) {
  ConfigResult result;
  const auto& defs = schema();
  std::map<std::string, const KeyDef*> by_key;
  std::vector<std::string> sections;
  for (const auto& d : defs) {
    by_key[full_key(d)] = &d;
    if (std::find(sections.begin(), sections.end(), d.section) == sections.end())
      sections.push_back(d.section);
  }

  std::map<std::string, std::pair<std::string, std::size_t>> raw;
  std::istringstream in(text);
  std::string line;
  std::string section;
  bool section_known = true;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    const auto t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        result.issues.push_back({number, "", "malformed section header '" + t + "'"});
        continue;
      }
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      section_known = std::find(sections.begin(), sections.end(), section) != sections.end();
      if (!section_known) result.issues.push_back({number, section, "unknown section"});
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      result.issues.push_back({number, "", "expected 'key = value', got '" + t + "'"});
      continue;
    }
    if (!section_known) continue;
    const auto key = section + "." + trim(std::string_view(t).substr(0, eq));
    const auto value = trim(std::string_view(t).substr(eq + 1));
    if (section.empty() || !by_key.count(key)) {
      result.issues.push_back({number, key, "unknown key"});
      continue;
    }
    if (raw.count(key)) {
      result.issues.push_back({number, key,
                               "duplicate key (first set on line " +
                                   std::to_string(raw[key].second) + ")"});
      continue;
    }
    raw[key] = {value, number};
  }

  for (const auto& [key, value] : overrides) {
    if (!by_key.count(key)) {
      result.issues.push_back({0, key, "unknown key in override"});
      continue;
    }
    raw[key] = {trim(value), 0};
  }

  Values values;
  const auto method_it = raw.find("pretrain.method");
  const std::string method = method_it == raw.end() ? "mae" : method_it->second.first;
  for (const auto& d : defs) {
    const auto key = full_key(d);
    std::string text_value;
    if (const auto it = raw.find(key); it != raw.end()) {
      text_value = it->second.first;
      if (it->second.second) values.lines[key] = it->second.second;
    } else if (d.fallback == nullptr) {
      result.issues.push_back({0, key, "missing required key"});
      continue;
    } else {
      text_value = d.fallback;
    }
    if (key == "pretrain.mask_ratio" && text_value == "auto")
      text_value = method == "beit" ? "0.4" : "0.75";
    std::string error;
    const auto c = canonical(d, text_value, error);
    if (!c) {
      result.issues.push_back({values.line(key), key, error});
      continue;
    }
    values.canon[key] = *c;
  }
  if (!result.issues.empty()) return result;

  auto config = build(values, result.issues);
  if (!result.issues.empty()) return result;

  std::ostringstream out;
  for (const auto& s : sections) {
    out << '[' << s << "]\n";
    for (const auto& d : defs)
      if (d.section == s) out << d.key << " = " << values.canon[full_key(d)] << '\n';
    if (s != sections.back()) out << '\n';
  }
  result.normalized = out.str();
  result.config = std::move(config);
  return result;
}

ConfigResult validate_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) {
    ConfigResult r;
    r.issues.push_back({0, "", "cannot read " + path.string()});
    return r;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return validate_config_text(ss.str(), overrides);
}

std::string format_issues(const std::vector<ConfigIssue>& issues) {
  std::string out;
  for (const auto& i : issues) {
    if (i.line) out += "line " + std::to_string(i.line) + ": ";
    if (!i.key.empty()) out += i.key + ": ";
    out += i.message + "\n";
  }
  return out;
}

std::string schema_text() {
  std::ostringstream out;
  std::string section;
  for (const auto& d : schema()) {
    if (section != d.section) {
      section = d.section;
      out << (out.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
    }
    out << "  " << d.key << " = " << (d.fallback ? d.fallback : "(required)") << "    # "
        << d.help << '\n';
  }
  return out.str();
}

}  // namespace fmim::cli
