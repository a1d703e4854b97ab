// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fmim/cli/config.hpp"
#include "fmim/cli/pipeline.hpp"
#include "fmim/data.hpp"
#include "fmim/diagnostics.hpp"
#include "fmim/eval.hpp"
#include "fmim/fed.hpp"
#include "fmim/masking.hpp"
#include "fmim/model/checkpoint.hpp"
#include "fmim/model/vit.hpp"
#include "fmim/numerics/ops.hpp"
#include "fmim/rng.hpp"

using namespace fmim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename... Args>
std::string fmt(const char* format, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- 1: gradient suite ----------------------------------------------------------

Outcome gradient_suite_check() {
  const auto t0 = Clock::now();
  const auto results = gradient_suite(20241015);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  std::set<std::string> names;
  for (const auto& r : results) {
    names.insert(r.name);
    if (r.result.max_rel_error >= worst) {
      worst = r.result.max_rel_error;
      worst_name = r.name;
    }
  }
  const bool models = names.count("model/mae_loss") && names.count("model/beit_loss");
  return {models && worst < 1e-4 && secs < 60.0,
          fmt("%zu checks, worst %s %.2e (< 1e-4), %.1f s (< 60 s)", results.size(),
              worst_name.c_str(), worst, secs)};
}

// ---- 2: one-client reduction ----------------------------------------------------

// Independent AdamW: multiplicative decay first, bias-corrected moments.
struct ReferenceAdam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;

  void update(ModelParams<double>& params, double lr) {
    auto& entries = params.entries();
    if (m.empty())
      for (const auto& e : entries) {
        m.emplace_back(e.tensor.numel(), 0.0);
        v.emplace_back(e.tensor.numel(), 0.0);
      }
    ++step;
    const double c1 = 1.0 - std::pow(beta1, double(step));
    const double c2 = 1.0 - std::pow(beta2, double(step));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto p = entries[i].tensor.mutable_data();
      const auto g = entries[i].tensor.grad();
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (entries[i].decay) p[j] *= 1.0 - lr * weight_decay;
        m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g[j];
        v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j];
        p[j] -= lr * (m[i][j] / c1) / (std::sqrt(v[i][j] / c2) + eps);
      }
    }
  }
};

double reference_lr(double base, std::size_t warmup, std::size_t total, std::size_t t) {
  if (t < warmup) return base * double(t) / double(warmup);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * double(t - warmup) / double(total - warmup)));
}

Tensor<double> reference_patches(const std::vector<std::vector<float>>& images, const ImageGeometry& g) {
  std::vector<double> rows;
  for (const auto& img : images) {
    // Row-major patches, each flattened as (dy, dx, channel).
    for (std::size_t pr = 0; pr < g.height / g.patch; ++pr)
      for (std::size_t pc = 0; pc < g.width / g.patch; ++pc)
        for (std::size_t dy = 0; dy < g.patch; ++dy)
          for (std::size_t dx = 0; dx < g.patch; ++dx)
            for (std::size_t c = 0; c < g.channels; ++c)
              rows.push_back(img[((pr * g.patch + dy) * g.width + pc * g.patch + dx) * g.channels + c]);
  }
  return Tensor<double>::constant({images.size() * g.patch_count(), g.patch_dim()}, std::move(rows));
}

double max_abs_diff(const ModelParams<double>& a, const ModelParams<double>& b) {
  double worst = 0.0;
  for (const auto& e : a.entries()) {
    const auto x = e.tensor.data();
    const auto y = b.get(e.name).data();
    for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, std::abs(x[j] - y[j]));
  }
  return worst;
}

// Largest per-step deviation between run_stage with N = K = 1 and a plain
// training loop over the same batches.
double one_client_deviation(StageKind stage) {
  const ImageGeometry g{16, 16, 1, 4};
  ModelDims d;
  d.dim = 16;
  d.depth = 1;
  d.heads = 2;
  d.mlp_ratio = 2;
  d.decoder_dim = 16;
  d.decoder_heads = 2;
  SynthOptions so;
  so.train_per_class = 10;
  so.test_per_class = 1;
  so.seed = 5;
  const auto synth = synth_dataset(so);
  const auto& train = synth.train;
  const std::size_t n = train.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  FedConfig cfg;
  cfg.clients = 1;
  cfg.selected = 1;
  cfg.local_epochs = 1;
  cfg.rounds = 50;
  cfg.batch = n;
  cfg.stage = stage;
  cfg.method = Method::mae;
  cfg.base_lr = 1e-3;
  cfg.warmup = 5;
  cfg.weight_decay = 0.05;
  cfg.mask_ratio = 0.75;
  cfg.augment.scale_hi = 1.2;
  cfg.augment.flip_probability = 0.5;
  cfg.augment.rotation_degrees = 10.0;
  cfg.persist_optimizer = true;
  cfg.seed = 7;

  auto init = init_params<double>(g, d, 3);
  StageData data{&train, nullptr, {ClientSplit{all, {}}}, nullptr, g, d};
  std::vector<ModelParams<double>> snapshots;
  RunOptions<double> options;
  options.on_round = [&](std::size_t, const ModelParams<double>& p) { snapshots.push_back(p.clone()); };
  run_stage<double>(cfg, data, init, options);

  const std::vector<std::string> prefixes =
      stage == StageKind::pretrain ? std::vector<std::string>{"enc/", "mae/"}
                                   : std::vector<std::string>{"enc/", "cls/"};
  auto w = init.subset(prefixes).clone();
  ReferenceAdam adam;
  adam.weight_decay = cfg.weight_decay;
  double worst = 0.0;
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    const std::size_t round = t + 1;
    std::vector<std::size_t> order = all;
    Rng::derive(cfg.seed, Stream::shuffle, {0, round, 0}).shuffle(std::span(order));
    std::vector<std::vector<float>> images;
    std::vector<std::size_t> labels;
    std::vector<MaskPlan> plans;
    for (std::size_t p = 0; p < n; ++p) {
      auto arng = Rng::derive(cfg.seed, Stream::augment, {0, round, 0, 0, p});
      images.push_back(augment(train.image(order[p]), train.shape, cfg.augment, arng));
      labels.push_back(train.labels[order[p]]);
      auto mrng = Rng::derive(cfg.seed, Stream::mask, {0, round, 0, 0, p});
      plans.push_back(random_mask(g.grid(), cfg.mask_ratio, mrng));
    }
    const auto patches = reference_patches(images, g);
    w.zero_grad();
    const auto loss =
        stage == StageKind::pretrain
            ? mae_loss(decode_mae(encode_mae(patches, plans, w, d), w, d),
                       ops::gather_rows(patches, masked_rows(plans)))
            : ce_loss(classify(encode_full(patches, n, g, w, d), w), labels);
    backward(loss);
    adam.update(w, reference_lr(cfg.base_lr, cfg.warmup, cfg.rounds, t));
    worst = std::max(worst, max_abs_diff(w, snapshots.at(t)));
  }
  return worst;
}

Outcome one_client_check() {
  const double pre = one_client_deviation(StageKind::pretrain);
  const double fine = one_client_deviation(StageKind::finetune);
  return {pre <= 1e-12 && fine <= 1e-12,
          fmt("50 steps each, max |diff| pre-train %.2e, fine-tune %.2e (<= 1e-12)", pre, fine)};
}

// ---- 3: aggregation oracle ------------------------------------------------------

bool bitwise_equal(const ModelParams<double>& a, const ModelParams<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a.entries()[i].tensor.data();
    const auto y = b.entries()[i].tensor.data();
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

Outcome aggregation_check() {
  Rng rng(20240301);
  double worst = 0.0;
  std::size_t permutation_failures = 0;
  for (int instance = 0; instance < 1000; ++instance) {
    const std::size_t k = 1 + rng.below(8);
    const std::size_t tensors = 1 + rng.below(3);
    std::vector<Shape> shapes;
    for (std::size_t t = 0; t < tensors; ++t) shapes.push_back({1 + rng.below(5), 1 + rng.below(7)});
    std::vector<std::size_t> ids(20);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    rng.shuffle(std::span(ids));
    std::vector<ModelParams<double>> models(k);
    std::vector<std::size_t> sizes(k);
    for (std::size_t c = 0; c < k; ++c) {
      const double scale = std::pow(10.0, rng.uniform(-2.0, 2.0));
      for (std::size_t t = 0; t < tensors; ++t) {
        std::vector<double> values(shapes[t][0] * shapes[t][1]);
        for (auto& x : values) x = scale * rng.uniform(-1.0, 1.0);
        models[c].add("t" + std::to_string(t), Tensor<double>::parameter(shapes[t], std::move(values)));
      }
      sizes[c] = 1 + rng.below(1000);
    }
    std::vector<Contribution<double>> contributions;
    for (std::size_t c = 0; c < k; ++c) contributions.push_back({ids[c], &models[c], sizes[c]});
    const auto out = aggregate<double>(contributions);

    long double total = 0;
    for (const auto s : sizes) total += s;
    for (std::size_t t = 0; t < tensors; ++t) {
      const auto got = out.get("t" + std::to_string(t)).data();
      for (std::size_t j = 0; j < got.size(); ++j) {
        long double mean = 0;
        for (std::size_t c = 0; c < k; ++c)
          mean += static_cast<long double>(sizes[c]) * models[c].get("t" + std::to_string(t)).data()[j];
        mean /= total;
        const double scale = std::max(1.0, std::abs(static_cast<double>(mean)));
        worst = std::max(worst, std::abs(got[j] - static_cast<double>(mean)) / scale);
      }
    }
    rng.shuffle(std::span(contributions));
    if (!bitwise_equal(out, aggregate<double>(contributions))) ++permutation_failures;
  }

  bool weighting = true;
  for (int i = 0; i < 200; ++i) {
    const std::size_t l = rng.below(500), u = rng.below(500), shift = rng.below(l + 1);
    weighting = weighting && stage_weight(StageKind::pretrain, l, u) == l + u &&
                stage_weight(StageKind::pretrain, l - shift, u + shift) == l + u &&
                stage_weight(StageKind::finetune, l, u) == l &&
                stage_weight(StageKind::finetune, l, u + shift) == l &&
                stage_weight(StageKind::finetune, 0, u, true) == u;
  }
  return {worst <= 1e-12 && permutation_failures == 0 && weighting,
          fmt("1000 instances, max rel error %.2e (<= 1e-12), %zu permutation mismatches, "
              "stage weighting %s",
              worst, permutation_failures, weighting ? "ok" : "WRONG")};
}

// ---- 4: masking exactness -------------------------------------------------------

bool exact_cover(const MaskPlan& plan, std::size_t patches, std::size_t expected) {
  if (plan.masked.size() != expected || plan.visible.size() != patches - expected) return false;
  if (!std::is_sorted(plan.masked.begin(), plan.masked.end()) ||
      !std::is_sorted(plan.visible.begin(), plan.visible.end()))
    return false;
  std::vector<int> seen(patches, 0);
  for (const auto i : plan.masked)
    if (i >= patches || seen[i]++) return false;
  for (const auto i : plan.visible)
    if (i >= patches || seen[i]++) return false;
  return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

std::size_t components(const MaskPlan& plan) {
  const auto rows = plan.grid.rows, cols = plan.grid.cols;
  std::vector<int> state(rows * cols, 0);  // 1 masked, 2 visited
  for (const auto i : plan.masked) state[i] = 1;
  std::size_t count = 0;
  for (std::size_t s = 0; s < state.size(); ++s) {
    if (state[s] != 1) continue;
    ++count;
    std::queue<std::size_t> q;
    q.push(s);
    state[s] = 2;
    while (!q.empty()) {
      const auto c = q.front();
      q.pop();
      const auto r = c / cols, col = c % cols;
      const std::size_t nbr[4] = {r > 0 ? c - cols : c, r + 1 < rows ? c + cols : c,
                                  col > 0 ? c - 1 : c, col + 1 < cols ? c + 1 : c};
      for (const auto x : nbr)
        if (state[x] == 1) {
          state[x] = 2;
          q.push(x);
        }
    }
  }
  return count;
}

Outcome masking_check() {
  Rng rng(4242);
  std::size_t failures = 0;
  for (int i = 0; i < 1000; ++i) {
    PatchGrid grid;
    double ratio = 0.0;
    std::size_t expected = 0;
    do {
      grid = {1 + rng.below(20), 1 + rng.below(20)};
      ratio = rng.uniform(0.1, 0.9);
      expected = static_cast<std::size_t>(std::floor(ratio * double(grid.size()) + 0.5));
    } while (grid.size() > 400 || ratio * double(grid.size()) < 1.0 || expected + 1 > grid.size());
    const auto seed = rng.next_u64();
    BlockMaskOptions block{std::min<std::size_t>(4, std::size_t(ratio * double(grid.size()))), 3.0};
    // A single row or column only holds blocks up to 1x3 at aspect 3.
    if (std::min(grid.rows, grid.cols) == 1) block.min_block = std::min<std::size_t>(block.min_block, 3);
    auto r1 = Rng::derive(seed, Stream::mask), r2 = Rng::derive(seed, Stream::mask);
    const auto a = random_mask(grid, ratio, r1), a2 = random_mask(grid, ratio, r2);
    auto b1 = Rng::derive(seed, Stream::mask), b2 = Rng::derive(seed, Stream::mask);
    const auto b = blockwise_mask(grid, ratio, b1, block), bb = blockwise_mask(grid, ratio, b2, block);
    if (!exact_cover(a, grid.size(), expected) || !exact_cover(b, grid.size(), expected) ||
        !(a == a2) || !(b == bb))
      ++failures;
  }
  double random_cc = 0.0, block_cc = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    auto r = Rng::derive(s, Stream::mask), q = Rng::derive(s, Stream::mask, {1});
    random_cc += double(components(random_mask(PatchGrid{14, 14}, 0.4, r)));
    block_cc += double(components(blockwise_mask(PatchGrid{14, 14}, 0.4, q)));
  }
  random_cc /= 1000.0;
  block_cc /= 1000.0;
  return {failures == 0 && block_cc < random_cc,
          fmt("1000 cases, %zu failures; mean components at 14x14, 0.4: block-wise %.2f < random %.2f",
              failures, block_cc, random_cc)};
}

// ---- 5: Dirichlet monotonicity --------------------------------------------------

Outcome dirichlet_check() {
  Dataset ds;
  ds.shape = {1, 1, 1};
  ds.classes = 10;
  for (std::size_t j = 0; j < 10; ++j)
    for (int i = 0; i < 100; ++i) {
      const float px = 0.0f;
      ds.push_back(std::span<const float>(&px, 1), j);
    }
  const double alphas[3] = {0.5, 1.0, 100.0};
  double mean_skew[3] = {0, 0, 0};
  bool covers = true, report_matches = true;
  for (int a = 0; a < 3; ++a) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto part = dirichlet_partition(ds, {5, alphas[a], seed, false});
      std::vector<int> seen(ds.size(), 0);
      std::vector<std::vector<double>> counts(5, std::vector<double>(10, 0.0));
      for (std::size_t k = 0; k < part.clients.size(); ++k)
        for (const auto i : part.clients[k]) {
          if (i < ds.size()) ++seen[i];
          counts[k][ds.labels[i]] += 1.0;
        }
      covers = covers && part.clients.size() == 5 &&
               std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
      double skew = 0.0;
      for (std::size_t j = 0; j < 10; ++j) {
        double top = 0.0, total = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
          top = std::max(top, counts[k][j]);
          total += counts[k][j];
        }
        skew += top / total;
      }
      skew /= 10.0;
      report_matches = report_matches && std::abs(heterogeneity_report(part, ds).skew - skew) < 1e-12;
      mean_skew[a] += skew / 20.0;
    }
  }
  return {covers && report_matches && mean_skew[0] > mean_skew[1] && mean_skew[1] > mean_skew[2],
          fmt("mean skew a=0.5 %.3f > a=1 %.3f > a=100 %.3f; covers %s, report %s", mean_skew[0],
              mean_skew[1], mean_skew[2], covers ? "ok" : "BROKEN", report_matches ? "ok" : "MISMATCH")};
}

// ---- 6 and 8: end-to-end ordering and label fractions ----------------------------

class EndToEnd {
 public:
  static constexpr std::uint64_t kSeeds[3] = {1, 2, 3};

  // Final test accuracy of fine-tuning on the given split and label fraction,
  // from the federated MAE encoder (pretrained) or from random initialization.
  double accuracy(std::uint64_t seed, bool iid, double fraction, bool pretrained) {
    const auto key = std::make_tuple(seed, iid, fraction, pretrained);
    if (const auto it = finetuned_.find(key); it != finetuned_.end()) return it->second;
    auto& w = world(seed, iid);
    FedConfig fc = base_config(seed);
    fc.stage = StageKind::finetune;
    fc.rounds = 50;
    fc.base_lr = 1e-4;
    fc.warmup = 5;
    auto init = pretrained ? encoder(seed, iid).clone() : init_params<float>(geometry_, dims_, seed);
    init.merge(init_classifier<float>(dims_));
    StageData data{&w.synth.train, &w.synth.test,
                   subsample_labels(w.partition, w.synth.train, fraction, seed), nullptr,
                   geometry_, dims_};
    const auto result = run_stage<float>(fc, data, init);
    const double acc = *result.log.back().accuracy;
    finetuned_[key] = acc;
    return acc;
  }

 private:
  struct World {
    SynthData synth;
    Partition partition;
  };

  FedConfig base_config(std::uint64_t seed) const {
    FedConfig c;
    c.clients = 5;
    c.selected = 5;
    c.local_epochs = 1;
    c.batch = 32;
    c.seed = seed;
    return c;
  }

  World& world(std::uint64_t seed, bool iid) {
    auto& w = worlds_[{seed, iid}];
    if (w.synth.train.size() == 0) {
      SynthOptions so;
      so.classes = 2;
      so.train_per_class = 300;
      so.test_per_class = 100;
      so.shape = {16, 16, 1};
      so.seed = seed;
      w.synth = synth_dataset(so);
      w.partition = iid ? iid_partition(w.synth.train, 5, seed)
                        : dirichlet_partition(w.synth.train, {5, 0.5, seed, false});
    }
    return w;
  }

  const ModelParams<float>& encoder(std::uint64_t seed, bool iid) {
    auto it = encoders_.find({seed, iid});
    if (it != encoders_.end()) return it->second;
    auto& w = world(seed, iid);
    FedConfig pc = base_config(seed);
    pc.stage = StageKind::pretrain;
    pc.method = Method::mae;
    pc.rounds = 200;
    pc.base_lr = 1.5e-3;
    pc.warmup = 20;
    pc.mask_ratio = 0.75;
    StageData data{&w.synth.train, nullptr, subsample_labels(w.partition, w.synth.train, 1.0, seed),
                   nullptr, geometry_, dims_};
    auto result = run_stage<float>(pc, data, init_params<float>(geometry_, dims_, seed));
    return encoders_.emplace(std::make_pair(seed, iid), std::move(result.params)).first->second;
  }

  ImageGeometry geometry_{16, 16, 1, 4};
  ModelDims dims_{};  // D=32, depth 2, 4 heads, 2 classes
  std::map<std::pair<std::uint64_t, bool>, World> worlds_;
  std::map<std::pair<std::uint64_t, bool>, ModelParams<float>> encoders_;
  std::map<std::tuple<std::uint64_t, bool, double, bool>, double> finetuned_;
};

EndToEnd& end_to_end() {
  static EndToEnd e;
  return e;
}

Outcome ordering_check() {
  const auto t0 = Clock::now();
  auto& e = end_to_end();
  double iid_pre = 0, iid_scr = 0, skew_pre = 0, skew_scr = 0;
  for (const auto seed : EndToEnd::kSeeds) {
    iid_pre += e.accuracy(seed, true, 1.0, true) / 3.0;
    iid_scr += e.accuracy(seed, true, 1.0, false) / 3.0;
    skew_pre += e.accuracy(seed, false, 1.0, true) / 3.0;
    skew_scr += e.accuracy(seed, false, 1.0, false) / 3.0;
  }
  const double secs = seconds_since(t0);
  const bool a = iid_pre >= 0.90;
  const bool b = skew_pre - skew_scr >= 0.03;
  const bool c = (iid_pre - skew_pre) < (iid_scr - skew_scr);
  return {a && b && c && secs < 1800.0,
          fmt("(a) IID pre-trained %.1f%% (>= 90) %s; (b) a=0.5 pre-trained %.1f%% vs scratch %.1f%% "
              "(gap >= 3) %s; (c) IID->a=0.5 drop %.1f vs %.1f %s; %.0f s",
              100 * iid_pre, a ? "ok" : "no", 100 * skew_pre, 100 * skew_scr, b ? "ok" : "no",
              100 * (iid_pre - skew_pre), 100 * (iid_scr - skew_scr), c ? "ok" : "no", secs)};
}

Outcome label_fraction_check() {
  auto& e = end_to_end();
  std::string table;
  double pre_low = 0, scr_low = 0;
  for (const double fraction : {0.1, 0.3, 0.7, 1.0}) {
    double pre = 0, scr = 0;
    for (const auto seed : EndToEnd::kSeeds) {
      pre += e.accuracy(seed, true, fraction, true) / 3.0;
      scr += e.accuracy(seed, true, fraction, false) / 3.0;
    }
    if (fraction == 0.1) {
      pre_low = pre;
      scr_low = scr;
    }
    table += fmt(" %.1f:%.1f/%.1f", fraction, 100 * pre, 100 * scr);
  }
  return {pre_low - scr_low >= 0.05,
          fmt("fraction:pre-trained/scratch%s; gap at 0.1 = %.1f points (>= 5)", table.c_str(),
              100 * (pre_low - scr_low))};
}

// ---- 7: FedProx -----------------------------------------------------------------

Outcome fedprox_check() {
  const ImageGeometry g{16, 16, 1, 4};
  ModelDims d;
  d.dim = 16;
  d.depth = 1;
  d.heads = 2;
  SynthOptions so;
  so.train_per_class = 30;
  so.test_per_class = 10;
  so.seed = 11;
  const auto synth = synth_dataset(so);
  const auto part = dirichlet_partition(synth.train, {3, 0.5, 11, false});
  const StageData data{&synth.train, &synth.test, subsample_labels(part, synth.train, 1.0, 11), nullptr, g, d};

  FedConfig avg;
  avg.clients = 3;
  avg.selected = 3;
  avg.rounds = 4;
  avg.batch = 8;
  avg.stage = StageKind::finetune;
  avg.seed = 11;
  avg.eval_interval = 1;
  FedConfig prox = avg;
  prox.mu = 0.0;
  auto init = init_params<float>(g, d, 11);
  const auto ra = run_stage<float>(avg, data, init);
  const auto rp = run_stage<float>(prox, data, init);
  std::ostringstream ca, cp, la, lp;
  Checkpoint cka, ckp;
  cka.add_params(ra.params);
  ckp.add_params(rp.params);
  write_checkpoint(ca, cka);
  write_checkpoint(cp, ckp);
  write_metrics_csv(la, ra.log);
  write_metrics_csv(lp, rp.log);
  const bool identical = ca.str() == cp.str() && la.str() == lp.str();

  // One step from a mid-round state, so that w_local differs from w_t.
  auto global = init_params<double>(g, d, 11);
  ClientState<double> client;
  client.id = 0;
  client.labeled = data.splits[0].labeled;
  const ClientView view(synth.train, 0, client.labeled);
  FedConfig cfg = avg;
  cfg.base_lr = 1e-3;
  auto local = global.subset(trained_prefixes(StageKind::finetune, Method::supervised)).clone();
  std::vector<std::size_t> positions(std::min<std::size_t>(8, view.size()));
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  for (std::size_t b = 0; b < 3; ++b)
    local_step(client, local, global, view, positions, {0, 1, 0, b}, 1e-3, cfg, data);

  std::vector<double> distances;
  for (const double mu : {0.0, 0.001, 0.1, 1.0}) {
    auto w = local.clone();
    ClientState<double> copy = client;
    cfg.mu = mu;
    local_step(copy, w, global, view, positions, {0, 1, 0, 3}, 1e-3, cfg, data);
    double sq = 0.0;
    for (const auto& e : w.entries()) {
      const auto x = e.tensor.data();
      const auto y = global.get(e.name).data();
      for (std::size_t j = 0; j < x.size(); ++j) sq += (x[j] - y[j]) * (x[j] - y[j]);
    }
    distances.push_back(std::sqrt(sq));
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < distances.size(); ++i) decreasing = decreasing && distances[i] < distances[i - 1];
  return {identical && decreasing,
          fmt("mu=0 vs FedAvg %s; ||w - w_t|| after one step: %.12g > %.12g > %.12g > %.12g %s",
              identical ? "bitwise identical" : "DIFFERENT", distances[0], distances[1], distances[2],
              distances[3], decreasing ? "ok" : "NOT DECREASING")};
}

// ---- 9: metrics oracle ----------------------------------------------------------

Outcome metrics_check() {
  Rng rng(99);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t classes = 2 + rng.below(9);
    const std::size_t n = 1 + rng.below(200);
    std::vector<std::size_t> labels(n), preds(n);
    for (std::size_t t = 0; t < n; ++t) {
      labels[t] = rng.below(classes);
      preds[t] = rng.bernoulli(0.5) ? labels[t] : rng.below(classes);
    }
    std::vector<std::size_t> cm(classes * classes, 0);
    for (std::size_t t = 0; t < n; ++t) ++cm[labels[t] * classes + preds[t]];
    std::size_t diag = 0;
    for (std::size_t j = 0; j < classes; ++j) diag += cm[j * classes + j];
    const auto cmat = confusion_matrix(preds, labels, classes);
    if (cmat.counts != cm || accuracy(preds, labels) != double(diag) / double(n)) ++mismatches;
    const auto f1 = f1_per_class(preds, labels, classes);
    double macro = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      std::size_t tp = cm[j * classes + j], fp = 0, fn = 0;
      for (std::size_t o = 0; o < classes; ++o)
        if (o != j) {
          fp += cm[o * classes + j];
          fn += cm[j * classes + o];
        }
      const bool absent = tp + fp + fn == 0;
      const double expected = absent ? 1.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
      if (f1.per_class[j] != expected || f1.absent[j] != absent) ++mismatches;
      macro += expected;
    }
    if (std::abs(f1.macro - macro / double(classes)) > 1e-15) ++mismatches;
  }
  const std::vector<std::size_t> hand_labels{1, 1, 0}, hand_preds{1, 0, 0};
  const double hand = f1_per_class(hand_preds, hand_labels, 2).per_class[1];
  const bool hand_ok = hand == 2.0 / 3.0;
  return {mismatches == 0 && hand_ok,
          fmt("1000 random vectors, %zu mismatches; hand case F1 = %.17g (2/3)", mismatches, hand)};
}

// ---- 10: determinism and formats ------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kDeterminismConfig = R"(
[run]
seed = 21
[data]
source = synthetic
train_per_class = 24
test_per_class = 8
[model]
dim = 16
depth = 1
heads = 2
decoder_dim = 16
decoder_heads = 2
vocab = 16
[partition]
clients = 4
alpha = 0.5
label_fraction = 0.5
[pretrain]
method = %s
rounds = 3
selected = 3
batch = 8
[finetune]
rounds = 4
batch = 8
mu = 0.01
semi_fl = true
eval_interval = 2
)";

Outcome determinism_check() {
  const auto root = fs::temp_directory_path() / "fmim-acceptance";
  fs::remove_all(root);
  const std::vector<std::string> artifacts = {"manifest.csv",      "labels.csv",       "metrics_pretrain.csv",
                                              "metrics_finetune.csv", "pretrain_r3.ckpt", "finetune_r4.ckpt",
                                              "evaluation.csv",    "confusion.csv"};
  std::vector<std::string> problems;
  for (const std::string method : {"mae", "beit"}) {
    for (const std::string precision : {"32", "64"}) {
      std::vector<fs::path> dirs;
      for (const std::string threads : {"1", "1", "3"}) {
        const auto result = cli::validate_config_text(
            fmt(kDeterminismConfig, method.c_str()),
            {{"run.threads", threads}, {"run.precision", precision}});
        if (!result.ok()) return {false, "config rejected: " + cli::format_issues(result.issues)};
        dirs.push_back(root / (method + precision + "_" + std::to_string(dirs.size())));
        if (cli::run_command("run", *result.config, result.normalized, dirs.back()) != 0)
          return {false, "run failed in " + dirs.back().string()};
      }
      for (const auto& a : artifacts) {
        const auto ref = slurp(dirs[0] / a);
        if (ref.empty()) problems.push_back(method + precision + " missing " + a);
        if (slurp(dirs[1] / a) != ref) problems.push_back(method + precision + " rerun differs: " + a);
        if (slurp(dirs[2] / a) != ref) problems.push_back(method + precision + " threads differ: " + a);
      }
    }
  }

  // Checkpoint round trip, including special values.
  Checkpoint ck;
  ck.add_reals("a/f32", {2, 3}, DType::f32,
               {0.0, -0.0, double(1.0f / 3.0f), 1e-40f, 3.4e38f, -std::numeric_limits<double>::infinity()});
  ck.add_reals("a/f64", {4}, DType::f64, {-0.0, 4.9e-324, 1.0 / 3.0, 1e308});
  ck.add_integers("meta/n", {2}, {0, ~std::uint64_t{0}});
  std::stringstream s1;
  write_checkpoint(s1, ck);
  const auto back = read_checkpoint(s1);
  std::stringstream s2;
  write_checkpoint(s2, back);
  bool ck_ok = s1.str() == s2.str() && back.entries.size() == ck.entries.size();
  for (std::size_t i = 0; ck_ok && i < ck.entries.size(); ++i) {
    const auto& x = ck.entries[i].reals;
    const auto& y = back.entries[i].reals;
    ck_ok = x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0 &&
            ck.entries[i].integers == back.entries[i].integers && ck.entries[i].name == back.entries[i].name;
  }
  const auto saved = slurp(root / "mae32_0" / "finetune_r4.ckpt");
  save_checkpoint(root / "copy.ckpt", load_checkpoint(root / "mae32_0" / "finetune_r4.ckpt"));
  ck_ok = ck_ok && !saved.empty() && slurp(root / "copy.ckpt") == saved;
  if (!ck_ok) problems.push_back("checkpoint round trip");

  // Image container round trip.
  Dataset ds;
  ds.shape = {3, 2, 2};
  ds.classes = 1;
  Rng rng(5);
  for (int i = 0; i < 4; ++i) {
    std::vector<float> img(12);
    for (auto& v : img) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    img[0] = -0.0f;
    img[1] = 1e-42f;
    ds.push_back(img, 0);
  }
  write_images(root / "x.fimg", ds);
  const auto img_back = read_images(root / "x.fimg");
  const bool img_ok = img_back.shape == ds.shape && img_back.pixels.size() == ds.pixels.size() &&
                      std::memcmp(img_back.pixels.data(), ds.pixels.data(), ds.pixels.size() * sizeof(float)) == 0;
  if (!img_ok) problems.push_back("image round trip");

  std::string detail = "{mae,beit} x {32,64}-bit runs: reruns and --threads 3 byte-identical over " +
                       std::to_string(artifacts.size()) + " artifacts; checkpoint and image round trips bitwise";
  if (!problems.empty()) {
    detail = "problems:";
    for (const auto& p : problems) detail += " [" + p + "]";
  }
  fs::remove_all(root);
  return {problems.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", gradient_suite_check},
      {2, "one-client reduction", one_client_check},
      {3, "aggregation oracle", aggregation_check},
      {4, "masking exactness", masking_check},
      {5, "Dirichlet monotonicity", dirichlet_check},
      {6, "end-to-end ordering", ordering_check},
      {7, "FedProx", fedprox_check},
      {8, "label-fraction harness", label_fraction_check},
      {9, "metrics oracle", metrics_check},
      {10, "determinism and formats", determinism_check},
  };
  setenv("FMIM_LOG", "error", 1);
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d %-24s %s  %s (%.1f s)\n", c.id, c.name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
