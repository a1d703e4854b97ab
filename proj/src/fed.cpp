#include "fmim/fed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "fmim/common.hpp"
#include "fmim/csv.hpp"
#include "fmim/eval.hpp"
#include "fmim/model/vit.hpp"
#include "fmim/numerics/ops.hpp"

namespace fmim {

const char* to_string(Method method) {
  switch (method) {
    case Method::mae: return "mae";
    case Method::beit: return "beit";
    case Method::supervised: return "supervised";
  }
  return "?";
}

const char* to_string(StageKind stage) {
  return stage == StageKind::pretrain ? "pretrain" : "finetune";
}

void FedConfig::validate() const {
  require(clients >= 1, "FedConfig: at least one client required");
  require(selected >= 1 && selected <= clients, "FedConfig: selected must lie in [1, clients]");
  require(local_epochs >= 1, "FedConfig: local_epochs must be at least 1");
  require(batch >= 1, "FedConfig: batch must be at least 1");
  require(mu >= 0.0, "FedConfig: mu must be non-negative");
  require(base_lr >= 0.0 && floor_lr >= 0.0 && floor_lr <= base_lr,
          "FedConfig: need 0 <= floor_lr <= base_lr");
  require(weight_decay >= 0.0, "FedConfig: weight_decay must be non-negative");
  require(warmup <= rounds * local_epochs, "FedConfig: warmup exceeds the schedule length");
  require(semifl_threshold >= 0.0 && semifl_threshold <= 1.0,
          "FedConfig: semifl_threshold must lie in [0, 1]");
  if (stage == StageKind::pretrain) {
    require(method != Method::supervised, "FedConfig: pre-training needs the mae or beit method");
    require(mask_ratio > 0.0 && mask_ratio < 1.0, "FedConfig: mask_ratio must lie in (0, 1)");
    require(!semi_fl, "FedConfig: semi_fl applies to fine-tuning only");
  }
}

// ---- client data -----------------------------------------------------------

ClientView::ClientView(const Dataset& dataset, std::size_t client,
                       std::vector<std::size_t> indices, const Audit* audit)
    : dataset_(&dataset), client_(client), indices_(std::move(indices)), audit_(audit) {
  for (const auto i : indices_) require(i < dataset.size(), "ClientView: index out of range");
}

std::span<const float> ClientView::image(std::size_t position) const {
  const auto i = indices_.at(position);
  if (audit_ && *audit_) (*audit_)(client_, i);
  return dataset_->image(i);
}

std::size_t ClientView::label(std::size_t position) const {
  const auto i = indices_.at(position);
  if (audit_ && *audit_) (*audit_)(client_, i);
  return dataset_->labels[i];
}

// ---- server side -------------------------------------------------------------

std::vector<std::size_t> select_clients(std::size_t n, std::size_t k, std::uint64_t seed,
                                        std::size_t round) {
  require(k >= 1 && k <= n, "select_clients: need 1 <= K <= N");
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  if (k < n) {
    auto rng = Rng::derive(seed, Stream::select, {round});
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(ids[i], ids[j]);
    }
    ids.resize(k);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

std::size_t stage_weight(StageKind stage, std::size_t labeled, std::size_t unlabeled,
                         bool consistency) {
  if (stage == StageKind::pretrain) return labeled + unlabeled;
  return consistency ? unlabeled : labeled;
}

namespace {

double pairwise_sum(const double* v, std::size_t n) {
  if (n == 0) return 0.0;
  if (n == 1) return v[0];
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace

template <typename T>
ModelParams<T> aggregate(std::span<const Contribution<T>> received) {
  if (received.empty()) throw ProtocolError("aggregate: no client parameters received");
  std::vector<const Contribution<T>*> sorted;
  for (const auto& c : received) {
    require(c.params != nullptr, "aggregate: missing parameters");
    require(c.size > 0, "aggregate: client sizes must be positive");
    sorted.push_back(&c);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->client < b->client; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    require(sorted[i]->client != sorted[i - 1]->client, "aggregate: duplicate client id");
    require(sorted[i]->params->same_layout(*sorted[0]->params),
            "aggregate: parameter layouts differ");
  }

  double total = 0.0;
  for (const auto* c : sorted) total += static_cast<double>(c->size);
  std::vector<double> weight(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k)
    weight[k] = static_cast<double>(sorted[k]->size) / total;

  ModelParams<T> out = sorted[0]->params->clone();
  std::vector<double> terms(sorted.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    auto dst = out.entries()[e].tensor.mutable_data();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      const double ref = static_cast<double>(sorted[0]->params->entries()[e].tensor.data()[j]);
      double lo = ref;
      double hi = ref;
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        const double w = static_cast<double>(sorted[k]->params->entries()[e].tensor.data()[j]);
        lo = std::min(lo, w);
        hi = std::max(hi, w);
        terms[k] = weight[k] * (w - ref);
      }
      const double avg = ref + pairwise_sum(terms.data(), terms.size());
      dst[j] = static_cast<T>(std::clamp(avg, lo, hi));
    }
  }
  return out;
}

template <typename T>
ProxTerm<T> fedprox_penalty(const ModelParams<T>& w_local, const ModelParams<T>& w_global,
                            double mu) {
  require(mu >= 0.0, "fedprox_penalty: mu must be non-negative");
  ProxTerm<T> term;
  double squared = 0.0;
  for (const auto& e : w_local.entries()) {
    require(w_global.contains(e.name), "fedprox_penalty: unknown parameter " + e.name);
    const auto& g = w_global.get(e.name);
    require(g.shape() == e.tensor.shape(), "fedprox_penalty: shape mismatch for " + e.name);
    const auto a = e.tensor.data();
    const auto b = g.data();
    std::vector<T> grad(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
      squared += d * d;
      grad[j] = static_cast<T>(mu * d);
    }
    term.gradient.push_back(std::move(grad));
  }
  term.penalty = 0.5 * mu * squared;
  return term;
}

// ---- client side -------------------------------------------------------------

template <typename T>
Tensor<T> patch_batch(const std::vector<std::vector<float>>& images, const ImageGeometry& geometry) {
  require(!images.empty(), "patch_batch: empty batch");
  std::vector<T> values;
  values.reserve(images.size() * geometry.pixels());
  for (const auto& img : images) {
    const auto patches = patchify<float>(img, geometry);
    values.insert(values.end(), patches.begin(), patches.end());
  }
  return Tensor<T>::constant({images.size() * geometry.patch_count(), geometry.patch_dim()},
                             std::move(values));
}

namespace {

template <typename T>
ModelParams<T> frozen(const ModelParams<T>& params) {
  ModelParams<T> out;
  for (const auto& e : params.entries()) out.add(e.name, e.tensor.detach(), e.decay);
  return out;
}

template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& logits, std::vector<double>* confidence) {
  const std::size_t rows = logits.dim(0);
  const std::size_t cols = logits.dim(1);
  const auto v = logits.data();
  std::vector<std::size_t> out(rows);
  if (confidence) confidence->resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = v.data() + r * cols;
    const auto best = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
    out[r] = best;
    if (confidence) {
      double z = 0.0;
      for (std::size_t c = 0; c < cols; ++c)
        z += std::exp(static_cast<double>(row[c]) - static_cast<double>(row[best]));
      (*confidence)[r] = 1.0 / z;
    }
  }
  return out;
}

}  // namespace

template <typename T>
std::optional<Tensor<T>> semifl_consistency_loss(const ModelParams<T>& params,
                                                 const std::vector<std::vector<float>>& originals,
                                                 const std::vector<std::vector<float>>& augmented,
                                                 const ImageGeometry& geometry,
                                                 const ModelDims& dims, double threshold) {
  require(originals.size() == augmented.size() && !originals.empty(),
          "semifl_consistency_loss: batch size mismatch");
  const auto labeler = frozen(params);
  const auto plain = patch_batch<T>(originals, geometry);
  const auto logits =
      classify(encode_full(plain, originals.size(), geometry, labeler, dims), labeler);
  std::vector<double> confidence;
  const auto pseudo = argmax_rows(logits, &confidence);

  std::vector<std::vector<float>> kept_images;
  std::vector<std::size_t> kept_labels;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    if (confidence[i] < threshold) continue;
    kept_images.push_back(augmented[i]);
    kept_labels.push_back(pseudo[i]);
  }
  if (kept_images.empty()) return std::nullopt;
  const auto batch = patch_batch<T>(kept_images, geometry);
  const auto aug_logits =
      classify(encode_full(batch, kept_images.size(), geometry, params, dims), params);
  return ce_loss(aug_logits, kept_labels);
}

std::vector<std::string> trained_prefixes(StageKind stage, Method method) {
  if (stage == StageKind::finetune) return {kEncoderPrefix, kClassifierPrefix};
  if (method == Method::beit) return {kEncoderPrefix, kTokenHeadPrefix};
  return {kEncoderPrefix, kPixelDecoderPrefix};
}

template <typename T>
double local_step(ClientState<T>& client, ModelParams<T>& local, const ModelParams<T>& global,
                  const ClientView& view, std::span<const std::size_t> positions,
                  const StepKeys& keys, double lr, const FedConfig& config,
                  const StageData& data) {
  require(!positions.empty(), "local_step: empty batch");
  const auto& geom = data.geometry;
  const ImageShape shape = view.shape();
  const bool consistency = config.stage == StageKind::finetune && client.consistency;

  std::vector<std::vector<float>> images;
  std::vector<std::vector<float>> views;
  std::vector<std::size_t> labels;
  for (std::size_t p = 0; p < positions.size(); ++p) {
    const auto img = view.image(positions[p]);
    auto rng = Rng::derive(config.seed, Stream::augment,
                           {keys.client, keys.round, keys.epoch, keys.batch, p});
    if (consistency) {
      images.emplace_back(img.begin(), img.end());
      views.push_back(augment(img, shape, config.semifl_augment, rng));
    } else if (config.augment.is_identity()) {
      images.emplace_back(img.begin(), img.end());
    } else {
      images.push_back(augment(img, shape, config.augment, rng));
    }
    if (config.stage == StageKind::finetune && !consistency)
      labels.push_back(view.label(positions[p]));
  }

  local.zero_grad();
  std::optional<Tensor<T>> loss;
  if (config.stage == StageKind::pretrain) {
    const auto patches = patch_batch<T>(images, geom);
    std::vector<MaskPlan> plans;
    for (std::size_t p = 0; p < images.size(); ++p) {
      auto rng = Rng::derive(config.seed, Stream::mask,
                             {keys.client, keys.round, keys.epoch, keys.batch, p});
      plans.push_back(config.method == Method::beit
                          ? blockwise_mask(geom.grid(), config.mask_ratio, rng, config.block)
                          : random_mask(geom.grid(), config.mask_ratio, rng));
    }
    if (config.method == Method::beit) {
      require(data.codebook != nullptr, "local_step: the token objective needs a codebook");
      const auto rows = masked_rows(plans);
      const std::size_t pd = geom.patch_dim();
      std::vector<std::size_t> targets;
      targets.reserve(rows.size());
      for (const auto r : rows)
        targets.push_back(tokenize(patches.data().subspan(r * pd, pd), *data.codebook));
      loss = beit_loss(decode_beit(encode_beit(patches, plans, local, data.dims), local), targets);
    } else {
      const auto target = ops::gather_rows(patches, masked_rows(plans));
      loss = mae_loss(decode_mae(encode_mae(patches, plans, local, data.dims), local, data.dims),
                      target);
    }
  } else if (consistency) {
    loss = semifl_consistency_loss(local, images, views, geom, data.dims,
                                   config.semifl_threshold);
    if (!loss) return 0.0;
  } else {
    const auto patches = patch_batch<T>(images, geom);
    loss = ce_loss(classify(encode_full(patches, images.size(), geom, local, data.dims), local),
                   labels);
  }

  backward(*loss);
  if (config.mu > 0.0) {
    const auto prox = fedprox_penalty(local, global, config.mu);
    for (std::size_t e = 0; e < local.size(); ++e) {
      auto g = local.entries()[e].tensor.mutable_grad();
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += prox.gradient[e][j];
    }
  }
  client.optimizer.weight_decay = config.weight_decay;
  adamw_step(local, client.optimizer, lr);
  return static_cast<double>(loss->item());
}

namespace {

template <typename T>
ModelParams<T> run_local_epochs(ClientState<T>& client, const ModelParams<T>& global,
                                std::size_t round, const FedConfig& config,
                                const StageData& data, std::vector<std::size_t> indices,
                                ClientResult* result, const ClientView::Audit* audit) {
  require(data.train != nullptr, "client update: no training data");
  auto local = global.subset(trained_prefixes(config.stage, config.method)).clone();
  const ClientView view(*data.train, client.id, std::move(indices), audit);
  if (result) *result = {view.size(), 0.0};
  if (view.empty()) return local;
  if (!config.persist_optimizer) client.optimizer = {};

  const Schedule schedule{config.base_lr, config.floor_lr, config.warmup,
                          std::max<std::size_t>(1, config.rounds * config.local_epochs)};
  double loss_sum = 0.0;
  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    const double lr = schedule_at(schedule, (round - 1) * config.local_epochs + epoch);
    std::vector<std::size_t> order(view.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = Rng::derive(config.seed, Stream::shuffle, {client.id, round, epoch});
    rng.shuffle(std::span(order));
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch, ++b) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const std::span<const std::size_t> positions(order.data() + start, end - start);
      const double loss = local_step(client, local, global, view, positions,
                                     StepKeys{client.id, round, epoch, b}, lr, config, data);
      loss_sum += loss * static_cast<double>(positions.size());
    }
  }
  if (result)
    result->loss = loss_sum / static_cast<double>(view.size() * config.local_epochs);
  return local;
}

std::vector<std::size_t> merged(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

template <typename T>
ModelParams<T> client_update_pretrain(ClientState<T>& client, const ModelParams<T>& global,
                                      std::size_t round, const FedConfig& config,
                                      const StageData& data, ClientResult* result,
                                      const ClientView::Audit* audit) {
  require(config.stage == StageKind::pretrain, "client_update_pretrain: stage is not pretrain");
  return run_local_epochs(client, global, round, config, data,
                          merged(client.labeled, client.unlabeled), result, audit);
}

template <typename T>
ModelParams<T> client_update_finetune(ClientState<T>& client, const ModelParams<T>& global,
                                      std::size_t round, const FedConfig& config,
                                      const StageData& data, ClientResult* result,
                                      const ClientView::Audit* audit) {
  require(config.stage == StageKind::finetune, "client_update_finetune: stage is not finetune");
  return run_local_epochs(client, global, round, config, data,
                          client.consistency ? client.unlabeled : client.labeled, result, audit);
}

// ---- logging and evaluation --------------------------------------------------

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  csv::write_row(out, {"round", "stage", "client_id", "num_samples", "loss", "lr", "accuracy",
                       "f1_macro"});
  for (const auto& r : rows) {
    csv::write_row(out, {csv::format_number(std::uint64_t{r.round}), to_string(r.stage),
                         r.client ? csv::format_number(std::uint64_t{*r.client}) : "",
                         csv::format_number(std::uint64_t{r.samples}), csv::format_number(r.loss),
                         csv::format_number(r.lr),
                         r.accuracy ? csv::format_number(*r.accuracy) : "",
                         r.f1_macro ? csv::format_number(*r.f1_macro) : ""});
  }
}

template <typename T>
Evaluation evaluate(const ModelParams<T>& params, const Dataset& dataset,
                    const ImageGeometry& geometry, const ModelDims& dims, std::size_t batch) {
  require(dataset.size() > 0, "evaluate: empty dataset");
  require(batch >= 1, "evaluate: batch must be at least 1");
  const auto model = frozen(params);
  Evaluation ev;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < dataset.size(); start += batch) {
    const std::size_t end = std::min(dataset.size(), start + batch);
    std::vector<std::vector<float>> images;
    for (std::size_t i = start; i < end; ++i) {
      const auto img = dataset.image(i);
      images.emplace_back(img.begin(), img.end());
    }
    const auto logits = classify(
        encode_full(patch_batch<T>(images, geometry), images.size(), geometry, model, dims), model);
    const std::span<const std::size_t> labels(dataset.labels.data() + start, end - start);
    loss_sum += static_cast<double>(ce_loss(logits, labels).item()) *
                static_cast<double>(end - start);
    const auto preds = argmax_rows(logits, nullptr);
    ev.predictions.insert(ev.predictions.end(), preds.begin(), preds.end());
  }
  ev.loss = loss_sum / static_cast<double>(dataset.size());
  ev.accuracy = accuracy(ev.predictions, dataset.labels);
  ev.f1_macro = f1_per_class(ev.predictions, dataset.labels, dims.classes).macro;
  return ev;
}

// ---- round loop ----------------------------------------------------------------

template <typename T>
StageResult<T> run_stage(const FedConfig& config, const StageData& data,
                         const ModelParams<T>& init, const RunOptions<T>& options) {
  config.validate();
  require(data.train != nullptr, "run_stage: no training data");
  require(data.splits.size() == config.clients, "run_stage: one split per client required");
  StageResult<T> result{init.clone(), {}};
  if (config.rounds == 0) return result;

  std::vector<ClientState<T>> clients(config.clients);
  for (std::size_t k = 0; k < config.clients; ++k) {
    clients[k].id = k;
    clients[k].labeled = data.splits[k].labeled;
    clients[k].unlabeled = data.splits[k].unlabeled;
  }
  const bool semi = config.semi_fl && config.stage == StageKind::finetune;
  if (semi) {
    ClientState<T> pool;
    pool.id = config.clients;
    pool.consistency = true;
    for (const auto& s : data.splits) pool.unlabeled.insert(pool.unlabeled.end(), s.unlabeled.begin(), s.unlabeled.end());
    std::sort(pool.unlabeled.begin(), pool.unlabeled.end());
    clients.push_back(std::move(pool));
  }

  std::mutex audit_mutex;
  const ClientView::Audit audit = [&](std::size_t client, std::size_t index) {
    const std::lock_guard lock(audit_mutex);
    options.audit(client, index);
  };
  const ClientView::Audit* audit_ptr = options.audit ? &audit : nullptr;
  const Schedule schedule{config.base_lr, config.floor_lr, config.warmup,
                          config.rounds * config.local_epochs};

  for (std::size_t round = 1; round <= config.rounds; ++round) {
    auto selected = select_clients(config.clients, config.selected, config.seed, round);
    if (semi && round > config.rounds / 2) selected.push_back(config.clients);

    std::vector<ModelParams<T>> locals(selected.size());
    std::vector<ClientResult> reports(selected.size());
    std::vector<std::exception_ptr> errors(selected.size());
    const auto& global = result.params;
    auto work = [&](std::size_t i) {
      try {
        auto& c = clients[selected[i]];
        locals[i] = config.stage == StageKind::pretrain
                        ? client_update_pretrain(c, global, round, config, data, &reports[i], audit_ptr)
                        : client_update_finetune(c, global, round, config, data, &reports[i], audit_ptr);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    const std::size_t workers = std::min(std::max<std::size_t>(1, options.threads), selected.size());
    if (workers == 1) {
      for (std::size_t i = 0; i < selected.size(); ++i) work(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < selected.size(); i = next++) work(i);
        });
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    std::vector<Contribution<T>> received;
    for (std::size_t i = 0; i < selected.size(); ++i) {
      const auto& c = clients[selected[i]];
      const auto weight =
          stage_weight(config.stage, c.labeled.size(), c.unlabeled.size(), c.consistency);
      if (weight == 0 || reports[i].samples == 0) continue;
      received.push_back({c.id, &locals[i], weight});
    }
    if (received.empty())
      throw ProtocolError("round " + std::to_string(round) +
                          ": no selected client has data for this stage");
    result.params.merge(aggregate<T>(received));

    const double lr = schedule_at(schedule, (round - 1) * config.local_epochs);
    for (const auto& r : received) {
      const auto pos = static_cast<std::size_t>(
          std::find(selected.begin(), selected.end(), r.client) - selected.begin());
      result.log.push_back({round, config.stage, r.client, reports[pos].samples,
                            reports[pos].loss, lr, std::nullopt, std::nullopt});
    }
    if (options.on_round) options.on_round(round, result.params);

    const bool due = round == config.rounds ||
                     (config.eval_interval > 0 && round % config.eval_interval == 0);
    if (due && data.test != nullptr && config.stage == StageKind::finetune) {
      const auto ev = evaluate(result.params, *data.test, data.geometry, data.dims);
      result.log.push_back({round, config.stage, std::nullopt, data.test->size(), ev.loss, lr,
                            ev.accuracy, ev.f1_macro});
    }
  }
  return result;
}

#define FMIM_INSTANTIATE_FED(T)                                                                  \
  template ModelParams<T> aggregate<T>(std::span<const Contribution<T>>);                        \
  template ProxTerm<T> fedprox_penalty<T>(const ModelParams<T>&, const ModelParams<T>&, double); \
  template Tensor<T> patch_batch<T>(const std::vector<std::vector<float>>&, const ImageGeometry&); \
  template std::optional<Tensor<T>> semifl_consistency_loss<T>(                                  \
      const ModelParams<T>&, const std::vector<std::vector<float>>&,                             \
      const std::vector<std::vector<float>>&, const ImageGeometry&, const ModelDims&, double);   \
  template double local_step<T>(ClientState<T>&, ModelParams<T>&, const ModelParams<T>&,         \
                                const ClientView&, std::span<const std::size_t>,                 \
                                const StepKeys&, double, const FedConfig&, const StageData&);    \
  template ModelParams<T> client_update_pretrain<T>(ClientState<T>&, const ModelParams<T>&,      \
                                                    std::size_t, const FedConfig&,               \
                                                    const StageData&, ClientResult*,             \
                                                    const ClientView::Audit*);                   \
  template ModelParams<T> client_update_finetune<T>(ClientState<T>&, const ModelParams<T>&,      \
                                                    std::size_t, const FedConfig&,               \
                                                    const StageData&, ClientResult*,             \
                                                    const ClientView::Audit*);                   \
  template Evaluation evaluate<T>(const ModelParams<T>&, const Dataset&, const ImageGeometry&,   \
                                  const ModelDims&, std::size_t);                                \
  template StageResult<T> run_stage<T>(const FedConfig&, const StageData&, const ModelParams<T>&, \
                                       const RunOptions<T>&);

FMIM_INSTANTIATE_FED(float)
FMIM_INSTANTIATE_FED(double)

}  // namespace fmim
