#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmim/data.hpp"
#include "fmim/masking.hpp"
#include "fmim/model/geometry.hpp"
#include "fmim/numerics/optim.hpp"
#include "fmim/tokenizer.hpp"

namespace fmim {

enum class Method { mae, beit, supervised };
enum class StageKind { pretrain, finetune };

const char* to_string(Method method);
const char* to_string(StageKind stage);

struct FedConfig {
  std::size_t clients = 5;      // N
  std::size_t selected = 5;     // K
  std::size_t local_epochs = 1; // E
  std::size_t rounds = 1;       // T
  std::size_t batch = 32;       // B
  StageKind stage = StageKind::pretrain;
  Method method = Method::mae;

  double base_lr = 1.5e-3;
  double floor_lr = 0.0;
  /// Warmup length in local-epoch units of the shared schedule.
  std::size_t warmup = 0;
  double weight_decay = 0.05;

  double mask_ratio = 0.75;
  BlockMaskOptions block;
  AugmentPolicy augment;

  double mu = 0.0;  // FedProx coefficient, 0 disables
  /// Adds one client holding every client's unlabeled data for the second
  /// half of fine-tuning rounds, trained with the consistency loss.
  bool semi_fl = false;
  /// Pseudo-labels below this confidence are dropped (0 keeps all).
  double semifl_threshold = 0.0;
  AugmentPolicy semifl_augment;

  bool persist_optimizer = true;
  std::size_t eval_interval = 0;  // 0: evaluate after the final round only
  std::uint64_t seed = 0;

  /// Throws ContractViolation on inconsistent values.
  void validate() const;
};

/// Read-only inputs of a stage. Client k owns splits[k]; test may be null.
struct StageData {
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  std::vector<ClientSplit> splits;
  const Codebook* codebook = nullptr;  // required for the token objective
  ImageGeometry geometry;
  ModelDims dims;
};

/// A client's window onto the training set: only its own indices are
/// addressable. Every image read is reported to the audit hook, if any.
class ClientView {
 public:
  using Audit = std::function<void(std::size_t client, std::size_t dataset_index)>;

  ClientView(const Dataset& dataset, std::size_t client, std::vector<std::size_t> indices,
             const Audit* audit = nullptr);

  std::size_t client() const { return client_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::span<const float> image(std::size_t position) const;
  std::size_t label(std::size_t position) const;
  const ImageShape& shape() const { return dataset_->shape; }

 private:
  const Dataset* dataset_;
  std::size_t client_;
  std::vector<std::size_t> indices_;
  const Audit* audit_;
};

template <typename T>
struct ClientState {
  std::size_t id = 0;
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  /// The Semi-FL unlabeled client: trains on `unlabeled` with the
  /// consistency loss during fine-tuning.
  bool consistency = false;
  OptimizerState<T> optimizer;
};

/// K distinct ids from [0, N), uniform without replacement, sorted. Depends
/// only on (seed, round).
std::vector<std::size_t> select_clients(std::size_t n, std::size_t k, std::uint64_t seed,
                                        std::size_t round);

/// Aggregation weight of a client: its full local size when pre-training,
/// its labeled size when fine-tuning (unlabeled size for the consistency
/// client).
std::size_t stage_weight(StageKind stage, std::size_t labeled, std::size_t unlabeled,
                         bool consistency = false);

template <typename T>
struct Contribution {
  std::size_t client = 0;
  const ModelParams<T>* params = nullptr;
  std::size_t size = 0;
};

/// Weighted average sum_k (n_k / sum n) w_k computed as
/// ref + sum_k (n_k / sum n)(w_k - ref) with ref the lowest client id's
/// parameters, terms summed pairwise in client-id order and clamped to the
/// per-parameter range of the inputs. The result is independent of the
/// order of `received`.
template <typename T>
ModelParams<T> aggregate(std::span<const Contribution<T>> received);

template <typename T>
struct ProxTerm {
  double penalty = 0.0;
  std::vector<std::vector<T>> gradient;  // per entry of w_local
};

/// (mu / 2) * ||w_local - w_global||^2 and its gradient mu (w_local - w_global).
/// w_global may hold extra entries; names of w_local must exist in it.
template <typename T>
ProxTerm<T> fedprox_penalty(const ModelParams<T>& w_local, const ModelParams<T>& w_global,
                            double mu);

/// Batch of images as patch rows [batch * P, patch_dim].
template <typename T>
Tensor<T> patch_batch(const std::vector<std::vector<float>>& images, const ImageGeometry& geometry);

/// Cross-entropy of the classifier on augmented images against the argmax
/// prediction on the original images. The pseudo-labels are integers, so no
/// gradient flows through them. Samples whose top probability is below
/// threshold are dropped; returns nullopt when none remain.
template <typename T>
std::optional<Tensor<T>> semifl_consistency_loss(const ModelParams<T>& params,
                                                 const std::vector<std::vector<float>>& originals,
                                                 const std::vector<std::vector<float>>& augmented,
                                                 const ImageGeometry& geometry,
                                                 const ModelDims& dims, double threshold = 0.0);

/// Parameter-name prefixes trained in a stage.
std::vector<std::string> trained_prefixes(StageKind stage, Method method);

/// Keys of the per-image random streams used inside client updates:
/// shuffle  derive(seed, shuffle, {client, round, epoch})
/// augment  derive(seed, augment, {client, round, epoch, batch, item})
/// mask     derive(seed, mask,    {client, round, epoch, batch, item})
struct StepKeys {
  std::size_t client = 0;
  std::size_t round = 0;
  std::size_t epoch = 0;
  std::size_t batch = 0;
};

/// One optimization step on the given positions of a client's view. local
/// is the trained subset; global is the round's broadcast parameters (FedProx
/// anchor). Returns the batch's task loss.
template <typename T>
double local_step(ClientState<T>& client, ModelParams<T>& local, const ModelParams<T>& global,
                  const ClientView& view, std::span<const std::size_t> positions,
                  const StepKeys& keys, double lr, const FedConfig& config,
                  const StageData& data);

struct ClientResult {
  std::size_t samples = 0;
  double loss = 0.0;  // mean task loss per sample over all local epochs
};

/// E local epochs of masked-image modeling over the client's full local data
/// (labels ignored), starting from global. Returns the trained subset.
template <typename T>
ModelParams<T> client_update_pretrain(ClientState<T>& client, const ModelParams<T>& global,
                                      std::size_t round, const FedConfig& config,
                                      const StageData& data, ClientResult* result = nullptr,
                                      const ClientView::Audit* audit = nullptr);

/// E local epochs of classification on labeled data (or of the consistency
/// loss on unlabeled data for the consistency client).
template <typename T>
ModelParams<T> client_update_finetune(ClientState<T>& client, const ModelParams<T>& global,
                                      std::size_t round, const FedConfig& config,
                                      const StageData& data, ClientResult* result = nullptr,
                                      const ClientView::Audit* audit = nullptr);

/// One line of the metrics log. Global evaluation rows have no client.
struct MetricRow {
  std::size_t round = 0;
  StageKind stage = StageKind::pretrain;
  std::optional<std::size_t> client;
  std::size_t samples = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> accuracy;
  std::optional<double> f1_macro;
};

/// Header round,stage,client_id,num_samples,loss,lr,accuracy,f1_macro.
void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);

struct Evaluation {
  std::vector<std::size_t> predictions;
  double loss = 0.0;
  double accuracy = 0.0;
  double f1_macro = 0.0;
};

template <typename T>
Evaluation evaluate(const ModelParams<T>& params, const Dataset& dataset,
                    const ImageGeometry& geometry, const ModelDims& dims,
                    std::size_t batch = 256);

template <typename T>
struct RunOptions {
  std::size_t threads = 1;  // speed only; results never depend on it
  ClientView::Audit audit;
  /// Called after aggregation with the 1-based round and the global params.
  std::function<void(std::size_t, const ModelParams<T>&)> on_round;
};

template <typename T>
struct StageResult {
  ModelParams<T> params;
  std::vector<MetricRow> log;
};

/// T rounds of selection, client updates and aggregation. Rounds are
/// 1-based; the schedule index of local epoch e in round t is (t-1)E + e.
template <typename T>
StageResult<T> run_stage(const FedConfig& config, const StageData& data,
                         const ModelParams<T>& init, const RunOptions<T>& options = {});

}  // namespace fmim
