#include "epc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "epc/error.hpp"

namespace epc {

void SyntheticSceneConfig::validate() const {
  if (num_clusters < 1 || points_per_cluster < 1) {
    fail(ErrorKind::kInvalidArgument, "scene: num_clusters and points_per_cluster must be >= 1");
  }
  if (!(cluster_std >= 0.0) || !(color_noise_std >= 0.0)) {
    fail(ErrorKind::kInvalidArgument, "scene: standard deviations must be >= 0");
  }
  if (!(room_extent > 0.0)) fail(ErrorKind::kInvalidArgument, "scene: room_extent must be > 0");
}

std::array<double, 3> class_base_color(std::size_t class_id) {
  Rng rng = Rng(0x5CE11E).substream(static_cast<std::uint64_t>(class_id));
  return {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
}

PointCloud generate_scene(const SyntheticSceneConfig& cfg, Rng& stream) {
  cfg.validate();
  const std::size_t n = cfg.num_clusters * cfg.points_per_cluster;
  PointCloud cloud;
  cloud.positions = Matrix(n, 3);
  cloud.colors = Matrix(n, 3);
  cloud.labels = std::vector<std::uint32_t>(n);
  std::size_t i = 0;
  for (std::size_t k = 0; k < cfg.num_clusters; ++k) {
    double center[3];
    for (double& c : center) c = stream.uniform(0.0, cfg.room_extent);
    const auto base = class_base_color(k);
    for (std::size_t p = 0; p < cfg.points_per_cluster; ++p, ++i) {
      for (int d = 0; d < 3; ++d) {
        cloud.positions(i, d) =
            cfg.cluster_std > 0.0 ? center[d] + cfg.cluster_std * stream.normal() : center[d];
      }
      for (int d = 0; d < 3; ++d) {
        const double noise = cfg.color_noise_std > 0.0 ? cfg.color_noise_std * stream.normal() : 0.0;
        cloud.colors(i, d) = std::clamp(base[d] + noise, 0.0, 1.0);
      }
      (*cloud.labels)[i] = static_cast<std::uint32_t>(k);
    }
  }
  return cloud;
}

std::vector<PointCloud> generate_scenes(const SyntheticSceneConfig& cfg, std::size_t count) {
  const Rng root(cfg.seed);
  std::vector<PointCloud> scenes;
  scenes.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Rng s = root.substream(static_cast<std::uint64_t>(k));
    scenes.push_back(generate_scene(cfg, s));
  }
  return scenes;
}

AdamResult adam_step(std::span<const double> params, std::span<const double> grads,
                     const OptimState& state, double lr, const AdamHyper& hp) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    fail(ErrorKind::kShape, "adam_step: parameter, gradient and moment sizes differ");
  }
  AdamResult r;
  r.state.step = state.step + 1;
  r.state.m.resize(params.size());
  r.state.v.resize(params.size());
  r.params.resize(params.size());
  const double t = static_cast<double>(r.state.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    const double v = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    r.state.m[i] = m;
    r.state.v[i] = v;
    r.params[i] = params[i] - lr * (m / c1) / (std::sqrt(v / c2) + hp.eps);
  }
  return r;
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::kInvalidArgument, "train: epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::kInvalidArgument, "train: batch_size must be >= 1");
  if (!(base_lr >= 0.0)) fail(ErrorKind::kInvalidArgument, "train: base_lr must be >= 0");
  if (hidden < 1 || embed_dim < 1) fail(ErrorKind::kInvalidArgument, "train: encoder dims must be >= 1");
  loss.validate();
  augment.validate();
}

double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (cfg.lr_schedule == LrSchedule::kConstant || total_steps == 0) return cfg.base_lr;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

PretrainResult pretrain(const std::vector<PointCloud>& scenes, const TrainConfig& cfg,
                        const KMeansConfig& kmeans, const StepCallback& on_step) {
  cfg.validate();
  const MlpParams init = encoder_init(kEncoderInputDim, cfg.hidden, cfg.embed_dim, cfg.seed);
  return pretrain_from(init, scenes, cfg, kmeans, on_step);
}

PretrainResult pretrain_from(const MlpParams& init, const std::vector<PointCloud>& scenes,
                             const TrainConfig& cfg, const KMeansConfig& kmeans,
                             const StepCallback& on_step) {
  cfg.validate();
  if (scenes.empty()) fail(ErrorKind::kInvalidArgument, "pretrain: no scenes");

  const bool needs_segments = cfg.loss_kind == LossKind::kAG || cfg.loss_kind == LossKind::kEP;
  std::vector<SegmentAssignment> segments;
  if (needs_segments) {
    segments.reserve(scenes.size());
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      KMeansConfig kc = kmeans;
      kc.seed = Rng(kmeans.seed).substream(static_cast<std::uint64_t>(s)).next_u64();
      segments.push_back(kmeans_segments(scenes[s], kc));
    }
  }

  const Rng root(cfg.seed);
  Rng order_rng = root.substream("order");
  const Rng view_root = root.substream("views");
  const Rng sample_root = root.substream("negatives");

  const std::size_t steps_per_epoch = (scenes.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  PretrainResult result;
  result.initial = init;
  MlpParams params = init;
  std::vector<double> flat = params.flatten();
  OptimState opt = OptimState::zeros(flat.size());

  std::vector<std::size_t> order(scenes.size());
  std::size_t step = 0;
  std::uint64_t draw = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      std::vector<double> grad_flat(flat.size(), 0.0);
      double batch_loss = 0.0;

      for (std::size_t b = begin; b < end; ++b, ++draw) {
        const std::size_t s = order[b];
        const ViewPair views =
            make_view_pair(scenes[s], cfg.augment, view_root.substream(draw).next_u64());
        ForwardCache c1, c2;
        const Matrix f1 = encoder_forward(params, views.view1, &c1);
        const Matrix f2 = encoder_forward(params, views.view2, &c2);
        Rng sampler = sample_root.substream(draw);
        const LossOutput loss = compute_loss(cfg.loss_kind, f1, f2,
                                             needs_segments ? &segments[s] : nullptr, cfg.loss,
                                             &sampler);
        batch_loss += loss.value * inv_batch;
        const auto g1 = encoder_backward(params, c1, loss.grad_f1).flatten();
        const auto g2 = encoder_backward(params, c2, loss.grad_f2).flatten();
        for (std::size_t k = 0; k < grad_flat.size(); ++k) {
          grad_flat[k] += inv_batch * (g1[k] + g2[k]);
        }
      }

      const double lr = scheduled_lr(cfg, step, total_steps);
      AdamResult upd = adam_step(flat, grad_flat, opt, lr, cfg.adam);
      flat = std::move(upd.params);
      opt = std::move(upd.state);
      params = params.with_values(flat);

      HistoryRow row{step, epoch, batch_loss, lr};
      result.history.push_back(row);
      if (on_step) on_step(row);
    }
  }
  result.params = std::move(params);
  return result;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::ostringstream os;
  os << "step,epoch,loss,lr\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", r.step, r.epoch, r.loss, r.lr);
    os << buf;
  }
  return os.str();
}

void ProbeConfig::validate() const {
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
    fail(ErrorKind::kInvalidArgument, "probe: label_fraction must be in (0, 1]");
  }
  if (iterations < 1) fail(ErrorKind::kInvalidArgument, "probe: iterations must be >= 1");
  if (!(lr > 0.0)) fail(ErrorKind::kInvalidArgument, "probe: lr must be > 0");
  if (!(l2 >= 0.0)) fail(ErrorKind::kInvalidArgument, "probe: l2 must be >= 0");
}

std::vector<std::uint32_t> LinearClassifier::predict(const Matrix& features) const {
  std::vector<std::uint32_t> out(features.rows(), 0);
  const std::size_t d = weight.rows(), k = weight.cols();
  std::vector<double> x(d);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) x[j] = (features(i, j) - mean[j]) * inv_std[j];
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (!active[c]) continue;
      double z = bias(0, c);
      for (std::size_t j = 0; j < d; ++j) z += x[j] * weight(j, c);
      if (z > best) {
        best = z;
        out[i] = static_cast<std::uint32_t>(c);
      }
    }
  }
  return out;
}

LinearClassifier fit_linear_classifier(const Matrix& features,
                                       std::span<const std::uint32_t> labels,
                                       std::size_t num_classes, const ProbeConfig& cfg) {
  cfg.validate();
  const std::size_t n = features.rows(), d = features.cols();
  if (n == 0 || labels.size() != n) {
    fail(ErrorKind::kShape, "probe: need one label per training row");
  }
  LinearClassifier clf;
  clf.mean.assign(d, 0.0);
  clf.inv_std.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) clf.mean[j] += features(i, j) / static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = features(i, j) - clf.mean[j];
      var += t * t / static_cast<double>(n);
    }
    clf.inv_std[j] = 1.0 / std::max(std::sqrt(var), 1e-6);
  }
  clf.active.assign(num_classes, 0);
  for (auto l : labels) clf.active.at(l) = 1;

  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = (features(i, j) - clf.mean[j]) * clf.inv_std[j];

  clf.weight = Matrix(d, num_classes);
  clf.bias = Matrix(1, num_classes);
  Matrix logits;
  std::vector<double> p(num_classes);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    logits = matmul_nn(x, clf.weight);
    Matrix grad_z(n, num_classes);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < num_classes; ++c) {
        if (!clf.active[c]) continue;
        p[c] = logits(i, c) + clf.bias(0, c);
        mx = std::max(mx, p[c]);
      }
      double total = 0.0;
      for (std::size_t c = 0; c < num_classes; ++c) {
        p[c] = clf.active[c] ? std::exp(p[c] - mx) : 0.0;
        total += p[c];
      }
      for (std::size_t c = 0; c < num_classes; ++c) {
        grad_z(i, c) = (p[c] / total - (labels[i] == c ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
    Matrix grad_w = matmul_tn(x, grad_z);
    axpy(cfg.l2, clf.weight, grad_w);
    for (std::size_t c = 0; c < num_classes; ++c) {
      double gb = 0.0;
      for (std::size_t i = 0; i < n; ++i) gb += grad_z(i, c);
      clf.bias(0, c) -= cfg.lr * gb;
    }
    axpy(-cfg.lr, grad_w, clf.weight);
  }
  return clf;
}

ProbeResult linear_probe_features(const std::vector<Matrix>& train_features,
                                  const std::vector<std::vector<std::uint32_t>>& train_labels,
                                  const std::vector<Matrix>& test_features,
                                  const std::vector<std::vector<std::uint32_t>>& test_labels,
                                  const ProbeConfig& cfg) {
  cfg.validate();
  if (train_features.empty() || test_features.empty()) {
    fail(ErrorKind::kInvalidArgument, "probe: need at least one training and one test scene");
  }
  if (train_features.size() != train_labels.size() || test_features.size() != test_labels.size()) {
    fail(ErrorKind::kShape, "probe: feature and label scene counts differ");
  }
  const std::size_t d = train_features.front().cols();
  std::size_t total_train = 0;
  std::uint32_t max_label = 0;
  for (std::size_t s = 0; s < train_features.size(); ++s) {
    if (train_features[s].rows() != train_labels[s].size() || train_features[s].cols() != d) {
      fail(ErrorKind::kShape, "probe: training scene " + std::to_string(s) + " shape mismatch");
    }
    total_train += train_labels[s].size();
    for (auto l : train_labels[s]) max_label = std::max(max_label, l);
  }
  for (std::size_t s = 0; s < test_features.size(); ++s) {
    if (test_features[s].rows() != test_labels[s].size() || test_features[s].cols() != d) {
      fail(ErrorKind::kShape, "probe: test scene " + std::to_string(s) + " shape mismatch");
    }
    for (auto l : test_labels[s]) max_label = std::max(max_label, l);
  }
  const std::size_t num_classes = static_cast<std::size_t>(max_label) + 1;

  // Label-fraction mask over all training points.
  auto keep = static_cast<std::size_t>(std::llround(cfg.label_fraction * static_cast<double>(total_train)));
  keep = std::clamp<std::size_t>(keep, 1, total_train);
  Rng rng = Rng(cfg.seed).substream("probe_mask");
  const auto chosen = rng.sample_without_replacement(total_train, keep);

  Matrix x(chosen.size(), d);
  std::vector<std::uint32_t> y(chosen.size());
  {
    std::size_t scene = 0, offset = 0, row = 0;
    for (std::size_t flat : chosen) {
      while (flat >= offset + train_labels[scene].size()) offset += train_labels[scene++].size();
      const std::size_t local = flat - offset;
      for (std::size_t j = 0; j < d; ++j) x(row, j) = train_features[scene](local, j);
      y[row++] = train_labels[scene][local];
    }
  }

  const LinearClassifier clf = fit_linear_classifier(x, y, num_classes, cfg);

  ProbeResult result;
  result.train_points = chosen.size();
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (!clf.active[c]) result.absent_classes.push_back(static_cast<std::uint32_t>(c));
  }
  if (!result.absent_classes.empty()) {
    std::ostringstream os;
    os << "probe: " << result.absent_classes.size()
       << " class(es) absent from probe training; their test points count as errors:";
    for (auto c : result.absent_classes) os << ' ' << c;
    result.warnings.push_back(os.str());
  }

  std::size_t correct = 0, total = 0;
  for (std::size_t s = 0; s < test_features.size(); ++s) {
    const auto pred = clf.predict(test_features[s]);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const auto truth = test_labels[s][i];
      if (clf.active[truth] && pred[i] == truth) ++correct;
      ++total;
    }
  }
  result.test_points = total;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return result;
}

ProbeResult linear_probe(const MlpParams& params, const std::vector<PointCloud>& train_scenes,
                         const std::vector<PointCloud>& test_scenes, const ProbeConfig& cfg) {
  auto embed = [&](const std::vector<PointCloud>& scenes, std::vector<Matrix>& feats,
                   std::vector<std::vector<std::uint32_t>>& labels, const char* which) {
    for (const auto& s : scenes) {
      if (!s.labels) fail(ErrorKind::kInvalidArgument, std::string("probe: unlabeled ") + which + " scene");
      feats.push_back(encoder_forward(params, s));
      labels.push_back(*s.labels);
    }
  };
  std::vector<Matrix> trf, tef;
  std::vector<std::vector<std::uint32_t>> trl, tel;
  embed(train_scenes, trf, trl, "training");
  embed(test_scenes, tef, tel, "test");
  return linear_probe_features(trf, trl, tef, tel, cfg);
}

double channel_redundancy(const Matrix& embedding) {
  const std::size_t c = embedding.cols();
  if (c < 2) fail(ErrorKind::kShape, "channel_redundancy: need at least two channels");
  const Matrix cols = col_l2_normalize(embedding);
  const Matrix gram = matmul_tn(cols, cols);
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (i != j) total += std::abs(gram(i, j));
  return total / static_cast<double>(c * (c - 1));
}

double channel_redundancy(const MlpParams& params, const std::vector<PointCloud>& scenes) {
  if (scenes.empty()) fail(ErrorKind::kInvalidArgument, "channel_redundancy: no scenes");
  double total = 0.0;
  for (const auto& s : scenes) total += channel_redundancy(encoder_forward(params, s));
  return total / static_cast<double>(scenes.size());
}

}  // namespace epc
