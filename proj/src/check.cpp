#include "epc/check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "epc/pointcloud.hpp"
#include "epc/superpoint.hpp"

namespace epc {

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

LossInstance random_instance(Rng& rng, std::size_t max_n, std::size_t max_c, std::size_t max_m) {
  const std::size_t n = 2 + static_cast<std::size_t>(rng.below(max_n - 1));
  const std::size_t c = 2 + static_cast<std::size_t>(rng.below(max_c - 1));
  const std::size_t m_cap = std::min(max_m, n);
  const std::size_t m = 2 + static_cast<std::size_t>(rng.below(m_cap - 1));
  LossInstance inst{Matrix(n, c), Matrix(n, c), {}};
  for (double& v : inst.f1.data()) v = rng.normal();
  for (double& v : inst.f2.data()) v = rng.normal();
  inst.seg.num_segments = m;
  inst.seg.segment_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    inst.seg.segment_of[i] =
        static_cast<std::uint32_t>(i < m ? i : static_cast<std::size_t>(rng.below(m)));
  }
  rng.shuffle(inst.seg.segment_of);
  return inst;
}

namespace {

constexpr LossKind kAllKinds[] = {LossKind::kPC, LossKind::kAG, LossKind::kCC, LossKind::kEP};

LossConfig variant(bool normalize, bool include_pos, Reduction red) {
  LossConfig cfg;
  cfg.normalize_rows = normalize;
  cfg.normalize_channels = normalize;
  cfg.include_positive_in_denominator = include_pos;
  cfg.reduction = red;
  return cfg;
}

constexpr double kKinkMargin = 1e-3;

// Smallest |pre-activation| of any hidden unit over both inputs, or 0 when
// some point has a hidden layer with no active unit (its embedding is then
// locally constant in every earlier parameter).
double min_hidden_margin(const MlpParams& params, const Matrix& x1, const Matrix& x2) {
  double margin = std::numeric_limits<double>::infinity();
  for (const Matrix* x : {&x1, &x2}) {
    ForwardCache cache;
    mlp_forward(params, *x, &cache);
    for (std::size_t l = 0; l + 1 < cache.pre_activations.size(); ++l)
      for (double z : cache.pre_activations[l].data()) margin = std::min(margin, std::abs(z));
    for (const Matrix& act : cache.activations) {
      for (std::size_t i = 0; i < act.rows(); ++i) {
        const auto row = act.row(i);
        if (std::none_of(row.begin(), row.end(), [](double a) { return a > 0.0; })) return 0.0;
      }
    }
  }
  return margin;
}

void record(SuiteResult& r, double err, double tol, const std::string& what) {
  ++r.cases;
  r.worst = std::max(r.worst, err);
  if (!(err <= tol)) {
    ++r.failures;
    std::ostringstream os;
    os << what << ": error " << err << " > " << tol;
    r.messages.push_back(os.str());
  }
}

}  // namespace

SuiteResult oracle_equivalence_suite(std::uint64_t seed, std::size_t instances, double tolerance) {
  SuiteResult r;
  r.name = "oracle equivalence";
  const Rng root(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng = root.substream(static_cast<std::uint64_t>(k));
    const LossInstance inst = random_instance(rng, 64, 8, 8);
    for (LossKind kind : kAllKinds) {
      for (bool normalize : {true, false}) {
        for (bool include_pos : {false, true}) {
          const LossConfig cfg = variant(normalize, include_pos, Reduction::kSum);
          const double fast = compute_loss(kind, inst.f1, inst.f2, &inst.seg, cfg).value;
          const double ref = brute_force_loss(kind, inst.f1, inst.f2, &inst.seg, cfg);
          const double err = std::abs(fast - ref) / std::max(std::abs(ref), 1e-12);
          std::ostringstream os;
          os << "instance " << k << " kind " << to_string(kind) << " N=" << inst.f1.rows()
             << " C=" << inst.f1.cols() << " M=" << inst.seg.num_segments
             << " normalize=" << normalize << " include_positive=" << include_pos;
          record(r, err, tolerance, os.str());
        }
      }
    }
  }
  return r;
}

SuiteResult gradient_check_suite(std::uint64_t seed, std::size_t instances_per_loss,
                                 double tolerance) {
  SuiteResult r;
  r.name = "gradient check";
  const Rng root(seed);
  for (LossKind kind : kAllKinds) {
    for (std::size_t k = 0; k < instances_per_loss; ++k) {
      Rng rng = root.substream(to_string(kind)).substream(static_cast<std::uint64_t>(k));
      const LossInstance inst = random_instance(rng, 10, 5, 4);
      const LossConfig cfg =
          variant(k % 2 == 0, (k / 2) % 2 == 1, k % 3 == 0 ? Reduction::kSum : Reduction::kMean);
      const LossOutput out = compute_loss(kind, inst.f1, inst.f2, &inst.seg, cfg);

      const auto wrt = [&](int which) {
        const Matrix& base = which == 1 ? inst.f1 : inst.f2;
        auto f = [&](std::span<const double> x) {
          Matrix m(base.rows(), base.cols(), std::vector<double>(x.begin(), x.end()));
          return which == 1 ? compute_loss(kind, m, inst.f2, &inst.seg, cfg).value
                            : compute_loss(kind, inst.f1, m, &inst.seg, cfg).value;
        };
        return numeric_gradient(f, base.values());
      };
      std::ostringstream tag;
      tag << to_string(kind) << " instance " << k << " N=" << inst.f1.rows()
          << " C=" << inst.f1.cols() << " M=" << inst.seg.num_segments;
      record(r, relative_error(out.grad_f1.data(), wrt(1)), tolerance, tag.str() + " dL/dF1");
      record(r, relative_error(out.grad_f2.data(), wrt(2)), tolerance, tag.str() + " dL/dF2");

      // End to end through the encoder on a small random cloud. Biases are
      // drawn away from zero and instances with a ReLU input near its kink are
      // redrawn: central differences are only meaningful where L is smooth.
      const std::size_t n = 8;
      PointCloud cloud;
      MlpParams params;
      ViewPair views;
      Matrix x1, x2;
      for (int attempt = 0;; ++attempt) {
        cloud.positions = Matrix(n, 3);
        cloud.colors = Matrix(n, 3);
        for (double& v : cloud.positions.data()) v = rng.uniform(-2.0, 2.0);
        for (double& v : cloud.colors.data()) v = rng.uniform();
        params = encoder_init(kEncoderInputDim, 6, 4, rng.next_u64());
        for (auto& layer : params.layers)
          for (double& b : layer.bias.data()) b = rng.uniform(-0.5, 0.5);
        views = make_view_pair(cloud, AugmentParams{}, rng.next_u64());
        x1 = encoder_features(views.view1);
        x2 = encoder_features(views.view2);
        if (min_hidden_margin(params, x1, x2) > kKinkMargin || attempt == 100) break;
      }
      KMeansConfig kc;
      kc.target_segments = 3;
      kc.seed = rng.next_u64();
      const SegmentAssignment seg = kmeans_segments(cloud, kc);

      ForwardCache c1, c2;
      const Matrix e1 = mlp_forward(params, x1, &c1);
      const Matrix e2 = mlp_forward(params, x2, &c2);
      const LossOutput lo = compute_loss(kind, e1, e2, &seg, cfg);
      auto analytic = encoder_backward(params, c1, lo.grad_f1).flatten();
      const auto g2 = encoder_backward(params, c2, lo.grad_f2).flatten();
      for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] += g2[i];

      auto f = [&](std::span<const double> flat) {
        const MlpParams p = params.with_values(flat);
        return compute_loss(kind, mlp_forward(p, x1), mlp_forward(p, x2), &seg, cfg).value;
      };
      record(r, relative_error(analytic, numeric_gradient(f, params.flatten())), tolerance,
             tag.str() + " dL/dtheta (encoder)");
    }
  }
  return r;
}

}  // namespace epc
