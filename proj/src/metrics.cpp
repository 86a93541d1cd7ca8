#include "vrpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "vrpc/error.hpp"
#include "vrpc/geometry.hpp"

namespace vrpc {

namespace {

void require_nonempty(const PointCloud& x, const PointCloud& y, const char* op) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::kShape, std::string(op) + ": empty point cloud");
}

void require_same_size(const PointCloud& x, const PointCloud& y, const char* op) {
  require_nonempty(x, y, op);
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kShape, std::string(op) + ": sizes " + std::to_string(x.size()) + " and " +
                                       std::to_string(y.size()) + " differ");
  }
}

// Mean over `from` of the squared distance to the nearest point of `to`.
double mean_nearest_sq(const PointCloud& from, const KdIndex& to) {
  double sum = 0.0;
  for (const auto& p : from.points) sum += to.nearest(p).second;
  return sum / static_cast<double>(from.size());
}

double euclid(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

PointCloud rows_to_cloud(const ad::Tensor& t, const char* op) {
  if (t.cols() != 3 || t.rows() == 0) {
    throw Error(ErrorCode::kShape, std::string(op) + ": expected m x 3 points, got " + ad::shape_string(t.shape()));
  }
  PointCloud pc;
  pc.points.resize(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) pc.points[i] = {t.at(i, 0), t.at(i, 1), t.at(i, 2)};
  return pc;
}

}  // namespace

// ---- chamfer -----------------------------------------------------------

double chamfer(const PointCloud& x, const PointCloud& y) {
  require_nonempty(x, y, "chamfer");
  const KdIndex ix(x), iy(y);
  return mean_nearest_sq(x, iy) + mean_nearest_sq(y, ix);
}

ad::Var chamfer_loss(ad::Var recon, const PointCloud& target) {
  const PointCloud r = rows_to_cloud(recon.value(), "chamfer_loss");
  require_nonempty(r, target, "chamfer_loss");
  const KdIndex ir(r), it(target);
  const std::size_t m = r.size();
  const std::size_t t = target.size();

  // d/dr_j of both terms, accumulated in index order.
  ad::Tensor grad({m, 3});
  double forward = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const auto [j, d2] = ir.nearest(target[i]);
    forward += d2;
    for (int c = 0; c < 3; ++c) grad.at(j, c) += 2.0 * (r[j][c] - target[i][c]) / static_cast<double>(t);
  }
  double backward = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto [i, d2] = it.nearest(r[j]);
    backward += d2;
    for (int c = 0; c < 3; ++c) grad.at(j, c) += 2.0 * (r[j][c] - target[i][c]) / static_cast<double>(m);
  }
  const double value = forward / static_cast<double>(t) + backward / static_cast<double>(m);
  return recon.tape()->record(ad::Tensor::scalar(value), {recon}, [grad = std::move(grad)](const ad::BackwardPass& bp) {
    ad::Tensor* dst = bp.grad(0);
    if (!dst) return;
    const double g = bp.out_grad().item();
    for (std::size_t k = 0; k < grad.size(); ++k) (*dst)[k] += g * grad[k];
  });
}

// ---- earth mover's -----------------------------------------------------

double assignment_cost(const PointCloud& x, const PointCloud& y, std::span<const std::size_t> assignment) {
  double sum = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) sum += euclid(x[i], y[assignment[i]]);
  return sum / static_cast<double>(assignment.size());
}

std::vector<std::size_t> hungarian_assignment(const PointCloud& x, const PointCloud& y) {
  require_same_size(x, y, "emd_exact");
  const std::size_t n = x.size();
  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting path with potentials; rows and columns are 1-based,
  // column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t r0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = euclid(x[r0 - 1], y[c - 1]) - u[r0] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t c = 1; c <= n; ++c) assignment[match[c] - 1] = c - 1;
  return assignment;
}

double emd_exact(const PointCloud& x, const PointCloud& y) {
  const auto a = hungarian_assignment(x, y);
  return assignment_cost(x, y, a);
}

std::vector<std::size_t> auction_assignment(const PointCloud& x, const PointCloud& y, std::size_t phases) {
  require_same_size(x, y, "emd_approx");
  if (phases < 1) throw Error(ErrorCode::kRange, "emd_approx: need at least one phase");
  const std::size_t n = x.size();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::vector<double> cost(n * n);
  double max_cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cost[i * n + j] = euclid(x[i], y[j]);
      max_cost = std::max(max_cost, cost[i * n + j]);
    }
  }
  std::vector<std::size_t> best(n);
  for (std::size_t i = 0; i < n; ++i) best[i] = i;
  if (n == 1 || max_cost == 0.0) return best;
  double best_cost = assignment_cost(x, y, best);

  std::vector<double> price(n, 0.0);
  std::vector<std::size_t> owner(n), assigned(n);
  double eps = max_cost / 4.0;
  for (std::size_t phase = 0; phase < phases; ++phase) {
    std::fill(owner.begin(), owner.end(), kNone);
    std::fill(assigned.begin(), assigned.end(), kNone);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i) queue.push_back(i);
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      // Best and second-best net value -cost - price; ties to the lower j.
      std::size_t j1 = 0;
      double v1 = -std::numeric_limits<double>::infinity();
      double v2 = v1;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = -cost[i * n + j] - price[j];
        if (v > v1) {
          v2 = v1;
          v1 = v;
          j1 = j;
        } else if (v > v2) {
          v2 = v;
        }
      }
      price[j1] += (v1 - v2) + eps;
      if (owner[j1] != kNone) {
        assigned[owner[j1]] = kNone;
        queue.push_back(owner[j1]);
      }
      owner[j1] = i;
      assigned[i] = j1;
    }
    const double c = assignment_cost(x, y, assigned);
    if (c < best_cost) {
      best_cost = c;
      best = assigned;
    }
    eps /= 4.0;
  }
  return best;
}

double emd_approx(const PointCloud& x, const PointCloud& y, std::size_t phases) {
  const auto a = auction_assignment(x, y, phases);
  return assignment_cost(x, y, a);
}

ad::Var emd_loss(ad::Var recon, const PointCloud& target, std::size_t phases) {
  const PointCloud r = rows_to_cloud(recon.value(), "emd_loss");
  const auto a = auction_assignment(target, r, phases);
  const std::size_t n = target.size();
  ad::Tensor grad({n, 3});
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = a[i];
    const double d = euclid(target[i], r[j]);
    sum += d;
    if (d == 0.0) continue;
    for (int c = 0; c < 3; ++c) grad.at(j, c) = (r[j][c] - target[i][c]) / (d * static_cast<double>(n));
  }
  return recon.tape()->record(ad::Tensor::scalar(sum / static_cast<double>(n)), {recon},
                              [grad = std::move(grad)](const ad::BackwardPass& bp) {
                                ad::Tensor* dst = bp.grad(0);
                                if (!dst) return;
                                const double g = bp.out_grad().item();
                                for (std::size_t k = 0; k < grad.size(); ++k) (*dst)[k] += g * grad[k];
                              });
}

// ---- surface measures --------------------------------------------------

double fscore(const PointCloud& reference, const PointCloud& recon, double d) {
  if (!(d > 0.0)) throw Error(ErrorCode::kRange, "fscore: threshold must be positive");
  require_nonempty(reference, recon, "fscore");
  const KdIndex iref(reference), irec(recon);
  const double d2 = d * d;
  std::size_t near_recon = 0, near_ref = 0;
  for (const auto& q : recon.points) near_recon += iref.nearest(q).second <= d2 ? 1 : 0;
  for (const auto& p : reference.points) near_ref += irec.nearest(p).second <= d2 ? 1 : 0;
  const double precision = static_cast<double>(near_recon) / static_cast<double>(recon.size());
  const double recall = static_cast<double>(near_ref) / static_cast<double>(reference.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double p2p(const PointCloud& reference, const PointCloud& recon) {
  require_nonempty(reference, recon, "p2p");
  const KdIndex iref(reference), irec(recon);
  return std::sqrt(std::max(mean_nearest_sq(recon, iref), mean_nearest_sq(reference, irec)));
}

double p2plane(const PointCloud& reference, const PointCloud& recon, std::span<const Point3> normals) {
  require_nonempty(reference, recon, "p2plane");
  if (normals.size() != reference.size()) {
    throw Error(ErrorCode::kShape, "p2plane: " + std::to_string(normals.size()) + " normals for " +
                                       std::to_string(reference.size()) + " reference points");
  }
  const KdIndex iref(reference), irec(recon);
  double to_ref = 0.0;
  for (const auto& q : recon.points) {
    const std::size_t p = iref.nearest(q).first;
    const double e = dot(q - reference[p], normals[p]);
    to_ref += e * e;
  }
  double to_rec = 0.0;
  for (std::size_t p = 0; p < reference.size(); ++p) {
    const std::size_t q = irec.nearest(reference[p]).first;
    const double e = dot(recon[q] - reference[p], normals[p]);
    to_rec += e * e;
  }
  to_ref /= static_cast<double>(recon.size());
  to_rec /= static_cast<double>(reference.size());
  return std::sqrt(std::max(to_ref, to_rec));
}

MetricReport evaluate_metrics(const PointCloud& reference, const PointCloud& recon,
                              std::span<const Point3> reference_normals, const MetricOptions& opts) {
  std::vector<Point3> estimated;
  if (reference_normals.empty()) {
    estimated = estimate_normals(reference, std::min(kDefaultNormalNeighbors, reference.size()));
    reference_normals = estimated;
  }
  MetricReport r;
  r.cd = chamfer(reference, recon);
  if (reference.size() == recon.size()) {
    r.emd = reference.size() <= opts.exact_emd_limit ? emd_exact(reference, recon) : emd_approx(reference, recon);
  } else {
    r.emd = std::numeric_limits<double>::quiet_NaN();
  }
  r.fscore = fscore(reference, recon, opts.fscore_threshold);
  r.p2p = p2p(reference, recon);
  r.p2plane = p2plane(reference, recon, reference_normals);
  return r;
}

}  // namespace vrpc
