#include "ghostsr/clustering.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ghostsr/errors.hpp"
#include "ghostsr/shift.hpp"

namespace ghostsr {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

template <typename T>
Matrix vectorize_filters(const Tensor<T>& weight) {
  const Shape& s = weight.shape();
  Matrix m(s.n, s.c * s.h * s.w);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<double>(weight.data()[i]);
  return m;
}

template <typename T>
Tensor<T> unvectorize_filters(const Matrix& rows, const Shape& weight_shape) {
  if (rows.rows != weight_shape.n || rows.cols != weight_shape.c * weight_shape.h * weight_shape.w) {
    throw std::invalid_argument("filter matrix does not match weight shape " + weight_shape.str());
  }
  Tensor<T> w(weight_shape);
  for (std::size_t i = 0; i < rows.data.size(); ++i) w.data()[i] = static_cast<T>(rows.data[i]);
  return w;
}

template Matrix vectorize_filters<float>(const Tensor<float>&);
template Matrix vectorize_filters<double>(const Tensor<double>&);
template Tensor<float> unvectorize_filters<float>(const Matrix&, const Shape&);
template Tensor<double> unvectorize_filters<double>(const Matrix&, const Shape&);

double kmeans_objective(const Matrix& points, std::span<const int> labels, const Matrix& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) {
    total += squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(labels[i])));
  }
  return total;
}

namespace {

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
  Matrix centroids(k, points.cols);
  std::vector<bool> chosen(points.rows, false);
  std::vector<double> nearest(points.rows, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(points.rows);
  for (std::size_t c = 0; c < k; ++c) {
    chosen[pick] = true;
    std::copy_n(points.row(pick).data(), points.cols, centroids.row(c).data());
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centroids.row(c)));
      if (!chosen[i]) total += nearest[i];
    }
    if (total > 0.0) {
      double target = rng.uniform_open() * total;
      pick = points.rows;
      std::size_t last = points.rows;
      for (std::size_t i = 0; i < points.rows; ++i) {
        if (chosen[i] || nearest[i] <= 0.0) continue;
        last = i;
        target -= nearest[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == points.rows) pick = last;
    } else {
      // Every remaining point coincides with a centre; take any unchosen one.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < points.rows; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[rng.index(free.size())];
    }
  }
  return centroids;
}

/// Returns true if any label changed.
bool assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels) {
  bool changed = false;
  for (std::size_t i = 0; i < points.rows; ++i) {
    int best = 0;
    double best_d = squared_distance(points.row(i), centroids.row(0));
    for (std::size_t c = 1; c < centroids.rows; ++c) {
      const double d = squared_distance(points.row(i), centroids.row(c));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (labels[i] != best) {
      labels[i] = best;
      changed = true;
    }
  }
  return changed;
}

/// Moves the point farthest from its centroid into each empty cluster and
/// centres that cluster on it. Each move strictly lowers or keeps the
/// objective, since the moved point's cost drops to zero.
bool repair_empty(const Matrix& points, Matrix& centroids, std::vector<int>& labels) {
  bool changed = false;
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    std::vector<std::size_t> sizes(centroids.rows, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    if (sizes[c] > 0) continue;
    std::size_t far = points.rows;
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
      const auto from = static_cast<std::size_t>(labels[i]);
      if (sizes[from] < 2) continue;
      const double d = squared_distance(points.row(i), centroids.row(from));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    labels[far] = static_cast<int>(c);
    std::copy_n(points.row(far).data(), points.cols, centroids.row(c).data());
    changed = true;
  }
  return changed;
}

void update_means(const Matrix& points, std::span<const int> labels, Matrix& centroids) {
  std::vector<std::size_t> sizes(centroids.rows, 0);
  Matrix sums(centroids.rows, centroids.cols);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    ++sizes[c];
    auto dst = sums.row(c);
    auto src = points.row(i);
    for (std::size_t j = 0; j < points.cols; ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    if (sizes[c] == 0) continue;
    auto dst = centroids.row(c);
    auto src = sums.row(c);
    for (std::size_t j = 0; j < centroids.cols; ++j) dst[j] = src[j] / static_cast<double>(sizes[c]);
  }
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, int max_iters) {
  if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > points.rows) {
    throw std::invalid_argument("kmeans: k=" + std::to_string(k) + " exceeds the number of points " +
                                std::to_string(points.rows));
  }
  if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");

  KMeansResult r;
  r.centroids = seed_plus_plus(points, k, rng);
  r.labels.assign(points.rows, -1);
  assign_nearest(points, r.centroids, r.labels);
  repair_empty(points, r.centroids, r.labels);
  r.history.push_back(kmeans_objective(points, r.labels, r.centroids));

  bool converged = false;
  while (r.iterations < max_iters) {
    ++r.iterations;
    update_means(points, r.labels, r.centroids);
    bool changed = assign_nearest(points, r.centroids, r.labels);
    changed = repair_empty(points, r.centroids, r.labels) || changed;
    r.history.push_back(kmeans_objective(points, r.labels, r.centroids));
    if (!changed) {
      converged = true;
      break;
    }
  }
  // Make the returned centroids the exact means of the returned partition.
  update_means(points, r.labels, r.centroids);
  r.objective = kmeans_objective(points, r.labels, r.centroids);
  if (!converged) r.history.push_back(r.objective);
  return r;
}

std::vector<int> select_intrinsic(const Matrix& points, const KMeansResult& clustering) {
  const std::size_t k = clustering.centroids.rows;
  std::vector<int> best(k, -1);
  std::vector<double> best_d(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.rows; ++i) {
    const auto c = static_cast<std::size_t>(clustering.labels[i]);
    const double d = squared_distance(points.row(i), clustering.centroids.row(c));
    if (d < best_d[c]) {
      best_d[c] = d;
      best[c] = static_cast<int>(i);
    }
  }
  for (int b : best) {
    if (b < 0) throw std::invalid_argument("select_intrinsic: clustering has an empty cluster");
  }
  std::sort(best.begin(), best.end());
  return best;
}

GhostAssignment build_ghost_assignment(std::span<const int> labels, std::span<const int> intrinsic) {
  GhostAssignment g;
  g.intrinsic.assign(intrinsic.begin(), intrinsic.end());
  std::sort(g.intrinsic.begin(), g.intrinsic.end());
  std::vector<int> position_of_cluster;
  std::vector<bool> is_intrinsic(labels.size(), false);
  for (std::size_t q = 0; q < g.intrinsic.size(); ++q) {
    const auto idx = static_cast<std::size_t>(g.intrinsic[q]);
    if (idx >= labels.size() || is_intrinsic[idx]) throw std::invalid_argument("invalid intrinsic index set");
    is_intrinsic[idx] = true;
    const auto cluster = static_cast<std::size_t>(labels[idx]);
    if (position_of_cluster.size() <= cluster) position_of_cluster.resize(cluster + 1, -1);
    if (position_of_cluster[cluster] != -1) throw std::invalid_argument("two intrinsic filters in one cluster");
    position_of_cluster[cluster] = static_cast<int>(q);
  }
  g.permutation = g.intrinsic;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (is_intrinsic[i]) continue;
    const auto cluster = static_cast<std::size_t>(labels[i]);
    if (cluster >= position_of_cluster.size() || position_of_cluster[cluster] < 0) {
      throw std::invalid_argument("filter " + std::to_string(i) + " belongs to a cluster without intrinsic filter");
    }
    g.permutation.push_back(static_cast<int>(i));
    g.assignment.push_back(position_of_cluster[cluster]);
  }
  return g;
}

GhostAssignment scratch_assignment(std::size_t c_o, double ratio) {
  const std::size_t ghosts = ghost_count(c_o, ratio);
  const std::size_t k = c_o - ghosts;
  if (k == 0) throw std::invalid_argument("ghost layer needs at least one intrinsic channel");
  GhostAssignment g;
  for (std::size_t i = 0; i < c_o; ++i) g.permutation.push_back(static_cast<int>(i));
  g.intrinsic.assign(g.permutation.begin(), g.permutation.begin() + static_cast<std::ptrdiff_t>(k));
  for (std::size_t j = 0; j < ghosts; ++j) g.assignment.push_back(static_cast<int>(j % k));
  return g;
}

LayerPlan cluster_layer(const std::string& name, const Tensor<float>& weight, double ratio, Rng& rng,
                        int max_iters) {
  LayerPlan plan;
  plan.name = name;
  plan.c_o = weight.shape().n;
  const std::size_t ghosts = ghost_count(plan.c_o, ratio);
  const std::size_t k = plan.c_o - ghosts;
  if (k == 0) throw std::invalid_argument("ghost layer needs at least one intrinsic channel");
  if (ghosts == 0) {
    plan.split = scratch_assignment(plan.c_o, 0.0);
    return plan;
  }
  const Matrix points = vectorize_filters(weight);
  const KMeansResult km = kmeans(points, k, rng, max_iters);
  plan.objective = km.objective;
  plan.split = build_ghost_assignment(km.labels, select_intrinsic(points, km));
  return plan;
}

const LayerPlan* ConversionPlan::find(const std::string& name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

namespace {

void write_list(std::ostream& out, const char* key, std::span<const int> values) {
  out << key;
  for (int v : values) out << ' ' << v;
  out << '\n';
}

}  // namespace

void ConversionPlan::write(std::ostream& out) const {
  out << "# ghostsr conversion plan\n";
  out << "# internal channel order is [intrinsic | ghost]; assignment lists ghost>source positions\n";
  out << "ratio " << std::setprecision(17) << ratio << '\n';
  for (const auto& l : layers) {
    out << "layer " << l.name << '\n';
    out << "cout " << l.c_o << '\n';
    out << "objective " << std::setprecision(17) << l.objective << '\n';
    write_list(out, "intrinsic", l.split.intrinsic);
    write_list(out, "permutation", l.split.permutation);
    out << "assignment";
    const std::size_t k = l.split.intrinsic.size();
    for (std::size_t j = 0; j < l.split.assignment.size(); ++j) {
      out << ' ' << k + j << '>' << l.split.assignment[j];
    }
    out << "\nend\n";
  }
}

ConversionPlan ConversionPlan::read(std::istream& in) {
  ConversionPlan plan;
  std::string line;
  std::size_t lineno = 0;
  LayerPlan* cur = nullptr;
  auto fail = [&](const std::string& msg) {
    throw ValidationError("plan line " + std::to_string(lineno) + ": " + msg);
  };
  auto ints = [&](std::istringstream& ss) {
    std::vector<int> v;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stoi(tok, &used));
        if (used != tok.size()) fail("bad integer '" + tok + "'");
      } catch (const std::logic_error&) {
        fail("bad integer '" + tok + "'");
      }
    }
    return v;
  };
  bool have_ratio = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "ratio") {
      if (!(ss >> plan.ratio)) fail("ratio needs a number");
      have_ratio = true;
    } else if (key == "layer") {
      if (cur) fail("layer without end");
      plan.layers.emplace_back();
      cur = &plan.layers.back();
      if (!(ss >> cur->name)) fail("layer needs a name");
    } else if (key == "end") {
      if (!cur) fail("end outside a layer");
      const std::size_t k = cur->split.intrinsic.size();
      if (cur->split.permutation.size() != cur->c_o || k + cur->split.assignment.size() != cur->c_o) {
        fail("layer " + cur->name + " has inconsistent channel counts");
      }
      cur = nullptr;
    } else if (!cur) {
      fail("'" + key + "' outside a layer");
    } else if (key == "cout") {
      if (!(ss >> cur->c_o)) fail("cout needs a number");
    } else if (key == "objective") {
      if (!(ss >> cur->objective)) fail("objective needs a number");
    } else if (key == "intrinsic") {
      cur->split.intrinsic = ints(ss);
    } else if (key == "permutation") {
      cur->split.permutation = ints(ss);
    } else if (key == "assignment") {
      std::string tok;
      const std::size_t k = cur->split.intrinsic.size();
      while (ss >> tok) {
        const auto gt = tok.find('>');
        if (gt == std::string::npos) fail("assignment entries look like ghost>source");
        try {
          const auto ghost = static_cast<std::size_t>(std::stoul(tok.substr(0, gt)));
          const int src = std::stoi(tok.substr(gt + 1));
          if (ghost != k + cur->split.assignment.size()) fail("assignment entries must be in ghost order");
          cur->split.assignment.push_back(src);
        } catch (const std::logic_error&) {
          fail("bad assignment entry '" + tok + "'");
        }
      }
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (cur) throw ValidationError("plan ends inside layer " + cur->name);
  if (!have_ratio) throw ValidationError("plan has no ratio line");
  return plan;
}

}  // namespace ghostsr
