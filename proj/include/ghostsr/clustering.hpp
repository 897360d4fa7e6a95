#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ghostsr/rng.hpp"
#include "ghostsr/tensor.hpp"

namespace ghostsr {

/// Dense row-major matrix of doubles; one row per point.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  [[nodiscard]] std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Row i is filter i flattened in (c_i, s, s) order.
template <typename T>
Matrix vectorize_filters(const Tensor<T>& weight);

/// Inverse of vectorize_filters.
template <typename T>
Tensor<T> unvectorize_filters(const Matrix& rows, const Shape& weight_shape);

struct KMeansResult {
  std::vector<int> labels;  // cluster of every point
  Matrix centroids;         // mean of each cluster's members
  double objective = 0.0;   // sum of squared distances to the centroids
  /// Objective after seeding and after every Lloyd iteration; non-increasing.
  std::vector<double> history;
  int iterations = 0;
};

/// Lloyd's algorithm from k-means++ seeding. Stops at an assignment fixpoint
/// or after max_iters iterations. Empty clusters take the point farthest from
/// its centroid.
KMeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, int max_iters = 50);

double kmeans_objective(const Matrix& points, std::span<const int> labels, const Matrix& centroids);

/// One filter per cluster: the member nearest the centroid, smallest index on
/// ties. Sorted ascending.
std::vector<int> select_intrinsic(const Matrix& points, const KMeansResult& clustering);

/// How a layer's output channels split into intrinsic and ghost channels.
/// Internal channel order is [intrinsic | ghosts]; permutation[p] is the
/// original index at internal position p. assignment[j] is the internal
/// intrinsic position that ghost j (internal position k + j) shifts.
struct GhostAssignment {
  std::vector<int> intrinsic;
  std::vector<int> permutation;
  std::vector<int> assignment;
};

GhostAssignment build_ghost_assignment(std::span<const int> labels, std::span<const int> intrinsic);

/// Assignment without a pre-trained model: the first (1 - ratio) c_o channels
/// are intrinsic and ghost j sources intrinsic j mod k.
GhostAssignment scratch_assignment(std::size_t c_o, double ratio);

struct LayerPlan {
  std::string name;
  std::size_t c_o = 0;
  GhostAssignment split;
  double objective = 0.0;
};

/// Per-layer conversion decisions, serialised as plain text.
struct ConversionPlan {
  double ratio = 0.0;
  std::vector<LayerPlan> layers;

  [[nodiscard]] const LayerPlan* find(const std::string& name) const;
  void write(std::ostream& out) const;
  /// Throws ValidationError with the offending line number on malformed input.
  static ConversionPlan read(std::istream& in);
};

/// Clusters one pre-trained layer's filters at the given ghost ratio.
LayerPlan cluster_layer(const std::string& name, const Tensor<float>& weight, double ratio, Rng& rng,
                        int max_iters = 50);

}  // namespace ghostsr
