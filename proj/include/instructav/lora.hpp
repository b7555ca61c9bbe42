#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace instructav::lora {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Vector multiply(std::span<const double> x) const;
  // this^T * x
  Vector multiply_transposed(std::span<const double> x) const;
  Matrix multiply(const Matrix& other) const;
  // this += alpha * other
  void add_scaled(const Matrix& other, double alpha);

  bool all_finite() const;
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// FNV-1a over the raw bytes of the entries; equal iff bit-identical (barring
// collisions).
std::uint64_t checksum(const Matrix& m);

struct LoraAdapter {
  Matrix a;  // rank x d
  Matrix b;  // d x rank
  double scaling = 1.0;

  std::size_t rank() const noexcept { return a.rows(); }
  std::size_t dim() const noexcept { return a.cols(); }
  // Shapes agree and 1 <= rank <= d. Throws Error(kDimensionMismatch).
  void validate() const;
};

// Frozen base weight plus a trainable low-rank adapter. The base is only
// reachable through a const accessor.
class FrozenLinear {
 public:
  FrozenLinear(Matrix base, LoraAdapter adapter);

  const Matrix& base() const noexcept { return base_; }
  const LoraAdapter& adapter() const noexcept { return adapter_; }
  LoraAdapter& adapter() noexcept { return adapter_; }
  std::size_t dim() const noexcept { return base_.rows(); }

 private:
  Matrix base_;
  LoraAdapter adapter_;
};

// A ~ N(0, sigma^2) from a seeded generator, B = 0, scaling 1.
LoraAdapter init_adapter(std::size_t d, std::size_t r, std::uint64_t seed, double sigma = 0.02);

// W0 x + scaling * B (A x), without forming B A.
Vector forward(const FrozenLinear& layer, std::span<const double> x);

struct Gradients {
  Matrix grad_a;  // scaling * (B^T upstream) x^T
  Matrix grad_b;  // scaling * upstream (A x)^T
};

Gradients backward(const FrozenLinear& layer, std::span<const double> x, std::span<const double> upstream);

// W0 + scaling * B A
Matrix merge(const FrozenLinear& layer);

struct LoraBudget {
  std::uint64_t d = 0;
  std::uint64_t r = 0;
  std::uint64_t layers = 0;
  std::uint64_t matrices_per_layer = 0;
  std::uint64_t base_params = 0;
};

struct BudgetResult {
  std::uint64_t trainable = 0;
  double ratio = 0.0;
};

// trainable = layers * matrices_per_layer * 2 * d * r; ratio = trainable / base_params.
BudgetResult param_budget(const LoraBudget& budget);

// Synthetic linearly separable binary task. Inputs are standard normal and
// labelled by the sign of a hidden direction; points closer than `margin` to
// the boundary are redrawn. The frozen base and the linear readout are random,
// so the base model alone is near chance.
struct DemoTask {
  std::size_t d = 8;
  std::size_t rank = 2;
  std::size_t n_samples = 256;
  double margin = 0.1;
  std::uint64_t seed = 7;
  double init_sigma = 0.02;
};

struct TrainingTrace {
  // Loss before each update, plus the loss after the last one.
  std::vector<double> losses;
  double base_accuracy = 0.0;
  double final_accuracy = 0.0;
  std::uint64_t base_checksum_before = 0;
  std::uint64_t base_checksum_after = 0;
  std::optional<std::size_t> diverged_at_step;
  LoraAdapter adapter;

  bool base_unchanged() const { return base_checksum_before == base_checksum_after; }
  // "step,loss" header then one row per entry of `losses`.
  std::string to_csv() const;
};

// Full-batch gradient descent on mean logistic loss, updating only A and B.
// A non-finite loss stops training and sets diverged_at_step.
TrainingTrace train_demo(const DemoTask& task, std::size_t steps, double lr);

// {"d","r","scaling","A","B"} with row-major flat arrays.
std::string adapter_to_json(const LoraAdapter& adapter);
LoraAdapter adapter_from_json(const std::string& json);

}  // namespace instructav::lora
