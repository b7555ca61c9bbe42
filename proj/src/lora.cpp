#include "instructav/lora.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "instructav/error.hpp"
#include "instructav/genclient.hpp"
#include "json.hpp"

namespace instructav::lora {

namespace {

[[noreturn]] void mismatch(const std::string& what, std::size_t got, std::size_t want) {
  throw Error(ErrorCode::kDimensionMismatch, what,
              {{"got", std::to_string(got)}, {"expected", std::to_string(want)}});
}

Matrix gaussian(std::size_t rows, std::size_t cols, double sigma, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  if (sigma == 0.0) return m;
  std::normal_distribution<double> dist(0.0, sigma);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) { return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) mismatch("matrix data length", data_.size(), rows * cols);
}

Vector Matrix::multiply(std::span<const double> x) const {
  if (x.size() != cols_) mismatch("matrix-vector product", x.size(), cols_);
  Vector y(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += data_[i * cols_ + j] * x[j];
    y[i] = s;
  }
  return y;
}

Vector Matrix::multiply_transposed(std::span<const double> x) const {
  if (x.size() != rows_) mismatch("transposed matrix-vector product", x.size(), rows_);
  Vector y(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) y[j] += data_[i * cols_ + j] * x[i];
  }
  return y;
}

Matrix Matrix::multiply(const Matrix& other) const {
  if (other.rows_ != cols_) mismatch("matrix-matrix product", other.rows_, cols_);
  Matrix out(rows_, other.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < cols_; ++k) {
      const double v = (*this)(i, k);
      for (std::size_t j = 0; j < other.cols_; ++j) out(i, j) += v * other(k, j);
    }
  }
  return out;
}

void Matrix::add_scaled(const Matrix& other, double alpha) {
  if (other.rows_ != rows_ || other.cols_ != cols_) mismatch("matrix shapes differ", other.data_.size(), data_.size());
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += alpha * other.data_[k];
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::uint64_t checksum(const Matrix& m) {
  std::string bytes(m.data().size() * sizeof(double), '\0');
  std::memcpy(bytes.data(), m.data().data(), bytes.size());
  return fnv1a64(bytes, (static_cast<std::uint64_t>(m.rows()) << 32) ^ m.cols());
}

void LoraAdapter::validate() const {
  if (b.cols() != a.rows()) mismatch("B columns must equal rank", b.cols(), a.rows());
  if (b.rows() != a.cols()) mismatch("B rows must equal d", b.rows(), a.cols());
  if (rank() < 1 || rank() > dim()) {
    throw Error(ErrorCode::kInvalidArgument, "rank must satisfy 1 <= r <= d",
                {{"r", std::to_string(rank())}, {"d", std::to_string(dim())}});
  }
}

FrozenLinear::FrozenLinear(Matrix base, LoraAdapter adapter) : base_(std::move(base)), adapter_(std::move(adapter)) {
  adapter_.validate();
  if (base_.rows() != base_.cols()) mismatch("base weight must be square", base_.cols(), base_.rows());
  if (base_.rows() != adapter_.dim()) mismatch("adapter dimension", adapter_.dim(), base_.rows());
  if (!base_.all_finite()) throw Error(ErrorCode::kInvalidArgument, "base weight has non-finite entries");
}

LoraAdapter init_adapter(std::size_t d, std::size_t r, std::uint64_t seed, double sigma) {
  if (r < 1 || r > d) {
    throw Error(ErrorCode::kInvalidArgument, "rank must satisfy 1 <= r <= d",
                {{"r", std::to_string(r)}, {"d", std::to_string(d)}});
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  std::mt19937_64 rng(seed);
  return LoraAdapter{gaussian(r, d, sigma, rng), Matrix(d, r), 1.0};
}

Vector forward(const FrozenLinear& layer, std::span<const double> x) {
  if (x.size() != layer.dim()) mismatch("input length", x.size(), layer.dim());
  const auto& ad = layer.adapter();
  Vector h = layer.base().multiply(x);
  const Vector ax = ad.a.multiply(x);
  const Vector bax = ad.b.multiply(ax);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += ad.scaling * bax[i];
  return h;
}

Gradients backward(const FrozenLinear& layer, std::span<const double> x, std::span<const double> upstream) {
  const std::size_t d = layer.dim();
  if (x.size() != d) mismatch("input length", x.size(), d);
  if (upstream.size() != d) mismatch("upstream gradient length", upstream.size(), d);
  const auto& ad = layer.adapter();
  const std::size_t r = ad.rank();
  const Vector ax = ad.a.multiply(x);
  const Vector bt_up = ad.b.multiply_transposed(upstream);
  Gradients g{Matrix(r, d), Matrix(d, r)};
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < d; ++j) g.grad_a(i, j) = ad.scaling * bt_up[i] * x[j];
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < r; ++j) g.grad_b(i, j) = ad.scaling * upstream[i] * ax[j];
  }
  return g;
}

Matrix merge(const FrozenLinear& layer) {
  const auto& ad = layer.adapter();
  const Matrix ba = ad.b.multiply(ad.a);
  Matrix out = layer.base();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += ad.scaling * ba(i, j);
  }
  return out;
}

BudgetResult param_budget(const LoraBudget& b) {
  if (!b.d || !b.r || !b.layers || !b.matrices_per_layer || !b.base_params) {
    throw Error(ErrorCode::kInvalidArgument, "budget fields must all be positive");
  }
  BudgetResult out;
  out.trainable = b.layers * b.matrices_per_layer * 2 * b.d * b.r;
  out.ratio = static_cast<double>(out.trainable) / static_cast<double>(b.base_params);
  return out;
}

std::string TrainingTrace::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
  return out.str();
}

TrainingTrace train_demo(const DemoTask& task, std::size_t steps, double lr) {
  const std::size_t d = task.d;
  if (d == 0 || task.n_samples == 0) throw Error(ErrorCode::kInvalidArgument, "task needs d >= 1 and samples");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be > 0");

  std::mt19937_64 rng(task.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto unit_vector = [&] {
    Vector v(d);
    double norm = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
    for (auto& x : v) x /= std::sqrt(norm);
    return v;
  };
  const Vector teacher = unit_vector();
  const Vector readout = unit_vector();
  Matrix base = gaussian(d, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);

  std::vector<Vector> xs;
  std::vector<double> ys;  // 1 for positive, 0 for negative
  while (xs.size() < task.n_samples) {
    Vector x(d);
    for (auto& v : x) v = normal(rng);
    const double t = dot(teacher, x);
    if (std::abs(t) < task.margin) continue;
    xs.push_back(std::move(x));
    ys.push_back(t > 0 ? 1.0 : 0.0);
  }

  FrozenLinear layer(std::move(base), init_adapter(d, task.rank, rng(), task.init_sigma));
  TrainingTrace trace;
  trace.base_checksum_before = checksum(layer.base());

  const double n = static_cast<double>(xs.size());
  auto evaluate = [&](double& loss, double& acc) {
    loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double score = dot(readout, forward(layer, xs[i]));
      loss += softplus_neg(ys[i] > 0.5 ? score : -score);
      correct += (score > 0) == (ys[i] > 0.5);
    }
    loss /= n;
    acc = static_cast<double>(correct) / n;
  };

  double loss = 0.0;
  double acc = 0.0;
  evaluate(loss, acc);
  trace.base_accuracy = acc;
  trace.losses.push_back(loss);
  for (std::size_t step = 0; step < steps; ++step) {
    if (!std::isfinite(loss)) {
      trace.diverged_at_step = step;
      break;
    }
    auto& ad = layer.adapter();
    Matrix grad_a(ad.a.rows(), ad.a.cols());
    Matrix grad_b(ad.b.rows(), ad.b.cols());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double score = dot(readout, forward(layer, xs[i]));
      const double dscore = (sigmoid(score) - ys[i]) / n;
      Vector upstream(readout);
      for (auto& u : upstream) u *= dscore;
      const Gradients g = backward(layer, xs[i], upstream);
      grad_a.add_scaled(g.grad_a, 1.0);
      grad_b.add_scaled(g.grad_b, 1.0);
    }
    ad.a.add_scaled(grad_a, -lr);
    ad.b.add_scaled(grad_b, -lr);
    evaluate(loss, acc);
    trace.losses.push_back(loss);
  }
  if (!std::isfinite(loss) && !trace.diverged_at_step) trace.diverged_at_step = steps;
  trace.final_accuracy = acc;
  trace.base_checksum_after = checksum(layer.base());
  trace.adapter = layer.adapter();
  return trace;
}

std::string adapter_to_json(const LoraAdapter& adapter) {
  nlohmann::ordered_json j;
  j["d"] = adapter.dim();
  j["r"] = adapter.rank();
  j["scaling"] = adapter.scaling;
  j["A"] = adapter.a.data();
  j["B"] = adapter.b.data();
  return j.dump();
}

LoraAdapter adapter_from_json(const std::string& json) {
  const auto j = nlohmann::json::parse(json, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kInvalidArgument, "adapter JSON is not an object");
  try {
    const auto d = j.at("d").get<std::size_t>();
    const auto r = j.at("r").get<std::size_t>();
    LoraAdapter ad{Matrix(r, d, j.at("A").get<std::vector<double>>()),
                   Matrix(d, r, j.at("B").get<std::vector<double>>()), j.value("scaling", 1.0)};
    ad.validate();
    return ad;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad adapter JSON: ") + e.what());
  }
}

}  // namespace instructav::lora
