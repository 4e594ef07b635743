#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthkt/dataset.hpp"
#include "synthkt/metrics.hpp"

namespace synthkt {

struct DktConfig {
  std::size_t hidden_size = 64;
  std::size_t input_buckets = 128;
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t bptt_limit = 100;
  std::uint64_t seed = 0;
};

void validate(const DktConfig& config);

// Identity is only meant for test harnesses that need a linear recurrence.
enum class Activation : std::uint32_t { tanh = 0, identity = 1 };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;
using VectorView = Eigen::Map<Eigen::VectorXd>;
using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

// Single-layer recurrent network over hashed exercise buckets. All weights
// live in one flat parameter vector in the order
//   W_in [H x (2B+1)], W_rec [H x H], b_h [H], W_out [B x H], b_out [B]
// (row-major), which is also the serialised order.
class DktModel {
 public:
  DktModel() = default;
  // Zero-initialised network.
  DktModel(std::size_t hidden_size, std::size_t buckets, Activation activation = Activation::tanh);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static DktModel initialized(const DktConfig& config);

  std::size_t hidden_size() const noexcept { return hidden_; }
  std::size_t buckets() const noexcept { return buckets_; }
  std::size_t input_size() const noexcept { return 2 * buckets_ + 1; }
  Activation activation() const noexcept { return activation_; }

  std::vector<double>& parameters() noexcept { return theta_; }
  const std::vector<double>& parameters() const noexcept { return theta_; }

  MatrixView w_in() { return {theta_.data() + off_w_in(), rows_h(), cols_in()}; }
  MatrixView w_rec() { return {theta_.data() + off_w_rec(), rows_h(), rows_h()}; }
  VectorView b_h() { return {theta_.data() + off_b_h(), rows_h()}; }
  MatrixView w_out() { return {theta_.data() + off_w_out(), rows_b(), rows_h()}; }
  VectorView b_out() { return {theta_.data() + off_b_out(), rows_b()}; }
  ConstMatrixView w_in() const { return {theta_.data() + off_w_in(), rows_h(), cols_in()}; }
  ConstMatrixView w_rec() const { return {theta_.data() + off_w_rec(), rows_h(), rows_h()}; }
  ConstVectorView b_h() const { return {theta_.data() + off_b_h(), rows_h()}; }
  ConstMatrixView w_out() const { return {theta_.data() + off_w_out(), rows_b(), rows_h()}; }
  ConstVectorView b_out() const { return {theta_.data() + off_b_out(), rows_b()}; }

  bool all_finite() const;

 private:
  Eigen::Index rows_h() const { return static_cast<Eigen::Index>(hidden_); }
  Eigen::Index rows_b() const { return static_cast<Eigen::Index>(buckets_); }
  Eigen::Index cols_in() const { return static_cast<Eigen::Index>(input_size()); }
  std::size_t off_w_in() const { return 0; }
  std::size_t off_w_rec() const { return hidden_ * input_size(); }
  std::size_t off_b_h() const { return off_w_rec() + hidden_ * hidden_; }
  std::size_t off_w_out() const { return off_b_h() + hidden_; }
  std::size_t off_b_out() const { return off_w_out() + buckets_ * hidden_; }

  std::size_t hidden_ = 0;
  std::size_t buckets_ = 0;
  Activation activation_ = Activation::tanh;
  std::vector<double> theta_;
};

std::size_t bucket_of(std::string_view exercise_id, std::size_t buckets);

// One-hot bucket, bucket scaled by grade/100, and a trailing grade/100 scalar.
Eigen::VectorXd encode_step(std::string_view exercise_id, double grade, std::size_t buckets);

// Predicted normalised grade for steps 1..L-1. Throws DomainError for paths
// shorter than two steps.
std::vector<double> forward(const DktModel& model, const LearningPath& path);

// Sum of squared errors over every predicted step of `batch` divided by the
// number of predicted steps. When `gradient` is non-null it receives the
// matching gradient (resized to the parameter count). Backpropagation is cut
// every `bptt_limit` steps; hidden state still carries across the cut.
double batch_loss(const DktModel& model, std::span<const LearningPath> batch,
                  std::size_t bptt_limit, std::vector<double>* gradient = nullptr);

struct TrainReport {
  std::vector<double> epoch_losses;
  double validation_mae = 0.0;  // on the validation set, or the training set when none is given
  double wall_seconds = 0.0;
};

struct TrainResult {
  DktModel model;
  TrainReport report;
};

// Mini-batch Adam on the mean squared error. Paths shorter than two steps
// carry no prediction target and are skipped. Throws TrainingError on a
// non-finite loss.
TrainResult train(DktModel model, const Dataset& train_data, const DktConfig& config,
                  const Dataset* validation = nullptr);

// Central-difference derivative of batch_loss (no truncation) with respect
// to parameter `index`.
double numeric_gradient(const DktModel& model, std::span<const LearningPath> batch,
                        std::size_t index, double epsilon);

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double gradient_check(const DktModel& model, std::span<const LearningPath> batch, double epsilon);

// Concatenated (prediction, grade/100) pairs over all test paths, in path order.
std::vector<PredictionPair> predict_dataset(const DktModel& model, const Dataset& test_data);

// Binary container: "SYNKTDKT", u32 version, u32 activation, u64 hidden,
// u64 buckets, then the parameter vector as little-endian f64.
void save_model(std::ostream& out, const DktModel& model);
DktModel load_model(std::istream& in);
void save_model_file(const std::string& path, const DktModel& model);
DktModel load_model_file(const std::string& path);

}  // namespace synthkt
