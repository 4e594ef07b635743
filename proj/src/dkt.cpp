#include "synthkt/dkt.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>

#include "synthkt/error.hpp"
#include "synthkt/rng.hpp"

namespace synthkt {

void validate(const DktConfig& c) {
  if (c.hidden_size == 0 || c.input_buckets == 0 || c.epochs == 0 || c.batch_size == 0 ||
      c.bptt_limit == 0) {
    throw DomainError("DKT sizes must all be at least 1");
  }
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw DomainError("DKT learning rate must be finite and non-negative");
  }
}

DktModel::DktModel(std::size_t hidden_size, std::size_t buckets, Activation activation)
    : hidden_(hidden_size), buckets_(buckets), activation_(activation) {
  if (hidden_size == 0 || buckets == 0) throw DomainError("DKT dimensions must be positive");
  theta_.assign(off_b_out() + buckets_, 0.0);
}

DktModel DktModel::initialized(const DktConfig& config) {
  validate(config);
  DktModel m(config.hidden_size, config.input_buckets);
  Rng rng(mix_seed(config.seed, 0x696e6974ULL));
  auto fill = [&rng](auto view, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index r = 0; r < view.rows(); ++r) {
      for (Eigen::Index c = 0; c < view.cols(); ++c) view(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    }
  };
  fill(m.w_in(), static_cast<double>(m.input_size()));
  fill(m.w_rec(), static_cast<double>(m.hidden_size()));
  fill(m.w_out(), static_cast<double>(m.hidden_size()));
  return m;
}

bool DktModel::all_finite() const {
  return std::all_of(theta_.begin(), theta_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t bucket_of(std::string_view exercise_id, std::size_t buckets) {
  if (buckets == 0) throw DomainError("bucket count must be positive");
  return static_cast<std::size_t>(stable_hash(exercise_id) % buckets);
}

Eigen::VectorXd encode_step(std::string_view exercise_id, double grade, std::size_t buckets) {
  const std::size_t b = bucket_of(exercise_id, buckets);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * buckets + 1));
  const double g = grade / 100.0;
  x(static_cast<Eigen::Index>(b)) = 1.0;
  x(static_cast<Eigen::Index>(buckets + b)) = g;
  x(static_cast<Eigen::Index>(2 * buckets)) = g;
  return x;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double open_unit(double p) {
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, lo, hi);
}

struct Gradient {
  explicit Gradient(const DktModel& m, std::vector<double>& flat)
      : w_in(flat.data(), static_cast<Eigen::Index>(m.hidden_size()),
             static_cast<Eigen::Index>(m.input_size())),
        w_rec(w_in.data() + w_in.size(), static_cast<Eigen::Index>(m.hidden_size()),
              static_cast<Eigen::Index>(m.hidden_size())),
        b_h(w_rec.data() + w_rec.size(), static_cast<Eigen::Index>(m.hidden_size())),
        w_out(b_h.data() + b_h.size(), static_cast<Eigen::Index>(m.buckets()),
              static_cast<Eigen::Index>(m.hidden_size())),
        b_out(w_out.data() + w_out.size(), static_cast<Eigen::Index>(m.buckets())) {}
  MatrixView w_in;
  MatrixView w_rec;
  VectorView b_h;
  MatrixView w_out;
  VectorView b_out;
};

// Sum of squared errors for one path; accumulates into grad when given.
double path_sse(const DktModel& m, const LearningPath& path, std::size_t bptt_limit,
                Gradient* grad) {
  const std::size_t L = path.steps.size();
  if (L < 2) return 0.0;
  const std::size_t T = L - 1;
  const std::size_t B = m.buckets();
  const auto H = static_cast<Eigen::Index>(m.hidden_size());
  const bool linear = m.activation() == Activation::identity;

  std::vector<Eigen::Index> bucket(L);
  std::vector<double> g(L);
  for (std::size_t t = 0; t < L; ++t) {
    bucket[t] = static_cast<Eigen::Index>(bucket_of(path.steps[t].exercise_id, B));
    g[t] = path.steps[t].grade / 100.0;
  }
  const auto grade_col = static_cast<Eigen::Index>(2 * B);
  const auto W_in = m.w_in();
  const auto W_rec = m.w_rec();
  const auto b_h = m.b_h();
  const auto W_out = m.w_out();
  const auto b_out = m.b_out();

  double sse = 0.0;
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
  Eigen::MatrixXd states;
  std::vector<double> dout;
  Eigen::VectorXd a(H), dh(H), da(H), dh_next(H);

  for (std::size_t start = 0; start < T; start += bptt_limit) {
    const std::size_t n = std::min(bptt_limit, T - start);
    states.resize(H, static_cast<Eigen::Index>(n + 1));
    states.col(0) = h_prev;
    dout.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t t = start + i;
      const Eigen::Index b = bucket[t];
      a.noalias() = W_rec * states.col(static_cast<Eigen::Index>(i));
      a += W_in.col(b) + g[t] * (W_in.col(static_cast<Eigen::Index>(B) + b) + W_in.col(grade_col)) +
           b_h;
      auto h = states.col(static_cast<Eigen::Index>(i + 1));
      if (linear) {
        h = a;
      } else {
        h = a.array().tanh();
      }
      const Eigen::Index j = bucket[t + 1];
      const double p = sigmoid(W_out.row(j).dot(h) + b_out(j));
      const double err = p - g[t + 1];
      sse += err * err;
      dout[i] = 2.0 * err * p * (1.0 - p);
    }
    h_prev = states.col(static_cast<Eigen::Index>(n));

    if (grad == nullptr) continue;
    dh_next.setZero();
    for (std::size_t ii = n; ii-- > 0;) {
      const std::size_t t = start + ii;
      const auto h = states.col(static_cast<Eigen::Index>(ii + 1));
      const auto hp = states.col(static_cast<Eigen::Index>(ii));
      const Eigen::Index j = bucket[t + 1];
      grad->w_out.row(j) += dout[ii] * h.transpose();
      grad->b_out(j) += dout[ii];
      dh = dout[ii] * W_out.row(j).transpose() + dh_next;
      if (linear) {
        da = dh;
      } else {
        da = dh.array() * (1.0 - h.array().square());
      }
      grad->w_rec.noalias() += da * hp.transpose();
      grad->b_h += da;
      const Eigen::Index b = bucket[t];
      grad->w_in.col(b) += da;
      grad->w_in.col(static_cast<Eigen::Index>(B) + b) += g[t] * da;
      grad->w_in.col(grade_col) += g[t] * da;
      // The carried state at a segment start is a constant.
      if (ii > 0) dh_next.noalias() = W_rec.transpose() * da;
    }
  }
  return sse;
}

double batch_sse(const DktModel& m, std::span<const LearningPath* const> batch,
                 std::size_t bptt_limit, std::vector<double>* gradient, std::size_t& steps) {
  steps = 0;
  std::optional<Gradient> view;
  if (gradient != nullptr) {
    gradient->assign(m.parameters().size(), 0.0);
    view.emplace(m, *gradient);
  }
  double sse = 0.0;
  for (const LearningPath* p : batch) {
    if (p->steps.size() < 2) continue;
    steps += p->steps.size() - 1;
    sse += path_sse(m, *p, bptt_limit, view ? &*view : nullptr);
  }
  return sse;
}

std::vector<const LearningPath*> pointers(std::span<const LearningPath> batch) {
  std::vector<const LearningPath*> out;
  out.reserve(batch.size());
  for (const auto& p : batch) out.push_back(&p);
  return out;
}

constexpr std::size_t kNoTruncation = std::numeric_limits<std::size_t>::max();

}  // namespace

std::vector<double> forward(const DktModel& model, const LearningPath& path) {
  if (path.steps.size() < 2) throw DomainError("forward needs a path of at least two steps");
  const std::size_t B = model.buckets();
  const auto H = static_cast<Eigen::Index>(model.hidden_size());
  const auto W_in = model.w_in();
  const auto W_rec = model.w_rec();
  const auto W_out = model.w_out();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H), a(H);
  std::vector<double> out;
  out.reserve(path.steps.size() - 1);
  for (std::size_t t = 0; t + 1 < path.steps.size(); ++t) {
    const auto b = static_cast<Eigen::Index>(bucket_of(path.steps[t].exercise_id, B));
    const double g = path.steps[t].grade / 100.0;
    a.noalias() = W_rec * h;
    a += W_in.col(b) +
         g * (W_in.col(static_cast<Eigen::Index>(B) + b) +
              W_in.col(static_cast<Eigen::Index>(2 * B))) +
         model.b_h();
    if (model.activation() == Activation::identity) {
      h = a;
    } else {
      h = a.array().tanh();
    }
    const auto j = static_cast<Eigen::Index>(bucket_of(path.steps[t + 1].exercise_id, B));
    out.push_back(open_unit(sigmoid(W_out.row(j).dot(h) + model.b_out()(j))));
  }
  return out;
}

double batch_loss(const DktModel& model, std::span<const LearningPath> batch,
                  std::size_t bptt_limit, std::vector<double>* gradient) {
  if (bptt_limit == 0) throw DomainError("bptt_limit must be positive");
  const auto ptrs = pointers(batch);
  std::size_t steps = 0;
  const double sse = batch_sse(model, ptrs, bptt_limit, gradient, steps);
  if (steps == 0) throw DomainError("batch has no path with at least two steps");
  const double scale = 1.0 / static_cast<double>(steps);
  if (gradient != nullptr) {
    for (double& v : *gradient) v *= scale;
  }
  return sse * scale;
}

TrainResult train(DktModel model, const Dataset& train_data, const DktConfig& config,
                  const Dataset* validation) {
  validate(config);
  if (model.parameters().empty()) throw DomainError("train needs a constructed model");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<const LearningPath*> usable;
  for (const auto& p : train_data.paths()) {
    if (p.steps.size() >= 2) usable.push_back(&p);
  }
  if (usable.empty()) throw DomainError("training data has no path with at least two steps");

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  auto& theta = model.parameters();
  std::vector<double> m1(theta.size(), 0.0), m2(theta.size(), 0.0), grad;
  std::size_t adam_t = 0;

  TrainResult result;
  std::vector<const LearningPath*> order = usable;
  std::vector<const LearningPath*> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle(mix_seed(config.seed, 0x7368756600000000ULL + epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[shuffle.index(i + 1)]);

    double epoch_sse = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
      std::size_t steps = 0;
      const double sse = batch_sse(model, batch, config.bptt_limit, &grad, steps);
      if (!std::isfinite(sse)) {
        throw TrainingError(epoch, b,
                            "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(b));
      }
      epoch_sse += sse;
      epoch_steps += steps;

      ++adam_t;
      const double inv = 1.0 / static_cast<double>(steps);
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t));
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const double gk = grad[k] * inv;
        m1[k] = kBeta1 * m1[k] + (1.0 - kBeta1) * gk;
        m2[k] = kBeta2 * m2[k] + (1.0 - kBeta2) * gk * gk;
        theta[k] -= config.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + kEps);
      }
    }
    result.report.epoch_losses.push_back(epoch_sse / static_cast<double>(epoch_steps));
  }
  if (!model.all_finite()) {
    throw TrainingError(config.epochs, 0, "training produced non-finite weights");
  }
  const Dataset& eval = validation != nullptr && !validation->empty() ? *validation : train_data;
  const auto pairs = predict_dataset(model, eval);
  result.report.validation_mae = pairs.empty() ? 0.0 : mae(pairs);
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.model = std::move(model);
  return result;
}

double numeric_gradient(const DktModel& model, std::span<const LearningPath> batch,
                        std::size_t index, double epsilon) {
  if (index >= model.parameters().size()) throw DomainError("parameter index out of range");
  DktModel probe = model;
  const double base = probe.parameters()[index];
  probe.parameters()[index] = base + epsilon;
  const double up = batch_loss(probe, batch, kNoTruncation);
  probe.parameters()[index] = base - epsilon;
  const double down = batch_loss(probe, batch, kNoTruncation);
  return (up - down) / (2.0 * epsilon);
}

double gradient_check(const DktModel& model, std::span<const LearningPath> batch, double epsilon) {
  std::vector<double> analytic;
  batch_loss(model, batch, kNoTruncation, &analytic);
  DktModel probe = model;
  auto& theta = probe.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double base = theta[i];
    theta[i] = base + epsilon;
    const double up = batch_loss(probe, batch, kNoTruncation);
    theta[i] = base - epsilon;
    const double down = batch_loss(probe, batch, kNoTruncation);
    theta[i] = base;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

std::vector<PredictionPair> predict_dataset(const DktModel& model, const Dataset& test_data) {
  if (test_data.empty()) throw DomainError("predict_dataset on an empty test set");
  std::vector<PredictionPair> out;
  for (const auto& path : test_data.paths()) {
    if (path.steps.size() < 2) continue;
    const auto preds = forward(model, path);
    for (std::size_t t = 0; t < preds.size(); ++t) {
      out.push_back({preds[t], path.steps[t + 1].grade / 100.0});
    }
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'S', 'Y', 'N', 'K', 'T', 'D', 'K', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  if constexpr (std::is_floating_point_v<T>) {
    write_le(out, std::bit_cast<std::uint64_t>(value));
  } else {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
  }
}

template <typename T>
T read_le(std::istream& in) {
  if constexpr (std::is_floating_point_v<T>) {
    return std::bit_cast<double>(read_le<std::uint64_t>(in));
  } else {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("truncated DKT model");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
  }
}

}  // namespace

void save_model(std::ostream& out, const DktModel& model) {
  out.write(kMagic, sizeof kMagic);
  write_le<std::uint32_t>(out, kFormatVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.activation()));
  write_le<std::uint64_t>(out, model.hidden_size());
  write_le<std::uint64_t>(out, model.buckets());
  for (double v : model.parameters()) write_le<double>(out, v);
  if (!out) throw IoError("failed writing DKT model");
}

DktModel load_model(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError("not a DKT model container");
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kFormatVersion) throw IoError("unsupported DKT model version " + std::to_string(version));
  const auto activation = read_le<std::uint32_t>(in);
  if (activation > 1) throw IoError("unknown activation code in DKT model");
  const auto hidden = read_le<std::uint64_t>(in);
  const auto buckets = read_le<std::uint64_t>(in);
  DktModel model(hidden, buckets, static_cast<Activation>(activation));
  for (double& v : model.parameters()) v = read_le<double>(in);
  return model;
}

void save_model_file(const std::string& path, const DktModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_model(out, model);
}

DktModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return load_model(in);
}

}  // namespace synthkt
