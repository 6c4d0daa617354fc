#include "cbrec/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cbrec/errors.hpp"

namespace cbrec {

const char* scorer_kind_name(ScorerKind k) {
  return k == ScorerKind::linear ? "linear" : "mlp";
}

namespace {

double stable_sigmoid(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

}  // namespace

double bce_loss(double p, int reward) {
  p = std::clamp(p, kProbEps, 1.0 - kProbEps);
  return reward ? -std::log(p) : -std::log(1.0 - p);
}

Scorer::Scorer(ScorerKind kind, size_t context_dim, size_t n_items,
               const std::vector<size_t>& hidden, uint64_t init_seed)
    : kind_(kind), context_dim_(context_dim), n_items_(n_items) {
  if (context_dim == 0) fail(Errc::dimension_mismatch, "scorer needs context_dim > 0");
  widths_.push_back(context_dim + n_items);
  if (kind == ScorerKind::mlp) {
    for (size_t h : hidden) {
      if (h == 0) fail(Errc::bad_config, "hidden layer width must be > 0");
      widths_.push_back(h);
    }
  }
  widths_.push_back(1);

  size_t total = 0;
  for (size_t l = 0; l + 1 < widths_.size(); ++l) {
    w_offset_.push_back(total);
    total += widths_[l] * widths_[l + 1];
    b_offset_.push_back(total);
    total += widths_[l + 1];
  }
  params_.assign(total, 0.0);

  // Xavier-uniform weights, zero biases.
  Rng rng(init_seed);
  for (size_t l = 0; l + 1 < widths_.size(); ++l) {
    const size_t fan_in = widths_[l];
    const size_t fan_out = widths_[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (size_t i = 0; i < fan_in * fan_out; ++i) {
      params_[w_offset_[l] + i] = (2.0 * rng.uniform() - 1.0) * bound;
    }
  }
}

void Scorer::assemble_input(std::span<const double> context, int item,
                            std::vector<double>& input) const {
  if (context.size() != context_dim_) {
    fail(Errc::dimension_mismatch,
         "context has dimension " + std::to_string(context.size()) + ", schema says " +
             std::to_string(context_dim_));
  }
  input.assign(widths_.front(), 0.0);
  std::copy(context.begin(), context.end(), input.begin());
  if (n_items_ > 0) {
    if (item < 0 || static_cast<size_t>(item) >= n_items_) {
      fail(Errc::dimension_mismatch, "item index " + std::to_string(item) + " out of range");
    }
    input[context_dim_ + static_cast<size_t>(item)] = 1.0;
  }
}

double Scorer::forward(const std::vector<double>& input,
                       std::vector<std::vector<double>>* acts) const {
  const size_t n_layers = widths_.size() - 1;
  std::vector<double> cur = input;
  if (acts) {
    acts->clear();
    acts->push_back(cur);
  }
  for (size_t l = 0; l < n_layers; ++l) {
    const size_t in = widths_[l];
    const size_t out = widths_[l + 1];
    std::vector<double> next(out);
    const double* w = params_.data() + w_offset_[l];
    const double* b = params_.data() + b_offset_[l];
    for (size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = w + o * in;
      for (size_t i = 0; i < in; ++i) z += row[i] * cur[i];
      next[o] = z;
    }
    if (l + 1 < n_layers) {
      for (double& z : next) z = z > 0.0 ? z : 0.0;  // ReLU hidden
    }
    if (acts) acts->push_back(next);
    cur = std::move(next);
  }
  return stable_sigmoid(cur[0]);
}

double Scorer::score(std::span<const double> context, int item) const {
  std::vector<double> input;
  assemble_input(context, item, input);
  return forward(input, nullptr);
}

void Scorer::score_many(std::span<const double> context, std::span<const int> items,
                        std::span<double> out) const {
  if (out.size() != items.size()) fail(Errc::dimension_mismatch, "score_many output size");
  if (items.empty()) return;
  std::vector<double> input;
  assemble_input(context, n_items_ > 0 ? items.front() : -1, input);
  for (size_t i = 0; i < items.size(); ++i) {
    if (n_items_ > 0) {
      const int item = items[i];
      if (item < 0 || static_cast<size_t>(item) >= n_items_) {
        fail(Errc::dimension_mismatch, "item index " + std::to_string(item) + " out of range");
      }
      std::fill(input.begin() + context_dim_, input.end(), 0.0);
      input[context_dim_ + static_cast<size_t>(item)] = 1.0;
    }
    out[i] = forward(input, nullptr);
  }
}

void Scorer::accumulate_gradient(const ReplayEntry& entry, std::vector<double>& grad,
                                 double* loss_out) const {
  std::vector<double> input;
  assemble_input(entry.context, entry.item, input);

  std::vector<std::vector<double>> acts;  // acts[0] = input, acts[l] = post-activation
  const double p = forward(input, &acts);
  if (loss_out) *loss_out = bce_loss(p, entry.reward);

  const size_t n_layers = widths_.size() - 1;
  // d(loss)/d(z_out) for sigmoid + BCE.
  std::vector<double> delta = {p - static_cast<double>(entry.reward)};
  for (size_t l = n_layers; l-- > 0;) {
    const size_t in = widths_[l];
    const size_t out = widths_[l + 1];
    const std::vector<double>& a_prev = acts[l];
    double* gw = grad.data() + w_offset_[l];
    double* gb = grad.data() + b_offset_[l];
    for (size_t o = 0; o < out; ++o) {
      gb[o] += delta[o];
      double* row = gw + o * in;
      for (size_t i = 0; i < in; ++i) row[i] += delta[o] * a_prev[i];
    }
    if (l == 0) break;
    const double* w = params_.data() + w_offset_[l];
    std::vector<double> prev_delta(in, 0.0);
    for (size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      for (size_t i = 0; i < in; ++i) prev_delta[i] += row[i] * delta[o];
    }
    // ReLU derivative: the stored activation is already rectified, so the
    // gate is a_prev > 0.
    for (size_t i = 0; i < in; ++i) {
      if (a_prev[i] <= 0.0) prev_delta[i] = 0.0;
    }
    delta = std::move(prev_delta);
  }
}

double Scorer::sgd_update(std::span<const ReplayEntry> batch, double learning_rate) {
  if (batch.empty()) fail(Errc::empty_buffer, "sgd_update on an empty batch");
  if (learning_rate <= 0.0) fail(Errc::bad_config, "learning_rate must be > 0");
  std::vector<double> grad(params_.size(), 0.0);
  double total_loss = 0.0;
  for (const auto& entry : batch) {
    double loss = 0.0;
    accumulate_gradient(entry, grad, &loss);
    total_loss += loss;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    params_[i] -= learning_rate * inv * grad[i];
  }
  return total_loss * inv;
}

double Scorer::sgd_update_weighted(const ReplayEntry& entry, double learning_rate,
                                   double weight) {
  std::vector<double> grad(params_.size(), 0.0);
  double loss = 0.0;
  accumulate_gradient(entry, grad, &loss);
  for (size_t i = 0; i < params_.size(); ++i) {
    params_[i] -= learning_rate * weight * grad[i];
  }
  return loss;
}

double Scorer::loss(const ReplayEntry& entry) const {
  return bce_loss(score(entry.context, entry.item), entry.reward);
}

std::vector<double> Scorer::loss_gradient(const ReplayEntry& entry) const {
  std::vector<double> grad(params_.size(), 0.0);
  accumulate_gradient(entry, grad, nullptr);
  return grad;
}

void Scorer::set_flat_parameters(std::span<const double> p) {
  if (p.size() != params_.size()) {
    fail(Errc::length_mismatch, "parameter vector has length " + std::to_string(p.size()) +
                                    ", model has " + std::to_string(params_.size()));
  }
  std::copy(p.begin(), p.end(), params_.begin());
}

double gradient_check(const Scorer& scorer, const ReplayEntry& entry, double h) {
  const std::vector<double> analytic = scorer.loss_gradient(entry);
  Scorer probe = scorer;
  std::vector<double> params = scorer.flat_parameters();
  double max_err = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    probe.set_flat_parameters(params);
    const double up = probe.loss(entry);
    params[i] = saved - h;
    probe.set_flat_parameters(params);
    const double down = probe.loss(entry);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
  }
  return max_err;
}

void ReplayBuffer::push(ReplayEntry entry) {
  entries_.push_back(std::move(entry));
  if (capacity_ > 0 && entries_.size() > capacity_) entries_.pop_front();
}

std::vector<ReplayEntry> sample_minibatch(const ReplayBuffer& buffer, size_t n, uint64_t seed) {
  if (buffer.empty()) fail(Errc::empty_buffer, "sample_minibatch on an empty buffer");
  Rng rng(seed);
  std::vector<ReplayEntry> out;
  out.reserve(n);
  if (buffer.size() >= n) {
    for (size_t i : rng.sample_without_replacement(buffer.size(), n)) {
      out.push_back(buffer.at(i));
    }
  } else {
    for (size_t i = 0; i < n; ++i) {
      out.push_back(buffer.at(static_cast<size_t>(rng.below(buffer.size()))));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'C', 'B', 'S', 'C'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_scorer(const std::string& path, const Scorer& scorer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot write " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, scorer.kind() == ScorerKind::linear ? 0 : 1);
  put_u32(out, static_cast<uint32_t>(scorer.context_dim()));
  put_u32(out, static_cast<uint32_t>(scorer.n_items()));
  const auto& widths = scorer.layer_widths();
  put_u32(out, static_cast<uint32_t>(widths.size()));
  for (size_t w : widths) put_u32(out, static_cast<uint32_t>(w));
  put_u64(out, scorer.parameter_count());
  for (double p : scorer.flat_parameters()) put_f64(out, p);
  if (!out) fail(Errc::io_error, "write failed for " + path);

  nlohmann::json meta;
  meta["kind"] = scorer_kind_name(scorer.kind());
  meta["context_dim"] = scorer.context_dim();
  meta["n_items"] = scorer.n_items();
  meta["layer_widths"] = widths;
  meta["parameter_count"] = scorer.parameter_count();
  meta["format_version"] = kVersion;
  std::ofstream side(path + ".json");
  if (!side) fail(Errc::io_error, "cannot write " + path + ".json");
  side << meta.dump(2) << "\n";
}

Scorer load_scorer(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    fail(Errc::bad_data, path + " is not a scorer checkpoint");
  }
  const uint32_t version = get_u32(in);
  if (version != kVersion) {
    fail(Errc::bad_data, "unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t kind_raw = get_u32(in);
  const uint32_t context_dim = get_u32(in);
  const uint32_t n_items = get_u32(in);
  const uint32_t n_widths = get_u32(in);
  std::vector<size_t> widths(n_widths);
  for (auto& w : widths) w = get_u32(in);
  const uint64_t n_params = get_u64(in);
  if (!in || n_widths < 2) fail(Errc::bad_data, "truncated checkpoint " + path);

  std::vector<size_t> hidden(widths.begin() + 1, widths.end() - 1);
  Scorer scorer(kind_raw == 0 ? ScorerKind::linear : ScorerKind::mlp, context_dim, n_items,
                hidden, /*init_seed=*/0);
  if (scorer.parameter_count() != n_params) {
    fail(Errc::bad_data, "checkpoint parameter count mismatch in " + path);
  }
  std::vector<double> params(n_params);
  for (auto& p : params) p = get_f64(in);
  if (!in) fail(Errc::bad_data, "truncated checkpoint " + path);
  scorer.set_flat_parameters(params);
  return scorer;
}

}  // namespace cbrec
