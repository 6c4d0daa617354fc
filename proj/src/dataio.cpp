#include "cbrec/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cbrec/csv.hpp"
#include "cbrec/errors.hpp"

namespace cbrec {

size_t FeatureSchema::context_dim() const {
  size_t dim = continuous_fields.size();
  for (const auto& f : categorical_fields) dim += f.vocabulary.size();
  return dim;
}

int FeatureSchema::item_index(const std::string& id) const {
  auto it = std::lower_bound(item_vocabulary.begin(), item_vocabulary.end(), id);
  if (it == item_vocabulary.end() || *it != id) return -1;
  return static_cast<int>(it - item_vocabulary.begin());
}

FeatureSchema fit_schema(const std::vector<RawInteraction>& raws) {
  if (raws.empty()) fail(Errc::empty_log, "cannot fit a schema on zero interactions");

  std::map<std::string, std::set<std::string>> cat_values;
  std::map<std::string, std::pair<double, double>> cont_range;
  std::set<std::string> items;

  for (const auto& raw : raws) {
    for (const auto& [name, value] : raw.categorical_values) {
      if (cont_range.count(name) || raw.continuous_values.count(name)) {
        fail(Errc::mixed_type, "field '" + name + "' has both numeric and non-numeric values");
      }
      cat_values[name].insert(value);
    }
    for (const auto& [name, value] : raw.continuous_values) {
      if (cat_values.count(name)) {
        fail(Errc::mixed_type, "field '" + name + "' has both numeric and non-numeric values");
      }
      auto it = cont_range.find(name);
      if (it == cont_range.end()) {
        cont_range[name] = {value, value};
      } else {
        it->second.first = std::min(it->second.first, value);
        it->second.second = std::max(it->second.second, value);
      }
    }
    items.insert(raw.chosen_item);
  }

  FeatureSchema schema;
  for (const auto& [name, values] : cat_values) {
    schema.categorical_fields.push_back({name, {values.begin(), values.end()}});
  }
  for (const auto& [name, range] : cont_range) {
    schema.continuous_fields.push_back({name, range.first, range.second});
  }
  schema.item_vocabulary.assign(items.begin(), items.end());
  return schema;
}

EncodedTrial encode(const RawInteraction& raw, const FeatureSchema& schema, EncodeStats* stats) {
  EncodedTrial trial;
  trial.context.assign(schema.context_dim(), 0.0);

  size_t offset = 0;
  for (const auto& field : schema.categorical_fields) {
    auto it = raw.categorical_values.find(field.name);
    if (it == raw.categorical_values.end()) {
      fail(Errc::missing_field, "categorical field '" + field.name + "' absent from interaction");
    }
    auto pos = std::lower_bound(field.vocabulary.begin(), field.vocabulary.end(), it->second);
    if (pos != field.vocabulary.end() && *pos == it->second) {
      trial.context[offset + static_cast<size_t>(pos - field.vocabulary.begin())] = 1.0;
    } else if (stats) {
      // Unseen value: leave the block all-zero. Online streams legitimately
      // contain novel values.
      ++stats->unknown_category_count;
    }
    offset += field.vocabulary.size();
  }
  for (const auto& field : schema.continuous_fields) {
    auto it = raw.continuous_values.find(field.name);
    if (it == raw.continuous_values.end()) {
      fail(Errc::missing_field, "continuous field '" + field.name + "' absent from interaction");
    }
    double v;
    if (field.max == field.min) {
      v = 0.5;
    } else {
      v = (it->second - field.min) / (field.max - field.min);
      v = std::clamp(v, 0.0, 1.0);
    }
    trial.context[offset++] = v;
  }

  trial.chosen_item = schema.item_index(raw.chosen_item);
  if (trial.chosen_item < 0) {
    fail(Errc::unknown_item, "chosen item '" + raw.chosen_item + "' not in item vocabulary");
  }
  return trial;
}

std::vector<EncodedTrial> make_stream(const std::vector<RawInteraction>& raws,
                                      const FeatureSchema& schema,
                                      std::optional<uint64_t> order_seed, EncodeStats* stats) {
  std::vector<size_t> order(raws.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (order_seed) {
    Rng rng(*order_seed);
    rng.shuffle(order);
  } else {
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return raws[a].timestamp_ms < raws[b].timestamp_ms;
    });
  }

  std::vector<EncodedTrial> stream;
  stream.reserve(raws.size());
  for (size_t pos = 0; pos < order.size(); ++pos) {
    EncodedTrial t = encode(raws[order[pos]], schema, stats);
    t.index = pos;
    stream.push_back(std::move(t));
  }
  return stream;
}

// ---------------------------------------------------------------------------
// Synthetic environment

void validate_spec(const SyntheticEnvSpec& spec) {
  if (spec.n_items < 1) fail(Errc::bad_config, "synthetic n_items must be >= 1");
  if (spec.n_segments < 1) fail(Errc::bad_config, "synthetic n_segments must be >= 1");
  if (spec.n_continuous < 0) fail(Errc::bad_config, "synthetic n_continuous must be >= 0");
  for (int v : spec.categorical_vocab_sizes) {
    if (v < 1) fail(Errc::bad_config, "categorical vocab sizes must be >= 1");
  }
  if (static_cast<int>(spec.segment_preference_matrix.size()) != spec.n_segments) {
    fail(Errc::bad_config, "preference matrix must have one row per segment");
  }
  for (const auto& row : spec.segment_preference_matrix) {
    if (static_cast<int>(row.size()) != spec.n_items) {
      fail(Errc::bad_config, "preference row length must equal n_items");
    }
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0 || !std::isfinite(p)) fail(Errc::bad_config, "preference entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      fail(Errc::bad_config, "preference row must sum to 1 (got " + std::to_string(sum) + ")");
    }
  }
  if (spec.drift_period && *spec.drift_period < 1) {
    fail(Errc::bad_config, "drift_period must be >= 1 when set");
  }
  if (spec.feature_signal < 0.0 || spec.feature_signal > 1.0) {
    fail(Errc::bad_config, "feature_signal must lie in [0,1]");
  }
  if (spec.continuous_noise < 0.0) fail(Errc::bad_config, "continuous_noise must be >= 0");
}

namespace {

std::string padded(const std::string& prefix, int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix.c_str(), width, value);
  return buf;
}

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

std::vector<RawInteraction> generate_synthetic(const SyntheticEnvSpec& spec, size_t n_trials) {
  validate_spec(spec);
  if (n_trials == 0) fail(Errc::bad_config, "n_trials must be > 0");

  Rng rng(spec.seed);
  const int item_width = spec.n_items > 100 ? 4 : 2;

  auto current = spec.segment_preference_matrix;

  std::vector<RawInteraction> rows;
  rows.reserve(n_trials);
  for (size_t t = 0; t < n_trials; ++t) {
    if (spec.drift_period && t > 0 && t % static_cast<size_t>(*spec.drift_period) == 0) {
      // Permute which item carries which preference mass; same permutation
      // for every segment so favorites stay distinct.
      std::vector<size_t> perm(spec.n_items);
      for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      rng.shuffle(perm);
      for (int s = 0; s < spec.n_segments; ++s) {
        for (int i = 0; i < spec.n_items; ++i) {
          current[s][i] = spec.segment_preference_matrix[s][perm[i]];
        }
      }
    }

    const int segment = static_cast<int>(rng.below(spec.n_segments));

    RawInteraction raw;
    raw.user_id = padded("u", static_cast<int>(t), 6);
    raw.timestamp_ms = 1600000000000LL + static_cast<int64_t>(t);

    for (size_t j = 0; j < spec.categorical_vocab_sizes.size(); ++j) {
      const int vocab = spec.categorical_vocab_sizes[j];
      const int modal = static_cast<int>((segment + j) % static_cast<size_t>(vocab));
      int value = (rng.uniform() < spec.feature_signal)
                      ? modal
                      : static_cast<int>(rng.below(vocab));
      raw.categorical_values[padded("cat_", static_cast<int>(j), 1)] = padded("v", value, 2);
    }
    for (int j = 0; j < spec.n_continuous; ++j) {
      const double mean = (segment + 0.5) / spec.n_segments;
      const double x = std::clamp(mean + spec.continuous_noise * rng.normal(), 0.0, 1.0);
      raw.continuous_values[padded("cont_", j, 1)] = x;
    }

    const int item = sample_categorical(current[segment], rng);
    raw.chosen_item = padded("item_", item, item_width);
    rows.push_back(std::move(raw));
  }
  return rows;
}

std::vector<std::vector<double>> concentrated_preferences(int n_segments, int n_items,
                                                          double main_mass, double second_mass) {
  if (n_items < 2 || n_segments < 1) {
    fail(Errc::bad_config, "concentrated preferences need n_items >= 2, n_segments >= 1");
  }
  if (main_mass < 0 || second_mass < 0 || main_mass + second_mass > 1.0) {
    fail(Errc::bad_config, "concentrated preference masses must be >= 0 and sum to <= 1");
  }
  std::vector<std::vector<double>> rows(n_segments, std::vector<double>(n_items));
  const double rest = (1.0 - main_mass - second_mass) / (n_items - 2 > 0 ? n_items - 2 : 1);
  const int stride = std::max(1, n_items / n_segments);
  for (int s = 0; s < n_segments; ++s) {
    const int fav = (s * stride) % n_items;
    const int second = (fav + 1) % n_items;
    for (int i = 0; i < n_items; ++i) rows[s][i] = n_items > 2 ? rest : 0.0;
    rows[s][fav] = main_mass;
    rows[s][second] = second_mass;
    // Normalize away accumulated rounding so the row sums to 1 exactly.
    double sum = 0.0;
    for (double p : rows[s]) sum += p;
    for (double& p : rows[s]) p /= sum;
  }
  return rows;
}

namespace {

// Marsaglia-Tsang gamma sampler (shape >= 1; the alpha < 1 boost uses
// gamma(a+1) * U^(1/a)).
double sample_gamma(double alpha, Rng& rng) {
  if (alpha < 1.0) {
    const double u = std::max(rng.uniform(), 1e-300);
    return sample_gamma(alpha + 1.0, rng) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = std::max(rng.uniform(), 1e-300);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

std::vector<std::vector<double>> dirichlet_preferences(int n_segments, int n_items, double alpha,
                                                       uint64_t seed) {
  if (alpha <= 0.0) fail(Errc::bad_config, "dirichlet alpha must be > 0");
  if (n_items < 1 || n_segments < 1) {
    fail(Errc::bad_config, "dirichlet preferences need n_items >= 1, n_segments >= 1");
  }
  Rng rng(seed);
  std::vector<std::vector<double>> rows(n_segments, std::vector<double>(n_items));
  for (auto& row : rows) {
    double sum = 0.0;
    for (double& p : row) {
      p = sample_gamma(alpha, rng);
      sum += p;
    }
    for (double& p : row) p /= sum;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV bridge

namespace {

bool parse_number(const std::string& text, double* out) {
  if (text.empty()) return false;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(text.c_str(), &end);
  if (errno != 0 || end != text.c_str() + text.size()) return false;
  *out = v;
  return true;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<RawInteraction> interactions_from_csv(const std::string& path) {
  CsvTable table = read_csv_file(path);
  const int user_col = table.column("user_id");
  const int ts_col = table.column("timestamp");
  const int item_col = table.column("chosen_item");
  if (user_col < 0) fail(Errc::bad_data, "CSV is missing required column 'user_id'");
  if (ts_col < 0) fail(Errc::bad_data, "CSV is missing required column 'timestamp'");
  if (item_col < 0) fail(Errc::bad_data, "CSV is missing required column 'chosen_item'");

  std::vector<RawInteraction> raws;
  raws.reserve(table.rows.size());
  for (size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    RawInteraction raw;
    raw.user_id = row[user_col];
    double ts = 0.0;
    if (!parse_number(row[ts_col], &ts)) {
      fail(Errc::bad_data, "non-numeric timestamp on data row " + std::to_string(r + 1));
    }
    raw.timestamp_ms = static_cast<int64_t>(ts);
    raw.chosen_item = row[item_col];
    for (size_t c = 0; c < table.header.size(); ++c) {
      if (static_cast<int>(c) == user_col || static_cast<int>(c) == ts_col ||
          static_cast<int>(c) == item_col) {
        continue;
      }
      double v = 0.0;
      if (parse_number(row[c], &v)) {
        raw.continuous_values[table.header[c]] = v;
      } else {
        raw.categorical_values[table.header[c]] = row[c];
      }
    }
    raws.push_back(std::move(raw));
  }
  return raws;
}

void interactions_to_csv(const std::string& path, const std::vector<RawInteraction>& raws) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot write " + path);

  // Column order: required columns, then categorical and continuous field
  // names sorted (std::map iteration order).
  std::set<std::string> cat_names, cont_names;
  for (const auto& raw : raws) {
    for (const auto& [name, _] : raw.categorical_values) cat_names.insert(name);
    for (const auto& [name, _] : raw.continuous_values) cont_names.insert(name);
  }
  std::vector<std::string> header = {"user_id", "timestamp", "chosen_item"};
  header.insert(header.end(), cat_names.begin(), cat_names.end());
  header.insert(header.end(), cont_names.begin(), cont_names.end());
  write_csv_row(out, header);

  for (const auto& raw : raws) {
    std::vector<std::string> row = {raw.user_id, std::to_string(raw.timestamp_ms),
                                    raw.chosen_item};
    for (const auto& name : cat_names) {
      auto it = raw.categorical_values.find(name);
      row.push_back(it == raw.categorical_values.end() ? "" : it->second);
    }
    for (const auto& name : cont_names) {
      auto it = raw.continuous_values.find(name);
      row.push_back(it == raw.continuous_values.end() ? "" : format_number(it->second));
    }
    write_csv_row(out, row);
  }
}

}  // namespace cbrec
