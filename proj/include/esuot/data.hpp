#pragma once

// Synthetic benchmarks, label-shift resampling and CSV I/O.
//
// CSV schema: header f0,...,f{d-1},label,domain; one sample per row. The label
// cell may be empty (unlabeled). Numbers are written with 17 significant digits.

#include "esuot/common.hpp"
#include "esuot/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace esuot::data {

enum class Family { TwoMoonsRotation, GaussianShift, GaussianRingShift, PortraitsLikeDrift };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::TwoMoonsRotation: return "two_moons_rotation";
    case Family::GaussianShift: return "gaussian_shift";
    case Family::GaussianRingShift: return "gaussian_ring_shift";
    case Family::PortraitsLikeDrift: return "portraits_like_drift";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  if (s == "two_moons_rotation") return Family::TwoMoonsRotation;
  if (s == "gaussian_shift") return Family::GaussianShift;
  if (s == "gaussian_ring_shift") return Family::GaussianRingShift;
  if (s == "portraits_like_drift") return Family::PortraitsLikeDrift;
  throw ConfigError("unknown family '" + std::string(s) + "'");
}

inline bool family_uses_angle(Family f) {
  return f == Family::TwoMoonsRotation || f == Family::PortraitsLikeDrift;
}

/// Generator settings. `noise` is family specific:
///  - two_moons_rotation: std of the Gaussian jitter around each moon
///  - gaussian_shift: per-coordinate std of the Gaussian (the shift is in absolute units)
///  - gaussian_ring_shift: std of each of the 8 ring modes
///  - portraits_like_drift: per-coordinate std of each class blob (8 dims)
struct SyntheticSpec {
  Family family = Family::TwoMoonsRotation;
  int n = 2000;
  double angle_deg = 0.0;
  std::vector<double> shift{0.0, 0.0};
  double noise = 0.08;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 2) throw ConfigError("n must be >= 2");
    if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
    if (shift.size() != 2) throw ConfigError("shift must have two components");
    if (!std::isfinite(angle_deg)) throw ConfigError("angle must be finite");
  }
};

/// Counter-clockwise rotation of 2-D points (or the first two coordinates).
inline Matrix rotate(const Matrix& points, double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  Matrix out = points;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double x = points(i, 0);
    const double y = points(i, 1);
    out(i, 0) = c * x - s * y;
    out(i, 1) = s * x + c * y;
  }
  return out;
}

namespace detail {

inline Dataset two_moons(int n, double noise, Rng& rng) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, 1.0);
  Dataset d;
  d.features.resize(n, 2);
  d.labels = std::vector<int>(static_cast<std::size_t>(n));
  const int n0 = n / 2;
  for (int i = 0; i < n; ++i) {
    const double th = angle(rng);
    const int y = i < n0 ? 0 : 1;
    double px = y == 0 ? std::cos(th) : 1.0 - std::cos(th);
    double py = y == 0 ? std::sin(th) : 0.5 - std::sin(th);
    // centre the pair of moons on the origin
    px += noise * jitter(rng) - 0.5;
    py += noise * jitter(rng) - 0.25;
    d.features(i, 0) = px;
    d.features(i, 1) = py;
    (*d.labels)[static_cast<std::size_t>(i)] = y;
  }
  return d;
}

inline Dataset gaussian(int n, double sd, const std::vector<double>& mean, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset d;
  d.features.resize(n, 2);
  d.labels = std::vector<int>(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = nd(rng);
    const double v = nd(rng);
    d.features(i, 0) = mean[0] + sd * u;
    d.features(i, 1) = mean[1] + sd * v;
    (*d.labels)[static_cast<std::size_t>(i)] = v > 0.0 ? 1 : 0;
  }
  return d;
}

constexpr int kRingModes = 8;
constexpr double kRingRadius = 2.0;

inline Dataset ring(int n, double sd, const std::vector<double>& centre, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset d;
  d.features.resize(n, 2);
  d.labels = std::vector<int>(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int mode = i % kRingModes;
    const double a = 2.0 * std::numbers::pi * mode / kRingModes;
    d.features(i, 0) = centre[0] + kRingRadius * std::cos(a) + sd * nd(rng);
    d.features(i, 1) = centre[1] + kRingRadius * std::sin(a) + sd * nd(rng);
    (*d.labels)[static_cast<std::size_t>(i)] = mode % 2;
  }
  return d;
}

constexpr int kPortraitsDim = 8;

inline Dataset portraits_like(int n, double sd, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset d;
  d.features.resize(n, kPortraitsDim);
  d.labels = std::vector<int>(static_cast<std::size_t>(n));
  // class prior p(y=1) = 0.63, echoing the real source domain
  const int n1 = static_cast<int>(std::lround(0.63 * n));
  for (int i = 0; i < n; ++i) {
    const int y = i < n1 ? 1 : 0;
    const double sign = y == 1 ? 1.0 : -1.0;
    for (int k = 0; k < kPortraitsDim; ++k) {
      const double mean = k == 0 ? 1.5 * sign : (k == 1 ? 0.5 * sign : 0.0);
      d.features(i, k) = mean + sd * nd(rng);
    }
    (*d.labels)[static_cast<std::size_t>(i)] = y;
  }
  return d;
}

}  // namespace detail

/// Source and target draws of a synthetic family; both labeled (callers hold
/// target labels out of training).
inline std::pair<Dataset, Dataset> generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng src_rng(mix_seed(spec.seed, 1));
  Rng tgt_rng(mix_seed(spec.seed, 2));
  Dataset source;
  Dataset target;
  switch (spec.family) {
    case Family::TwoMoonsRotation:
      source = detail::two_moons(spec.n, spec.noise, src_rng);
      target = detail::two_moons(spec.n, spec.noise, tgt_rng);
      target.features = rotate(target.features, spec.angle_deg);
      break;
    case Family::GaussianShift:
      source = detail::gaussian(spec.n, spec.noise, {0.0, 0.0}, src_rng);
      target = detail::gaussian(spec.n, spec.noise, spec.shift, tgt_rng);
      break;
    case Family::GaussianRingShift:
      source = detail::ring(spec.n, spec.noise, {0.0, 0.0}, src_rng);
      target = detail::ring(spec.n, spec.noise, spec.shift, tgt_rng);
      break;
    case Family::PortraitsLikeDrift: {
      source = detail::portraits_like(spec.n, spec.noise, src_rng);
      target = detail::portraits_like(spec.n, spec.noise, tgt_rng);
      target.features = rotate(target.features, spec.angle_deg);
      target.features.col(0).array() += spec.shift[0];
      target.features.col(1).array() += spec.shift[1];
      break;
    }
  }
  source.domain_index = 0;
  target.domain_index = 1;
  source.class_count = target.class_count = 2;
  return {std::move(source), std::move(target)};
}

// ---- label shift ----

struct LabelShiftSpec {
  double positive_prior = 0.5;  // p(y = 1)
  int n = 2000;
  std::uint64_t seed = 0;
};

/// With-replacement resample with exactly round(prior * n) positives.
inline Dataset resample_label_shift(const Dataset& data, const LabelShiftSpec& spec) {
  const auto& labels = data.require_labels("resample_label_shift");
  if (!(spec.positive_prior >= 0.0 && spec.positive_prior <= 1.0))
    throw ConfigError("positive_prior must lie in [0, 1]");
  if (spec.n < 1) throw ConfigError("resample size must be >= 1");
  std::vector<Eigen::Index> pos;
  std::vector<Eigen::Index> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) pos.push_back(static_cast<Eigen::Index>(i));
    else if (labels[i] == 0) neg.push_back(static_cast<Eigen::Index>(i));
    else throw ContractError("resample_label_shift: labels must be binary");
  }
  const int n_pos = static_cast<int>(std::lround(spec.positive_prior * spec.n));
  const int n_neg = spec.n - n_pos;
  if (n_pos > 0 && pos.empty()) throw ContractError("resample_label_shift: no positive samples to draw from");
  if (n_neg > 0 && neg.empty()) throw ContractError("resample_label_shift: no negative samples to draw from");

  Rng rng(spec.seed);
  std::vector<Eigen::Index> idx;
  std::vector<int> out_labels;
  for (auto i : sample_indices(rng, static_cast<Eigen::Index>(pos.size()), n_pos)) {
    idx.push_back(pos[static_cast<std::size_t>(i)]);
    out_labels.push_back(1);
  }
  for (auto i : sample_indices(rng, static_cast<Eigen::Index>(neg.size()), n_neg)) {
    idx.push_back(neg[static_cast<std::size_t>(i)]);
    out_labels.push_back(0);
  }
  Dataset out = data;
  out.features = gather_rows(data.features, idx);
  out.labels = std::move(out_labels);
  return out;
}

// ---- CSV ----

/// Generic CSV table: header plus string cells. LF and CRLF accepted.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

inline Table read_table(std::istream& in) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      t.header = split_csv_line(line);
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw ParseError("line 1: missing header");
  return t;
}

inline Table read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_table(in);
}

inline void write_table(std::ostream& out, const Table& t) {
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(t.header);
  for (const auto& r : t.rows) emit(r);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || s.empty())
    throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + std::string(s) + "'");
  return v;
}

inline long parse_int(std::string_view s, std::size_t line_no) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError("line " + std::to_string(line_no) + ": not an integer: '" + std::string(s) + "'");
  return v;
}

inline Dataset dataset_from_table(const Table& t) {
  const auto& h = t.header;
  if (h.size() < 3 || h[h.size() - 2] != "label" || h.back() != "domain")
    throw ParseError("line 1: header must be f0,...,f{d-1},label,domain");
  const std::size_t d = h.size() - 2;
  for (std::size_t k = 0; k < d; ++k)
    if (h[k] != "f" + std::to_string(k)) throw ParseError("line 1: expected column f" + std::to_string(k));
  if (t.rows.empty()) throw DataError("no data rows");

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(d));
  std::vector<int> labels;
  bool any_label = false;
  bool any_empty = false;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t line_no = r + 2;
    const auto& row = t.rows[r];
    for (std::size_t k = 0; k < d; ++k)
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = parse_double(row[k], line_no);
    if (row[d].empty()) {
      any_empty = true;
      labels.push_back(0);
    } else {
      const long y = parse_int(row[d], line_no);
      if (y < 0) throw ParseError("line " + std::to_string(line_no) + ": negative label");
      any_label = true;
      labels.push_back(static_cast<int>(y));
    }
    const long dom = parse_int(row[d + 1], line_no);
    if (r == 0) ds.domain_index = static_cast<int>(dom);
  }
  if (any_label && any_empty) throw ParseError("label column is partially empty");
  if (!ds.features.allFinite()) throw ParseError("non-finite feature value");
  if (any_label) {
    ds.class_count = infer_class_count(labels);
    ds.labels = std::move(labels);
  }
  return ds;
}

inline Dataset load_csv(const std::string& path) { return dataset_from_table(read_table(path)); }

inline Table dataset_to_table(const Dataset& ds) {
  Table t;
  for (Eigen::Index k = 0; k < ds.dim(); ++k) t.header.push_back("f" + std::to_string(k));
  t.header.push_back("label");
  t.header.push_back("domain");
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index k = 0; k < ds.dim(); ++k) row.push_back(format_double(ds.features(i, k)));
    row.push_back(ds.labels ? std::to_string((*ds.labels)[static_cast<std::size_t>(i)]) : std::string());
    row.push_back(std::to_string(ds.domain_index));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_table(out, dataset_to_table(ds));
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace esuot::data
