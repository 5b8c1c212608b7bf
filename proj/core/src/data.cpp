#include "msda/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "msda/errors.hpp"
#include "msda/rng.hpp"

namespace msda {

namespace {

constexpr double kBlobRadius = 3.5;
constexpr double kBlobRadiusStep = 0.9;  // distinct radii break rotational symmetry
constexpr double kBlobStd = 1.0;
constexpr double kMoonNoiseStd = 0.15;

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace

void validate_dataset(const DomainDataset& ds) {
  if (ds.features.rows <= 0 || ds.features.cols <= 0) {
    throw ValueError("dataset '" + ds.name + "' is empty");
  }
  if (static_cast<int>(ds.labels.size()) != ds.features.rows) {
    throw ValueError("dataset '" + ds.name + "': one label per sample required");
  }
  if (ds.n_classes <= 0) throw ValueError("dataset '" + ds.name + "': n_classes must be positive");
  for (int y : ds.labels) {
    if (y < 0 || y >= ds.n_classes) {
      throw ValueError("dataset '" + ds.name + "': label out of range");
    }
  }
  for (double x : ds.features.v) {
    if (!std::isfinite(x)) throw ValueError("dataset '" + ds.name + "': non-finite feature");
  }
}

void validate_task(const MsdaTask& task) {
  if (task.sources.empty()) throw ValueError("task needs at least one source domain");
  validate_dataset(task.target);
  for (const auto& s : task.sources) {
    validate_dataset(s);
    if (s.n_features() != task.n_features()) {
      throw ValueError("all domains must share n_features");
    }
    if (s.n_classes != task.n_classes()) {
      throw ValueError("all domains must share n_classes");
    }
  }
}

MsdaTask gen_blobs(int n_domains, int n_classes, int per_class, double shift_scale,
                   double rot_scale, std::uint64_t seed) {
  if (n_domains < 2) throw ValueError("gen_blobs: n_domains must be >= 2");
  if (n_classes < 2) throw ValueError("gen_blobs: n_classes must be >= 2");
  if (per_class < 1) throw ValueError("gen_blobs: per_class must be >= 1");

  // Class centroids at distinct angles and radii; every domain
  // rotates/translates the whole constellation, so class geometry is
  // preserved within a domain while no rotation maps it onto itself.
  std::vector<std::array<double, 2>> centers(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    const double phi = 2.0 * std::numbers::pi * c / n_classes;
    const double r = kBlobRadius + kBlobRadiusStep * c;
    centers[static_cast<std::size_t>(c)] = {r * std::cos(phi), r * std::sin(phi)};
  }

  MsdaTask task;
  for (int dom = 0; dom < n_domains; ++dom) {
    Rng rng(Rng::mix(seed, 0x626c6f62ULL), static_cast<std::uint64_t>(dom) + 1);
    const double angle = rng.uniform(-rot_scale, rot_scale);
    const double ox = rng.uniform(-shift_scale, shift_scale);
    const double oy = rng.uniform(-shift_scale, shift_scale);
    const double ca = std::cos(angle), sa = std::sin(angle);

    DomainDataset ds;
    ds.name = dom == n_domains - 1 ? "target" : "source_" + std::to_string(dom);
    ds.n_classes = n_classes;
    ds.features.rows = n_classes * per_class;
    ds.features.cols = 2;
    ds.features.v.reserve(static_cast<std::size_t>(ds.features.rows) * 2);
    ds.labels.reserve(static_cast<std::size_t>(ds.features.rows));
    for (int c = 0; c < n_classes; ++c) {
      for (int s = 0; s < per_class; ++s) {
        const double zx = centers[static_cast<std::size_t>(c)][0] + kBlobStd * rng.normal();
        const double zy = centers[static_cast<std::size_t>(c)][1] + kBlobStd * rng.normal();
        ds.features.v.push_back(ca * zx - sa * zy + ox);
        ds.features.v.push_back(sa * zx + ca * zy + oy);
        ds.labels.push_back(c);
      }
    }
    if (dom == n_domains - 1) {
      task.target = std::move(ds);
    } else {
      task.sources.push_back(std::move(ds));
    }
  }
  return task;
}

MsdaTask gen_moons(int n_domains, int per_class, double shift_scale, std::uint64_t seed) {
  if (n_domains < 2) throw ValueError("gen_moons: n_domains must be >= 2");
  if (per_class < 1) throw ValueError("gen_moons: per_class must be >= 1");

  MsdaTask task;
  for (int dom = 0; dom < n_domains; ++dom) {
    Rng rng(Rng::mix(seed, 0x6d6f6f6eULL), static_cast<std::uint64_t>(dom) + 1);
    const double ox = rng.uniform(-shift_scale, shift_scale);
    const double oy = rng.uniform(-shift_scale, shift_scale);

    DomainDataset ds;
    ds.name = dom == n_domains - 1 ? "target" : "source_" + std::to_string(dom);
    ds.n_classes = 2;
    ds.features.rows = 2 * per_class;
    ds.features.cols = 2;
    ds.features.v.reserve(static_cast<std::size_t>(ds.features.rows) * 2);
    ds.labels.reserve(static_cast<std::size_t>(ds.features.rows));
    for (int c = 0; c < 2; ++c) {
      for (int s = 0; s < per_class; ++s) {
        const double t = rng.uniform(0.0, std::numbers::pi);
        double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
        double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
        x += kMoonNoiseStd * rng.normal() + ox;
        y += kMoonNoiseStd * rng.normal() + oy;
        ds.features.v.push_back(x);
        ds.features.v.push_back(y);
        ds.labels.push_back(c);
      }
    }
    if (dom == n_domains - 1) {
      task.target = std::move(ds);
    } else {
      task.sources.push_back(std::move(ds));
    }
  }
  return task;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double_field(const std::string& s, int line_no) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": bad float field '" + s + "'");
  }
  return v;
}

int parse_label_field(const std::string& s, int line_no) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": label must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

}  // namespace

DomainDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "': empty file");
  const auto header = split_fields(line);
  const int d = static_cast<int>(header.size()) - 1;
  if (d < 1 || header.back() != "label") {
    throw SchemaError("'" + path + "': header must be f0,...,f{d-1},label");
  }
  for (int j = 0; j < d; ++j) {
    if (header[static_cast<std::size_t>(j)] != "f" + std::to_string(j)) {
      throw SchemaError("'" + path + "': header must be f0,...,f{d-1},label");
    }
  }

  DomainDataset ds;
  ds.features.cols = d;
  int line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (static_cast<int>(fields.size()) != d + 1) {
      throw SchemaError("'" + path + "' line " + std::to_string(line_no) +
                        ": expected " + std::to_string(d + 1) + " columns, got " +
                        std::to_string(fields.size()));
    }
    for (int j = 0; j < d; ++j) {
      ds.features.v.push_back(parse_double_field(fields[static_cast<std::size_t>(j)], line_no));
    }
    const int y = parse_label_field(fields.back(), line_no);
    ds.labels.push_back(y);
    max_label = std::max(max_label, y);
    ++ds.features.rows;
  }
  if (ds.features.rows == 0) throw DataError("'" + path + "': no data rows");
  ds.n_classes = max_label + 1;

  // Dataset name from the file stem.
  auto slash = path.find_last_of("/\\");
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  if (auto dot = stem.find_last_of('.'); dot != std::string::npos) stem = stem.substr(0, dot);
  ds.name = stem;
  validate_dataset(ds);
  return ds;
}

void save_csv(const DomainDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (int j = 0; j < ds.n_features(); ++j) {
    out << 'f' << j << ',';
  }
  out << "label\n";
  for (int i = 0; i < ds.n_samples(); ++i) {
    for (int j = 0; j < ds.n_features(); ++j) {
      out << format_double(ds.features.at(i, j)) << ',';
    }
    out << ds.labels[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

MsdaTask standardize(const MsdaTask& task) {
  validate_task(task);
  const int d = task.n_features();
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  std::vector<double> sq(static_cast<std::size_t>(d), 0.0);
  std::int64_t n = 0;
  for (const auto& s : task.sources) {
    for (int i = 0; i < s.n_samples(); ++i) {
      for (int j = 0; j < d; ++j) {
        mean[static_cast<std::size_t>(j)] += s.features.at(i, j);
      }
    }
    n += s.n_samples();
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (const auto& s : task.sources) {
    for (int i = 0; i < s.n_samples(); ++i) {
      for (int j = 0; j < d; ++j) {
        const double c = s.features.at(i, j) - mean[static_cast<std::size_t>(j)];
        sq[static_cast<std::size_t>(j)] += c * c;
      }
    }
  }
  std::vector<double> stddev(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    stddev[static_cast<std::size_t>(j)] = std::sqrt(sq[static_cast<std::size_t>(j)] /
                                                    static_cast<double>(n));
  }

  auto apply = [&](DomainDataset ds) {
    for (int i = 0; i < ds.n_samples(); ++i) {
      for (int j = 0; j < d; ++j) {
        if (stddev[static_cast<std::size_t>(j)] <= 1e-12) continue;  // degenerate dim
        ds.features.at(i, j) =
            (ds.features.at(i, j) - mean[static_cast<std::size_t>(j)]) /
            stddev[static_cast<std::size_t>(j)];
      }
    }
    return ds;
  };

  MsdaTask out;
  out.target_labels_visible_for_eval_only = task.target_labels_visible_for_eval_only;
  for (const auto& s : task.sources) out.sources.push_back(apply(s));
  out.target = apply(task.target);
  return out;
}

std::pair<DomainDataset, DomainDataset> split(const DomainDataset& ds,
                                              const SplitSpec& spec) {
  validate_dataset(ds);
  if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
    throw ValueError("split: train_fraction must be in (0, 1)");
  }
  const int n = ds.n_samples();
  const int target_train = static_cast<int>(std::lround(spec.train_fraction * n));

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.n_classes));
  for (int i = 0; i < n; ++i) {
    by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
  }

  // Largest-remainder apportionment of the train quota across classes.
  std::vector<int> take(by_class.size(), 0);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double quota = spec.train_fraction * static_cast<double>(by_class[c].size());
    take[c] = static_cast<int>(std::floor(quota));
    assigned += take[c];
    remainders.push_back({quota - std::floor(quota), static_cast<int>(c)});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (auto& [frac, c] : remainders) {
    if (assigned >= target_train) break;
    if (take[static_cast<std::size_t>(c)] <
        static_cast<int>(by_class[static_cast<std::size_t>(c)].size())) {
      ++take[static_cast<std::size_t>(c)];
      ++assigned;
    }
  }

  std::vector<int> train_idx, test_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    Rng rng(Rng::mix(spec.seed, 0x73706c69ULL + c));
    const auto perm = rng.permutation(static_cast<int>(members.size()));
    for (std::size_t t = 0; t < members.size(); ++t) {
      const int idx = members[static_cast<std::size_t>(perm[t])];
      if (static_cast<int>(t) < take[c]) {
        train_idx.push_back(idx);
      } else {
        test_idx.push_back(idx);
      }
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto subset = [&](const std::vector<int>& idx, const std::string& suffix) {
    DomainDataset out;
    out.name = ds.name + suffix;
    out.n_classes = ds.n_classes;
    out.features.rows = static_cast<int>(idx.size());
    out.features.cols = ds.n_features();
    for (int i : idx) {
      for (int j = 0; j < ds.n_features(); ++j) out.features.v.push_back(ds.features.at(i, j));
      out.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    }
    return out;
  };
  return {subset(train_idx, "_train"), subset(test_idx, "_test")};
}

Tensor features_tensor(const DomainDataset& ds) {
  return Tensor::matrix(ds.n_samples(), ds.n_features(), ds.features.v);
}

Tensor rows_tensor(const DomainDataset& ds, const std::vector<int>& idx) {
  std::vector<double> v;
  v.reserve(idx.size() * static_cast<std::size_t>(ds.n_features()));
  for (int i : idx) {
    for (int j = 0; j < ds.n_features(); ++j) v.push_back(ds.features.at(i, j));
  }
  return Tensor::matrix(static_cast<int>(idx.size()), ds.n_features(), std::move(v));
}

std::vector<int> labels_at(const DomainDataset& ds, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(ds.labels[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace msda
