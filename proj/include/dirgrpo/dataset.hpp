#ifndef DIRGRPO_DATASET_HPP_
#define DIRGRPO_DATASET_HPP_

// Synthetic long-tailed regression datasets and the shot partition.
//
// Targets live on the lattice {b * width : b = 0..B-1} with width = R/(B-1),
// so bin b is exactly the set of samples whose target is b * width. The
// training split follows a density profile over bins; the test split holds
// the same number of samples in every bin.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dirgrpo/io.hpp"
#include "dirgrpo/rng.hpp"

namespace dirgrpo {

struct Sample {
  std::int64_t id = 0;
  std::vector<double> features;
  double target = 0.0;
  int bin = 0;
};

struct ExpDecay {
  double tau = 25.0;
};

/// Single skewed bump peaking at 30% of the range with a heavier right tail,
/// every bin floored at one sample.
struct AgedbLike {};

struct Peak {
  double center = 0.0;  // in bin units
  double width = 1.0;   // standard deviation in bin units
  double height = 1.0;  // relative height
};

struct MultiPeak {
  std::vector<Peak> peaks;
};

using DensityProfile = std::variant<ExpDecay, AgedbLike, MultiPeak>;

struct DatasetSpec {
  std::uint64_t seed = 0;
  double range = 100.0;
  int bins = 101;
  DensityProfile profile = ExpDecay{};
  int n_max = 353;
  double sigma = 0.05;
  int distractor_dims = 0;
  int test_per_bin = 5;

  double bin_width() const { return range / static_cast<double>(bins - 1); }
  int feature_dim() const { return 1 + distractor_dims; }
};

inline void validate(const DatasetSpec& spec) {
  if (spec.bins <= 1) throw std::invalid_argument("dataset: bins must be > 1");
  if (spec.test_per_bin <= 0) throw std::invalid_argument("dataset: test_per_bin must be > 0");
  if (!(spec.range > 0.0)) throw std::invalid_argument("dataset: range must be > 0");
  if (spec.n_max < 1) throw std::invalid_argument("dataset: n_max must be >= 1");
  if (!(spec.sigma >= 0.0)) throw std::invalid_argument("dataset: sigma must be >= 0");
  if (spec.distractor_dims < 0) throw std::invalid_argument("dataset: distractor_dims must be >= 0");
  if (const auto* e = std::get_if<ExpDecay>(&spec.profile); e && !(e->tau > 0.0)) {
    throw std::invalid_argument("dataset: tau must be > 0");
  }
  if (const auto* mp = std::get_if<MultiPeak>(&spec.profile)) {
    if (mp->peaks.empty()) throw std::invalid_argument("dataset: multipeak needs at least one peak");
    for (const auto& p : mp->peaks) {
      if (!(p.width > 0.0) || !(p.height > 0.0)) {
        throw std::invalid_argument("dataset: peak width and height must be > 0");
      }
    }
  }
}

/// Bin index of a target value; tolerant to the last-ulp error of b*width/width.
inline int bin_of(double target, double width, int bins) {
  const auto b = static_cast<int>(std::floor(target / width + 1e-9));
  return std::clamp(b, 0, bins - 1);
}

/// Unrounded profile value per bin (all strictly positive).
inline std::vector<double> profile_density(const DatasetSpec& spec) {
  std::vector<double> d(static_cast<std::size_t>(spec.bins));
  const double n_max = spec.n_max;
  const double span = spec.bins - 1;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ExpDecay>) {
          for (int b = 0; b < spec.bins; ++b) d[b] = n_max * std::exp(-b / p.tau);
        } else if constexpr (std::is_same_v<P, AgedbLike>) {
          const double peak = std::round(0.3 * span);
          const double left = 0.1 * span;
          const double right = 0.2 * span;
          for (int b = 0; b < spec.bins; ++b) {
            const double z = (b - peak) / (b < peak ? left : right);
            d[b] = n_max * std::exp(-0.5 * z * z);
          }
        } else {
          double top = 0.0;
          for (int b = 0; b < spec.bins; ++b) {
            double s = 0.0;
            for (const auto& pk : p.peaks) {
              const double z = (b - pk.center) / pk.width;
              s += pk.height * std::exp(-0.5 * z * z);
            }
            d[b] = s;
            top = std::max(top, s);
          }
          for (auto& v : d) v = v / top * n_max;
        }
      },
      spec.profile);
  return d;
}

/// Training count per bin: rounded profile, clamped at the profile floor
/// (1 for AgedbLike, 0 otherwise).
inline std::vector<int> profile_counts(const DatasetSpec& spec) {
  validate(spec);
  const int floor_count = std::holds_alternative<AgedbLike>(spec.profile) ? 1 : 0;
  const auto d = profile_density(spec);
  std::vector<int> counts(d.size());
  for (std::size_t b = 0; b < d.size(); ++b) {
    counts[b] = std::max(floor_count, static_cast<int>(std::lround(d[b])));
  }
  return counts;
}

/// Features for one sample: [target/R + sigma*g0, g1, ..., gD], g drawn from
/// the stream keyed by (seed, sample id) at coordinate index.
inline std::vector<double> make_features(const DatasetSpec& spec, std::int64_t id, double target) {
  const auto key = stream_key({spec.seed, static_cast<std::uint64_t>(id)});
  std::vector<double> f(static_cast<std::size_t>(spec.feature_dim()));
  f[0] = target / spec.range;
  if (spec.sigma > 0.0) f[0] += spec.sigma * draw_normal(key, 0);
  for (int c = 1; c < spec.feature_dim(); ++c) f[c] = draw_normal(key, static_cast<std::uint64_t>(c));
  return f;
}

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

inline Dataset generate_dataset(const DatasetSpec& spec) {
  validate(spec);
  const auto counts = profile_counts(spec);
  if (std::all_of(counts.begin(), counts.end(), [](int c) { return c == 0; })) {
    throw std::invalid_argument("dataset: profile yields no training samples");
  }
  const double width = spec.bin_width();
  Dataset ds;
  std::int64_t id = 0;
  auto emit = [&](std::vector<Sample>& out, int b) {
    Sample s;
    s.id = id;
    s.bin = b;
    s.target = b * width;
    s.features = make_features(spec, id, s.target);
    out.push_back(std::move(s));
    ++id;
  };
  for (int b = 0; b < spec.bins; ++b) {
    for (int n = 0; n < counts[b]; ++n) emit(ds.train, b);
  }
  // All three profiles are strictly positive on every bin, so the balanced
  // test covers the full target range, including bins absent from train.
  for (int b = 0; b < spec.bins; ++b) {
    for (int n = 0; n < spec.test_per_bin; ++n) emit(ds.test, b);
  }
  return ds;
}

enum class Region { Many, Medium, Few };

inline const char* region_name(Region r) {
  switch (r) {
    case Region::Many: return "many";
    case Region::Medium: return "medium";
    case Region::Few: return "few";
  }
  return "?";
}

inline Region parse_region(std::string_view s) {
  if (s == "many") return Region::Many;
  if (s == "medium") return Region::Medium;
  if (s == "few") return Region::Few;
  throw IoError("unknown region '" + std::string(s) + "'");
}

/// Many: > 100, Medium: [20, 100], Few: < 20 training samples.
inline Region region_for_count(int count) {
  if (count > 100) return Region::Many;
  if (count >= 20) return Region::Medium;
  return Region::Few;
}

struct ShotPartition {
  std::vector<int> bin_counts;
  std::vector<Region> region;

  int bins() const { return static_cast<int>(bin_counts.size()); }
  Region region_of(int bin) const { return region.at(static_cast<std::size_t>(bin)); }
  int count_of(int bin) const { return bin_counts.at(static_cast<std::size_t>(bin)); }
  int max_count() const { return *std::max_element(bin_counts.begin(), bin_counts.end()); }
};

inline ShotPartition compute_shot_partition(const std::vector<Sample>& train, int num_bins) {
  if (train.empty()) throw std::invalid_argument("shot partition: empty training set");
  ShotPartition p;
  p.bin_counts.assign(static_cast<std::size_t>(num_bins), 0);
  for (const auto& s : train) {
    if (s.bin < 0 || s.bin >= num_bins) throw std::invalid_argument("shot partition: bin out of range");
    ++p.bin_counts[static_cast<std::size_t>(s.bin)];
  }
  p.region.reserve(p.bin_counts.size());
  for (int c : p.bin_counts) p.region.push_back(region_for_count(c));
  return p;
}

inline ShotPartition compute_shot_partition(const std::vector<Sample>& train) {
  int max_bin = 0;
  for (const auto& s : train) max_bin = std::max(max_bin, s.bin);
  return compute_shot_partition(train, max_bin + 1);
}

// ---------------------------------------------------------------------------
// CSV serialization

inline std::string samples_to_csv(const std::vector<Sample>& samples) {
  const std::size_t dim = samples.empty() ? 0 : samples.front().features.size();
  std::string out = "id,target,bin";
  for (std::size_t c = 0; c < dim; ++c) out += ",f" + std::to_string(c);
  out += '\n';
  for (const auto& s : samples) {
    out += std::to_string(s.id);
    out += ',' + io::format_double(s.target);
    out += ',' + std::to_string(s.bin);
    for (double f : s.features) out += ',' + io::format_double(f);
    out += '\n';
  }
  return out;
}

inline std::vector<Sample> samples_from_csv(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  if (lines.empty()) throw IoError(path.string() + ": empty dataset file");
  const auto header = io::split(lines.front(), ',');
  if (header.size() < 3 || header[0] != "id" || header[1] != "target" || header[2] != "bin") {
    throw IoError(path.string() + ": bad dataset header");
  }
  const std::size_t dim = header.size() - 3;
  std::vector<Sample> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto cells = io::split(lines[li], ',');
    if (cells.size() != header.size()) throw IoError(path.string() + ": ragged row " + std::to_string(li));
    Sample s;
    s.id = io::parse_int(cells[0]);
    s.target = io::parse_double(cells[1]);
    s.bin = static_cast<int>(io::parse_int(cells[2]));
    s.features.reserve(dim);
    for (std::size_t c = 0; c < dim; ++c) s.features.push_back(io::parse_double(cells[3 + c]));
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string partition_to_csv(const ShotPartition& p) {
  std::string out = "bin,count,region\n";
  for (int b = 0; b < p.bins(); ++b) {
    out += std::to_string(b) + ',' + std::to_string(p.count_of(b)) + ',' + region_name(p.region_of(b)) + '\n';
  }
  return out;
}

inline ShotPartition partition_from_csv(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  if (lines.empty() || lines.front() != "bin,count,region") throw IoError(path.string() + ": bad partition header");
  ShotPartition p;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto cells = io::split(lines[li], ',');
    if (cells.size() != 3) throw IoError(path.string() + ": bad partition row");
    if (io::parse_int(cells[0]) != static_cast<long long>(p.bin_counts.size())) {
      throw IoError(path.string() + ": partition bins must be consecutive from 0");
    }
    p.bin_counts.push_back(static_cast<int>(io::parse_int(cells[1])));
    p.region.push_back(parse_region(cells[2]));
  }
  return p;
}

}  // namespace dirgrpo

#endif  // DIRGRPO_DATASET_HPP_
