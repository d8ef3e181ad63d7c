#ifndef DIRGRPO_EVAL_HPP_
#define DIRGRPO_EVAL_HPP_

// Shot-aware evaluation on the balanced test split.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dirgrpo/dataset.hpp"
#include "dirgrpo/io.hpp"

namespace dirgrpo {

struct Prediction {
  std::int64_t sample_id = 0;
  std::optional<double> value;  // absent: invalid output
};

/// Metric slots: All, Many, Medium, Few.
inline constexpr std::array<const char*, 4> kReportRegions = {"all", "many", "medium", "few"};

inline std::size_t region_slot(Region r) { return 1 + static_cast<std::size_t>(r); }

struct RegionMetrics {
  long n = 0;
  std::optional<double> mae;
  std::optional<double> gm;
  std::optional<double> mse;
};

struct SampleError {
  std::int64_t sample_id = 0;
  int bin = 0;
  Region region = Region::Few;
  double abs_error = 0.0;
};

struct BinMetrics {
  int bin = 0;
  long n = 0;
  double mae = 0.0;
};

struct EvalReport {
  std::array<RegionMetrics, 4> regions;
  double pred_std_ratio = 0.0;
  long invalid = 0;
  double invalid_frac = 0.0;
  double eps_gm = 1e-2;
  std::vector<BinMetrics> per_bin;    // bins with at least one test sample
  std::vector<SampleError> errors;    // test order
  std::vector<double> sorted_errors;  // ascending |e|

  const RegionMetrics& all() const { return regions[0]; }
  const RegionMetrics& region(Region r) const { return regions[region_slot(r)]; }
};

namespace detail {

inline RegionMetrics summarize(std::span<const double> abs_errors, double eps_gm) {
  RegionMetrics m;
  m.n = static_cast<long>(abs_errors.size());
  if (abs_errors.empty()) return m;
  double sa = 0.0, ss = 0.0, sl = 0.0;
  for (double e : abs_errors) {
    sa += e;
    ss += e * e;
    sl += std::log(e + eps_gm);
  }
  const auto n = static_cast<double>(abs_errors.size());
  m.mae = sa / n;
  m.mse = ss / n;
  m.gm = std::exp(sl / n);
  return m;
}

inline double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

// Predictions keyed by sample id, rejecting duplicates and ids absent from
// the test set.
inline std::unordered_map<std::int64_t, std::optional<double>> index_predictions(
    std::span<const Prediction> predictions, std::span<const Sample> test) {
  std::unordered_map<std::int64_t, std::optional<double>> by_id;
  by_id.reserve(predictions.size());
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.sample_id, p.value).second) {
      throw std::invalid_argument("evaluate: duplicate prediction for sample " + std::to_string(p.sample_id));
    }
  }
  for (const auto& s : test) {
    if (!by_id.count(s.id)) throw std::invalid_argument("evaluate: missing prediction for sample " + std::to_string(s.id));
  }
  if (by_id.size() != test.size()) throw std::invalid_argument("evaluate: prediction for unknown sample id");
  return by_id;
}

}  // namespace detail

/// std(predictions) / std(targets) over the valid predictions.
inline double collapse_diagnostic(std::span<const Prediction> predictions, std::span<const Sample> test) {
  const auto by_id = detail::index_predictions(predictions, test);
  std::vector<double> pred, tgt;
  for (const auto& s : test) {
    const auto& v = by_id.at(s.id);
    if (!v) continue;
    pred.push_back(*v);
    tgt.push_back(s.target);
  }
  const double st = detail::population_std(tgt);
  if (!(st > 0.0)) throw std::invalid_argument("collapse_diagnostic: targets have zero spread");
  return detail::population_std(pred) / st;
}

/// Invalid predictions are scored with error `invalid_error` (the value
/// range R) and counted separately.
inline EvalReport evaluate(std::span<const Prediction> predictions, std::span<const Sample> test,
                           const ShotPartition& partition, double eps_gm, double invalid_error) {
  if (!(eps_gm > 0.0)) throw std::invalid_argument("evaluate: eps_gm must be > 0");
  const auto by_id = detail::index_predictions(predictions, test);
  EvalReport rep;
  rep.eps_gm = eps_gm;
  std::array<std::vector<double>, 4> region_errors;
  std::map<int, std::pair<long, double>> bins;
  for (const auto& s : test) {
    const auto& v = by_id.at(s.id);
    double e = invalid_error;
    if (v) {
      e = std::abs(*v - s.target);
    } else {
      ++rep.invalid;
    }
    // bins beyond the partition never appeared in training
    const Region r = s.bin < partition.bins() ? partition.region_of(s.bin) : Region::Few;
    rep.errors.push_back({s.id, s.bin, r, e});
    region_errors[0].push_back(e);
    region_errors[region_slot(r)].push_back(e);
    auto& b = bins[s.bin];
    ++b.first;
    b.second += e;
  }
  for (std::size_t r = 0; r < 4; ++r) rep.regions[r] = detail::summarize(region_errors[r], eps_gm);
  for (const auto& [bin, acc] : bins) rep.per_bin.push_back({bin, acc.first, acc.second / static_cast<double>(acc.first)});
  rep.sorted_errors = region_errors[0];
  std::sort(rep.sorted_errors.begin(), rep.sorted_errors.end());
  rep.invalid_frac = test.empty() ? 0.0 : static_cast<double>(rep.invalid) / static_cast<double>(test.size());
  // undefined (no valid predictions, or flat valid targets) is reported as 0
  try {
    rep.pred_std_ratio = rep.invalid == static_cast<long>(test.size()) ? 0.0 : collapse_diagnostic(predictions, test);
  } catch (const std::invalid_argument&) {
    rep.pred_std_ratio = 0.0;
  }
  return rep;
}

struct SortedErrorRow {
  long rank = 0;  // 1-based
  double abs_error = 0.0;
  Region region = Region::Few;
};

inline std::vector<SortedErrorRow> sorted_error_curve(const EvalReport& report) {
  std::vector<SampleError> errs = report.errors;
  std::stable_sort(errs.begin(), errs.end(),
                   [](const SampleError& a, const SampleError& b) { return a.abs_error < b.abs_error; });
  std::vector<SortedErrorRow> rows;
  rows.reserve(errs.size());
  for (std::size_t i = 0; i < errs.size(); ++i) rows.push_back({static_cast<long>(i + 1), errs[i].abs_error, errs[i].region});
  return rows;
}

inline std::string sorted_error_curve_to_csv(const std::vector<SortedErrorRow>& rows) {
  std::string out = "rank,abs_error,region\n";
  for (const auto& r : rows) {
    out += std::to_string(r.rank) + ',' + io::format_double(r.abs_error) + ',' + region_name(r.region) + '\n';
  }
  return out;
}

struct GainRow {
  int bin = 0;
  int train_count = 0;
  double mae_a = 0.0;
  double mae_b = 0.0;
  double gain = 0.0;  // mae_b - mae_a: positive when method a is better
};

inline std::vector<GainRow> gain_table(const EvalReport& a, const EvalReport& b, const ShotPartition& partition) {
  std::map<int, double> mae_b;
  for (const auto& pb : b.per_bin) {
    if (pb.n > 0) mae_b[pb.bin] = pb.mae;
  }
  std::vector<GainRow> rows;
  for (const auto& pa : a.per_bin) {
    const auto it = mae_b.find(pa.bin);
    if (pa.n == 0 || it == mae_b.end()) continue;
    const int count = pa.bin < partition.bins() ? partition.count_of(pa.bin) : 0;
    rows.push_back({pa.bin, count, pa.mae, it->second, it->second - pa.mae});
  }
  return rows;
}

inline std::string gain_table_to_csv(const std::vector<GainRow>& rows) {
  std::string out = "bin,train_count,mae_a,mae_b,gain\n";
  for (const auto& r : rows) {
    out += std::to_string(r.bin) + ',' + std::to_string(r.train_count) + ',' + io::format_double(r.mae_a) + ',' +
           io::format_double(r.mae_b) + ',' + io::format_double(r.gain) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& m = r.regions[s];
    nlohmann::json jm;
    jm["n"] = m.n;
    jm["mae"] = m.mae ? nlohmann::json(*m.mae) : nlohmann::json(nullptr);
    jm["gm"] = m.gm ? nlohmann::json(*m.gm) : nlohmann::json(nullptr);
    jm["mse"] = m.mse ? nlohmann::json(*m.mse) : nlohmann::json(nullptr);
    j["regions"][kReportRegions[s]] = jm;
  }
  j["pred_std_ratio"] = r.pred_std_ratio;
  j["invalid"] = r.invalid;
  j["invalid_frac"] = r.invalid_frac;
  j["eps_gm"] = r.eps_gm;
  auto& bins = j["per_bin"] = nlohmann::json::array();
  for (const auto& b : r.per_bin) bins.push_back({{"bin", b.bin}, {"n", b.n}, {"mae", b.mae}});
  auto& errs = j["errors"] = nlohmann::json::array();
  for (const auto& e : r.errors) {
    errs.push_back({{"id", e.sample_id}, {"bin", e.bin}, {"region", region_name(e.region)}, {"abs_error", e.abs_error}});
  }
  j["sorted_errors"] = r.sorted_errors;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    for (std::size_t s = 0; s < 4; ++s) {
      const auto& jm = j.at("regions").at(kReportRegions[s]);
      auto& m = r.regions[s];
      m.n = jm.at("n").get<long>();
      if (!jm.at("mae").is_null()) m.mae = jm.at("mae").get<double>();
      if (!jm.at("gm").is_null()) m.gm = jm.at("gm").get<double>();
      if (!jm.at("mse").is_null()) m.mse = jm.at("mse").get<double>();
    }
    r.pred_std_ratio = j.at("pred_std_ratio").get<double>();
    r.invalid = j.at("invalid").get<long>();
    r.invalid_frac = j.at("invalid_frac").get<double>();
    r.eps_gm = j.at("eps_gm").get<double>();
    for (const auto& b : j.at("per_bin")) {
      r.per_bin.push_back({b.at("bin").get<int>(), b.at("n").get<long>(), b.at("mae").get<double>()});
    }
    for (const auto& e : j.at("errors")) {
      r.errors.push_back({e.at("id").get<std::int64_t>(), e.at("bin").get<int>(),
                          parse_region(e.at("region").get<std::string>()), e.at("abs_error").get<double>()});
    }
    r.sorted_errors = j.at("sorted_errors").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("malformed report: ") + ex.what());
  }
  return r;
}

}  // namespace dirgrpo

#endif  // DIRGRPO_EVAL_HPP_
