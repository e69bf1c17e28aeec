#pragma once

#include "evgrasp/mems/mems.hpp"

#include <chrono>
#include <map>

namespace evg::mems {

/// Precision / recall / F1 of a predicted labeling against ground truth,
/// after greedily matching predicted clusters to true objects by overlap.
struct SegmentationQuality {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-event quality of `pred` vs `truth` (entries < 0 mean noise on both
/// sides). Clusters and objects are matched greedily by descending overlap
/// count; a matched event counts as a true positive.
inline SegmentationQuality clustering_quality(std::span<const int32_t> pred,
                                              std::span<const int32_t> truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("clustering_quality: size mismatch");

  std::map<std::pair<int32_t, int32_t>, std::size_t> overlap;
  std::size_t n_pred = 0, n_truth = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= 0) ++n_pred;
    if (truth[i] >= 0) ++n_truth;
    if (pred[i] >= 0 && truth[i] >= 0) ++overlap[{truth[i], pred[i]}];
  }

  std::vector<std::tuple<std::size_t, int32_t, int32_t>> pairs;
  pairs.reserve(overlap.size());
  for (const auto& [key, count] : overlap)
    pairs.emplace_back(count, key.first, key.second);
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return std::get<0>(a) > std::get<0>(b);
  });

  std::size_t tp = 0;
  std::vector<int32_t> used_truth, used_pred;
  for (const auto& [count, t, p] : pairs) {
    if (std::find(used_truth.begin(), used_truth.end(), t) != used_truth.end())
      continue;
    if (std::find(used_pred.begin(), used_pred.end(), p) != used_pred.end())
      continue;
    used_truth.push_back(t);
    used_pred.push_back(p);
    tp += count;
  }

  SegmentationQuality q;
  q.precision = n_pred > 0 ? static_cast<double>(tp) / n_pred : 0.0;
  q.recall = n_truth > 0 ? static_cast<double>(tp) / n_truth : 0.0;
  q.f1 = (q.precision + q.recall) > 0.0
             ? 2.0 * q.precision * q.recall / (q.precision + q.recall)
             : 0.0;
  return q;
}

/// Measured inputs of one segmentation run.
struct EScoreInputs {
  double t_e_us = 0.0;  // processing time per input event, microseconds
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct EScoreReport {
  EScoreInputs base;
  EScoreInputs test;
  double lambda1 = 0.6;
  double lambda2 = 0.4;
  double ere = 0.0;      // percent relative time improvement
  double fre = 0.0;      // percent relative F1 change (positive on a drop)
  double e_score = 0.0;  // lambda1 * ere + lambda2 * fre
};

/// E-score of a test configuration against a baseline:
///   Ere = -(T_test - T_base) / T_base * 100
///   Fre = -(F1_test - F1_base) / F1_base * 100
///   E   = lambda1 * Ere + lambda2 * Fre
inline EScoreReport e_score(const EScoreInputs& base, const EScoreInputs& test,
                            double lambda1 = 0.6, double lambda2 = 0.4) {
  if (base.t_e_us <= 0.0) throw std::invalid_argument("e_score: baseline T_e must be > 0");
  if (base.f1 <= 0.0) throw std::invalid_argument("e_score: baseline F1 must be > 0");
  if (std::abs(lambda1 + lambda2 - 1.0) > 1e-12)
    throw std::invalid_argument("e_score: lambda1 + lambda2 must equal 1");

  EScoreReport r;
  r.base = base;
  r.test = test;
  r.lambda1 = lambda1;
  r.lambda2 = lambda2;
  r.ere = -(test.t_e_us - base.t_e_us) / base.t_e_us * 100.0;
  r.fre = -(test.f1 - base.f1) / base.f1 * 100.0;
  r.e_score = lambda1 * r.ere + lambda2 * r.fre;
  return r;
}

/// Runs segment() `reps` times and reports the median per-event time
/// (total runtime over the pre-downsampling event count) plus clustering
/// quality against `truth` (per input event; unset truth gives zero F1).
inline EScoreInputs bench_segment(const EventStream& stream,
                                  std::span<const int32_t> truth,
                                  const MemsConfig& cfg, int reps = 5,
                                  uint64_t seed = 0) {
  if (reps < 1) throw std::invalid_argument("bench_segment: reps must be >= 1");
  std::vector<double> times;
  ClusterSet last;
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    last = segment(stream, cfg, seed);
    const auto stop = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::micro>(stop - start).count());
  }
  std::sort(times.begin(), times.end());
  const double median = times[times.size() / 2];

  EScoreInputs in;
  in.t_e_us = median / static_cast<double>(stream.events.size());
  if (!truth.empty()) {
    std::vector<int32_t> retained_truth;
    retained_truth.reserve(last.retained_indices.size());
    for (std::size_t idx : last.retained_indices)
      retained_truth.push_back(truth[idx]);
    const auto q = clustering_quality(last.labels, retained_truth);
    in.f1 = q.f1;
    in.precision = q.precision;
    in.recall = q.recall;
  }
  return in;
}

}  // namespace evg::mems
