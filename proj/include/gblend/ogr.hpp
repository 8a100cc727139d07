#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace gblend {

enum class MetricKind { loss, accuracy };

std::string to_string(MetricKind k);
MetricKind metric_from_string(const std::string& s);

/// Train-subset (T') and holdout (V) measurements of one head at one epoch.
struct CheckpointRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::string source;  // identifies the T'/V pair; records from different sources do not mix

  void validate() const;
};

inline constexpr double kGeneralizationEpsilon = 1e-8;

// Overfitting accumulated between rec0 and recN. For loss:
//   O = (L^T_0 - L^T_N) - (L^V_0 - L^V_N)
// For accuracy the gains are measured upward:
//   O = (acc^T_N - acc^T_0) - (acc^V_N - acc^V_0)
double overfitting_at(const CheckpointRecord& rec0, const CheckpointRecord& recN, MetricKind kind);

// Generalization: L^V_0 - L^V_N, or acc^V_N - acc^V_0.
double generalization_at(const CheckpointRecord& rec0, const CheckpointRecord& recN,
                         MetricKind kind);

struct OgrReport {
  double delta_o = 0.0;
  double delta_g = 0.0;
  std::optional<double> ogr;  // |dO / dG|; empty when |dG| < kGeneralizationEpsilon
  bool negative_g = false;    // dG < 0: the window made the holdout metric worse
  MetricKind kind = MetricKind::loss;

  bool defined() const noexcept { return ogr.has_value(); }
};

// OGR over [recA, recB] measured relative to the common origin rec0.
OgrReport ogr_between(const CheckpointRecord& rec0, const CheckpointRecord& recA,
                      const CheckpointRecord& recB, MetricKind kind);

// Same window with recA as its own origin (O_A = G_A = 0).
OgrReport ogr_between(const CheckpointRecord& recA, const CheckpointRecord& recB, MetricKind kind);

}  // namespace gblend
