#include "gblend/ogr.hpp"

#include <cmath>

#include "gblend/errors.hpp"

namespace gblend {

std::string to_string(MetricKind k) { return k == MetricKind::loss ? "loss" : "accuracy"; }

MetricKind metric_from_string(const std::string& s) {
  if (s == "loss") return MetricKind::loss;
  if (s == "accuracy") return MetricKind::accuracy;
  throw ArgumentError("unknown metric kind '" + s + "'");
}

void CheckpointRecord::validate() const {
  if (epoch < 0) throw ArgumentError("checkpoint epoch must be nonnegative");
  if (!(train_loss >= 0.0) || !(val_loss >= 0.0)) throw ArgumentError("losses must be >= 0");
  if (!(train_acc >= 0.0 && train_acc <= 1.0) || !(val_acc >= 0.0 && val_acc <= 1.0)) {
    throw ArgumentError("accuracies must lie in [0, 1]");
  }
}

namespace {

void check_pair(const CheckpointRecord& a, const CheckpointRecord& b) {
  a.validate();
  b.validate();
  if (a.source != b.source) {
    throw ArgumentError("checkpoint records come from different datasets ('" + a.source +
                        "' vs '" + b.source + "')");
  }
  if (!(a.epoch < b.epoch)) throw ArgumentError("checkpoint epochs must increase");
}

}  // namespace

double overfitting_at(const CheckpointRecord& rec0, const CheckpointRecord& recN, MetricKind kind) {
  check_pair(rec0, recN);
  if (kind == MetricKind::loss) {
    return (rec0.train_loss - recN.train_loss) - (rec0.val_loss - recN.val_loss);
  }
  return (recN.train_acc - rec0.train_acc) - (recN.val_acc - rec0.val_acc);
}

double generalization_at(const CheckpointRecord& rec0, const CheckpointRecord& recN,
                         MetricKind kind) {
  check_pair(rec0, recN);
  return kind == MetricKind::loss ? rec0.val_loss - recN.val_loss : recN.val_acc - rec0.val_acc;
}

OgrReport ogr_between(const CheckpointRecord& rec0, const CheckpointRecord& recA,
                      const CheckpointRecord& recB, MetricKind kind) {
  check_pair(recA, recB);
  const bool origin_is_a = rec0.epoch == recA.epoch;
  const double o_a = origin_is_a ? 0.0 : overfitting_at(rec0, recA, kind);
  const double g_a = origin_is_a ? 0.0 : generalization_at(rec0, recA, kind);
  OgrReport r;
  r.kind = kind;
  r.delta_o = overfitting_at(rec0, recB, kind) - o_a;
  r.delta_g = generalization_at(rec0, recB, kind) - g_a;
  r.negative_g = r.delta_g < 0.0;
  if (std::abs(r.delta_g) >= kGeneralizationEpsilon) r.ogr = std::abs(r.delta_o / r.delta_g);
  return r;
}

OgrReport ogr_between(const CheckpointRecord& recA, const CheckpointRecord& recB, MetricKind kind) {
  return ogr_between(recA, recA, recB, kind);
}

}  // namespace gblend
