#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "amr/cost_ledger.hpp"

namespace amr {

enum class StrategyKind { Oracle, Base, Naive, StandardRehearsal, Adaptive, AdaptiveZeroCost };

// Row index = training stage (0 is the pre-trained model, s is after task s),
// column index = evaluated task.
using LossMatrix = std::vector<std::vector<double>>;

struct TimePercents {
    double total = 0.0;
    double selecting = 0.0;
    double training = 0.0;
};

struct NormalizedMetrics {
    double final_loss_pct = 0.0;
    double forgetting_pct = 0.0;
    TimePercents time;
};

struct ForgettingValue {
    double value = 0.0;
    bool defined = false;  // false with fewer than two stages
};

// Mean over tasks of the last row.
double final_loss_raw(const LossMatrix& losses);

// Mean over tasks t < last of losses[last][t] - losses[t][t].
ForgettingValue forgetting_raw(const LossMatrix& losses);

// 100 * (raw - oracle) / (base - oracle): 0% at the oracle, 100% at the
// untouched pre-trained model. Values outside [0, 100] are legitimate.
double normalize(double raw, double oracle_raw, double base_raw);

// Forgetting expressed on the final-loss scale: 100 * raw / (base - oracle).
// Zero forgetting maps to 0%.
double normalize_forgetting(double forgetting, double oracle_final_raw, double base_final_raw);

TimePercents normalize_time(const CostLedger& ledger, const CostLedger& oracle_ledger);

}  // namespace amr
