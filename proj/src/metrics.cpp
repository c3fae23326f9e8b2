#include "amr/metrics.hpp"

#include <cmath>

#include "amr/errors.hpp"

namespace amr {

namespace {

void check_matrix(const LossMatrix& losses) {
    if (losses.empty()) throw UsageError("loss matrix is empty");
    const std::size_t tasks = losses.back().size();
    if (tasks == 0) throw UsageError("loss matrix has an empty final row");
    if (losses.size() > tasks) throw UsageError("loss matrix has more stages than tasks");
    for (std::size_t s = 0; s < losses.size(); ++s)
        if (losses[s].size() <= s) throw UsageError("loss matrix row " + std::to_string(s) + " is missing entries");
}

}  // namespace

double final_loss_raw(const LossMatrix& losses) {
    check_matrix(losses);
    const std::vector<double>& last = losses.back();
    double sum = 0.0;
    for (double v : last) sum += v;
    return sum / static_cast<double>(last.size());
}

ForgettingValue forgetting_raw(const LossMatrix& losses) {
    check_matrix(losses);
    if (losses.size() < 2) return {0.0, false};
    const std::size_t last = losses.size() - 1;
    double sum = 0.0;
    for (std::size_t t = 0; t < last; ++t) sum += losses[last][t] - losses[t][t];
    return {sum / static_cast<double>(last), true};
}

double normalize(double raw, double oracle_raw, double base_raw) {
    const double span = base_raw - oracle_raw;
    if (span == 0.0 || !std::isfinite(span))
        throw NumericError("normalize: oracle and base anchors coincide; percentages are undefined");
    return 100.0 * ((raw - oracle_raw) / span);
}

double normalize_forgetting(double forgetting, double oracle_final_raw, double base_final_raw) {
    const double span = base_final_raw - oracle_final_raw;
    if (span == 0.0 || !std::isfinite(span))
        throw NumericError("normalize_forgetting: oracle and base anchors coincide; percentages are undefined");
    return 100.0 * (forgetting / span);
}

TimePercents normalize_time(const CostLedger& ledger, const CostLedger& oracle_ledger) {
    if (oracle_ledger.total() == 0) throw NumericError("normalize_time: oracle ledger is empty");
    // ratio first, so the oracle's own ledger maps to exactly 100
    const auto denom = static_cast<double>(oracle_ledger.total());
    TimePercents t;
    t.selecting = 100.0 * (static_cast<double>(ledger.selecting_passes) / denom);
    t.training = 100.0 * (static_cast<double>(ledger.training_passes) / denom);
    t.total = t.selecting + t.training;
    return t;
}

}  // namespace amr
