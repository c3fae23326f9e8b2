#include "amr/cost_ledger.hpp"
#include "amr/errors.hpp"
#include "amr/metrics.hpp"
#include "doctest.h"

using namespace amr;

TEST_CASE("final_loss_raw") {
    CHECK(final_loss_raw({{0.7}}) == 0.7);
    CHECK(final_loss_raw({{0.4, 0.4, 0.4}, {0.4, 0.4, 0.4}}) == doctest::Approx(0.4));
    const LossMatrix hand = {{1.0, 2.0, 3.0}, {0.5, 1.5, 2.5}, {0.75, 1.25, 0.5}};
    CHECK(final_loss_raw(hand) == doctest::Approx((0.75 + 1.25 + 0.5) / 3.0).epsilon(1e-15));
}

TEST_CASE("final_loss_raw: malformed matrices") {
    CHECK_THROWS_AS(final_loss_raw({}), UsageError);
    CHECK_THROWS_AS(final_loss_raw({{}}), UsageError);
    CHECK_THROWS_AS(final_loss_raw({{1.0}, {1.0}}), UsageError);
}

TEST_CASE("forgetting_raw") {
    const LossMatrix frozen = {{0.3, 0.6, 0.9}, {0.3, 0.6, 0.9}, {0.3, 0.6, 0.9}};
    CHECK(forgetting_raw(frozen).value == 0.0);
    CHECK(forgetting_raw(frozen).defined);

    const LossMatrix worse = {{0.2, 9, 9}, {0.3, 0.2, 9}, {0.3, 0.3, 0.2}};
    CHECK(forgetting_raw(worse).value == doctest::Approx(0.1).epsilon(1e-14));

    const LossMatrix better = {{0.5, 9}, {0.25, 0.1}};
    CHECK(forgetting_raw(better).value == -0.25);

    const ForgettingValue single = forgetting_raw({{0.4}});
    CHECK_FALSE(single.defined);
    CHECK(single.value == 0.0);
}

TEST_CASE("normalize: anchors and beyond-base values") {
    CHECK(normalize(0.2, 0.2, 0.8) == 0.0);
    CHECK(normalize(0.8, 0.2, 0.8) == 100.0);
    CHECK(normalize(1.1, 0.2, 0.8) > 100.0);
    CHECK(normalize(0.1, 0.2, 0.8) < 0.0);
    CHECK_THROWS_AS(normalize(0.5, 0.3, 0.3), NumericError);
}

TEST_CASE("normalize_forgetting: zero maps to zero, scale of the final-loss span") {
    CHECK(normalize_forgetting(0.0, 0.2, 0.7) == 0.0);
    CHECK(normalize_forgetting(0.25, 0.25, 0.75) == 50.0);
    CHECK(normalize_forgetting(-0.05, 0.25, 0.75) == doctest::Approx(-10.0));
    CHECK_THROWS_AS(normalize_forgetting(0.1, 0.4, 0.4), NumericError);
}

TEST_CASE("normalize_time: anchors and arithmetic") {
    const CostLedger oracle{0, 100};
    const TimePercents base = normalize_time(CostLedger{}, oracle);
    CHECK(base.total == 0.0);
    CHECK(base.selecting == 0.0);
    CHECK(base.training == 0.0);

    const TimePercents self = normalize_time(oracle, oracle);
    CHECK(self.total == 100.0);
    CHECK(self.selecting == 0.0);
    CHECK(self.training == 100.0);

    const TimePercents t = normalize_time(CostLedger{2, 32}, oracle);
    CHECK(t.total == 34.0);
    CHECK(t.selecting == 2.0);
    CHECK(t.training == 32.0);

    CHECK_THROWS_AS(normalize_time(CostLedger{1, 1}, CostLedger{}), NumericError);
}

TEST_CASE("cost ledger accounting") {
    CostLedger l;
    l.charge_selection_forward(5);
    l.charge_training_step(128);
    CHECK(l.selecting_passes == 5);
    CHECK(l.training_passes == 384);
    CHECK(l.total() == 389);
    CostLedger m = l;
    m += CostLedger{1, 3};
    CHECK(m - l == CostLedger{1, 3});
}
