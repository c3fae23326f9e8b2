#pragma once

#include <cstdint>

namespace amr {

// Pass-count cost accounting. One example through a forward pass costs 1
// unit; forward plus backward costs 3.
struct CostLedger {
    static constexpr std::uint64_t kForward = 1;
    static constexpr std::uint64_t kForwardBackward = 3;

    std::uint64_t selecting_passes = 0;
    std::uint64_t training_passes = 0;

    std::uint64_t total() const { return selecting_passes + training_passes; }

    void charge_selection_forward(std::uint64_t examples = 1) { selecting_passes += kForward * examples; }
    void charge_training_step(std::uint64_t examples) { training_passes += kForwardBackward * examples; }

    CostLedger& operator+=(const CostLedger& o) {
        selecting_passes += o.selecting_passes;
        training_passes += o.training_passes;
        return *this;
    }
    bool operator==(const CostLedger&) const = default;
};

inline CostLedger operator-(const CostLedger& a, const CostLedger& b) {
    return CostLedger{a.selecting_passes - b.selecting_passes, a.training_passes - b.training_passes};
}

}  // namespace amr
