#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "skelact/model.hpp"

namespace skelact {

struct VerifyItem {
    std::string name;
    double metric = 0.0;  // max abs diff or max relative gradient error
    double tol = 0.0;
    bool pass = true;
};

struct VerifyReport {
    std::vector<VerifyItem> items;
    bool pass = true;

    void add(VerifyItem item) {
        pass = pass && item.pass;
        items.push_back(std::move(item));
    }
    void merge(const VerifyReport& other) {
        for (const auto& it : other.items) add(it);
    }
};

// Fast kernels vs the serial direct-summation oracles, >= 10 seeded shapes
// per kernel, 1e-5 absolute.
VerifyReport verify_kernel_oracles(uint64_t seed);

// Per-layer/op gradient checks, central differences, 64-bit, h=1e-3,
// tolerance 1e-4.
VerifyReport verify_layer_gradients(uint64_t seed);

// Full two-stream micro model (U=4, D=8, L=1, H=2, CNN widths /8, two
// classes), every parameter against finite differences.
VerifyReport verify_model_gradients(uint64_t seed);

// Degenerate-case identities: 75-token window arithmetic, zero/identity
// attention scores, zero motion of a static sequence.
VerifyReport verify_structure();

VerifyReport run_all_verification(uint64_t seed);

void print_report(const VerifyReport& report, std::ostream& os);

// The micro configuration used by the gradient-check suites.
ModelConfig micro_gradcheck_config();

}  // namespace skelact
