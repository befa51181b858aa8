#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "skelact/tensor.hpp"

namespace skelact {

struct GradCheckItem {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    double tol = 0.0;
    bool pass = true;
    double worst() const {
        double w = 0.0;
        for (const auto& it : items) w = std::max(w, it.max_rel_err);
        return w;
    }
};

// Compares analytic gradients of a deterministic scalar function against
// central finite differences, per named parameter. f must rebuild its graph
// from the parameter leaves on every call (their values are perturbed in
// place). Throws if two baseline evaluations disagree bit for bit.
GradCheckReport grad_check(
    const std::function<Tensor<double>()>& f,
    const std::vector<std::pair<std::string, Tensor<double>>>& params,
    double h = 1e-3, double tol = 1e-4);

}  // namespace skelact
