#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "asac/lstm.hpp"

namespace testutil {

/// |got - want| <= max(abs_floor, rel_tol * max(|got|, |want|))
inline bool grad_close(double got, double want, double rel_tol, double abs_floor = 1e-6) {
    double diff = std::abs(got - want);
    double scale = std::max(std::abs(got), std::abs(want));
    return diff <= std::max(abs_floor, rel_tol * scale);
}

/// Central finite differences of `loss` with respect to every scalar in the
/// model's parameters. The loss closure must read the live model.
template <typename Model>
std::vector<asac::RealArray> fd_model_gradient(Model& model, const std::function<double()>& loss,
                                               double h = 1e-5) {
    std::vector<asac::RealArray> grads;
    for (auto& [name, arr] : asac::named_params(model)) {
        (void)name;
        asac::RealArray g = asac::RealArray::zeros(arr->shape);
        for (std::size_t j = 0; j < arr->size(); ++j) {
            double orig = arr->data[j];
            arr->data[j] = orig + h;
            double up = loss();
            arr->data[j] = orig - h;
            double down = loss();
            arr->data[j] = orig;
            g.data[j] = (up - down) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

/// Worst relative error between two gradient lists; differences below the
/// absolute floor are ignored.
inline double max_grad_error(const std::vector<asac::RealArray>& got,
                             const std::vector<asac::RealArray>& want, double abs_floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
        for (std::size_t j = 0; j < got[i].size(); ++j) {
            double a = got[i].data[j], b = want[i].data[j];
            double diff = std::abs(a - b);
            if (diff <= abs_floor) continue;
            double rel = diff / std::max(std::abs(a), std::abs(b));
            if (rel > worst) worst = rel;
        }
    return worst;
}

}  // namespace testutil
