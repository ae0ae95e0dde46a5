#pragma once

#include <functional>
#include <map>
#include <string>

#include "dmh/param_store.hpp"
#include "dmh/rng.hpp"
#include "dmh/tensor.hpp"

namespace dmh {

// Builds a scalar loss from the current parameter values. Called repeatedly
// with the same RngStream value, so any sampling inside is replayed exactly.
using GraphBuilder = std::function<NodePtr(ParamStore&, RngStream)>;

struct CheckReport {
    // per-parameter worst relative error between analytic and central
    // finite-difference gradients
    std::map<std::string, double> max_rel_err;
    double worst = 0.0;
    std::string worst_param;
    bool pass = false;
};

// Fault-injection hook: mutates the analytic-gradient snapshot before the
// comparison, so detector self-tests can prove a corrupted gradient fails.
using GradTamper = std::function<void(std::map<std::string, std::vector<double>>&)>;

// Central differences with step h on every element of every parameter.
// relerr = |fd - an| / max(|fd|, |an|, 0.01); pass iff worst <= tol.
CheckReport grad_check(const GraphBuilder& builder, ParamStore& store, RngStream rng,
                       double h = 1e-6, double tol = 1e-4, const GradTamper& tamper = {});

}  // namespace dmh
