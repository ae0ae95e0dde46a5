#include "dmh/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dmh {

CheckReport grad_check(const GraphBuilder& builder, ParamStore& store, RngStream rng,
                       double h, double tol, const GradTamper& tamper) {
    store.zero_grads();
    auto loss = builder(store, rng);
    backward_accumulate(loss);

    // snapshot analytic grads before FD rebuilds clobber anything
    std::map<std::string, std::vector<double>> analytic;
    for (const auto& [name, node] : store) {
        if (node->grad.empty())
            analytic[name].assign(node->values.size(), 0.0);
        else
            analytic[name] = node->grad;
    }
    if (tamper) tamper(analytic);

    CheckReport rep;
    for (const auto& [name, node] : store) {
        double worst = 0.0;
        for (std::size_t i = 0; i < node->values.size(); ++i) {
            const double saved = node->values[i];
            node->values[i] = saved + h;
            const double fp = builder(store, rng)->values[0];
            node->values[i] = saved - h;
            const double fm = builder(store, rng)->values[0];
            node->values[i] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic[name][i];
            const double denom = std::max({std::fabs(fd), std::fabs(an), 0.01});
            worst = std::max(worst, std::fabs(fd - an) / denom);
        }
        rep.max_rel_err[name] = worst;
        if (worst >= rep.worst) {
            rep.worst = worst;
            rep.worst_param = name;
        }
    }
    rep.pass = rep.worst <= tol;

    // restore grads to the analytic values so callers can inspect them
    for (const auto& [name, node] : store) node->grad = analytic[name];
    return rep;
}

}  // namespace dmh
