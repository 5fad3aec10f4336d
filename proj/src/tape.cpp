#include "autoode/tape.hpp"

#include <vector>

namespace autoode {

namespace {

double eval_value(const ScalarFn& f, std::span<const double> x) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(x.size());
    for (double xi : x) vars.push_back(tape.leaf(xi));
    Var y = f(tape, vars);
    check_finite(y);
    return y.value();
}

}  // namespace

double grad_check(const ScalarFn& f, std::span<const double> x, double eps) {
    if (eps <= 0.0) throw BadSpec("grad_check needs eps > 0");

    Tape tape;
    std::vector<Var> vars;
    vars.reserve(x.size());
    for (double xi : x) vars.push_back(tape.leaf(xi));
    Var y = f(tape, vars);
    check_finite(y);
    tape.backward(y);

    double worst = 0.0;
    std::vector<double> probe(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double g_ad = tape.adjoint(vars[i]);
        check_finite(g_ad);
        probe[i] = x[i] + eps;
        double up = eval_value(f, probe);
        probe[i] = x[i] - eps;
        double down = eval_value(f, probe);
        probe[i] = x[i];
        double g_fd = (up - down) / (2.0 * eps);
        check_finite(g_fd);
        double rel = std::abs(g_ad - g_fd) / (std::abs(g_fd) + 1e-8);
        if (rel > worst) worst = rel;
    }
    return worst;
}

}  // namespace autoode
