#include "coordsim/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "coordsim/errors.hpp"

namespace coordsim {
namespace {

// Gauss-Kronrod 15-point nodes and weights on [-1, 1] (positive half).
constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
// Gauss 7-point weights matching the even-indexed Kronrod nodes.
constexpr double kWg[4] = {0.129484966168870, 0.279705391489277,
                           0.381830050505119, 0.417959183673469};

struct PanelEstimate {
    double kronrod;
    double error;
};

PanelEstimate gk15(const std::function<double(double)>& f, double a,
                   double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kXgk[i]);
        fv[14 - i] = f(c + h * kXgk[i]);
    }
    fv[7] = f(c);
    double kronrod = kWgk[7] * fv[7];
    double gauss = kWg[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        kronrod += kWgk[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1)
            gauss += kWg[i / 2] * (fv[i] + fv[14 - i]);
    }
    kronrod *= h;
    gauss *= h;
    // The raw Kronrod-Gauss difference overestimates on smooth panels and
    // stays honest on kinks, so it can trigger extra splits but never a
    // false convergence.
    return {kronrod, std::abs(kronrod - gauss)};
}

struct Interval {
    double a, b, value, error;
};

QuadratureResult adapt(const std::function<double(double)>& f,
                       const std::vector<std::pair<double, double>>& seeds,
                       const QuadratureOptions& opt) {
    std::vector<Interval> stack;
    stack.reserve(64);
    QuadratureResult out;
    double total = 0.0, total_err = 0.0;
    for (auto [a, b] : seeds) {
        if (a == b)
            continue;
        auto est = gk15(f, a, b);
        out.evaluations += 15;
        stack.push_back({a, b, est.kronrod, est.error});
        total += est.kronrod;
        total_err += est.error;
    }
    int splits = 0;
    while (total_err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
        if (++splits > opt.max_intervals)
            throw QuadratureFailure(
                "adaptive integration did not converge within the interval "
                "budget");
        auto worst = std::max_element(
            stack.begin(), stack.end(),
            [](const Interval& x, const Interval& y) {
                return x.error < y.error;
            });
        Interval iv = *worst;
        stack.erase(worst);
        const double mid = 0.5 * (iv.a + iv.b);
        if (mid <= iv.a || mid >= iv.b)
            throw QuadratureFailure(
                "adaptive integration hit interval underflow before "
                "converging");
        auto left = gk15(f, iv.a, mid);
        auto right = gk15(f, mid, iv.b);
        out.evaluations += 30;
        total += left.kronrod + right.kronrod - iv.value;
        total_err += left.error + right.error - iv.error;
        stack.push_back({iv.a, mid, left.kronrod, left.error});
        stack.push_back({mid, iv.b, right.kronrod, right.error});
    }
    out.value = total;
    out.error_estimate = total_err;
    return out;
}

} // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, const QuadratureOptions& opt) {
    if (!(a <= b))
        throw PreconditionViolated("integrate: requires a <= b");
    if (a == b)
        return {};
    return adapt(f, {{a, b}}, opt);
}

QuadratureResult integrate_from_zero(const std::function<double(double)>& f,
                                     double b, const QuadratureOptions& opt) {
    return integrate_from_zero(f, b, {}, opt);
}

QuadratureResult integrate_from_zero(const std::function<double(double)>& f,
                                     double b,
                                     const std::vector<double>& breakpoints,
                                     const QuadratureOptions& opt) {
    if (!(b > 0.0))
        throw PreconditionViolated("integrate_from_zero: requires b > 0");
    const double split = std::min(b, 0.1);
    auto substituted = [&f](double u) { return 2.0 * u * f(u * u); };
    // In u-space, geometric seeding toward 0 resolves boundary layers of
    // width ~1/n that sharp tilts produce before adaptivity kicks in.
    const double usplit = std::sqrt(split);
    std::vector<double> head_edges{0.0};
    double lo = usplit * 0x1.0p-20;
    while (lo < usplit) {
        head_edges.push_back(lo);
        lo *= 4.0;
    }
    head_edges.push_back(usplit);
    std::vector<double> tail_edges{split};
    if (split < b) {
        tail_edges.push_back(0.5 * (split + b));
        tail_edges.push_back(b);
    }
    for (double bp : breakpoints) {
        if (bp > 0.0 && bp < split)
            head_edges.push_back(std::sqrt(bp));
        else if (bp > split && bp < b)
            tail_edges.push_back(bp);
    }
    auto panels = [](std::vector<double>& edges) {
        std::sort(edges.begin(), edges.end());
        std::vector<std::pair<double, double>> out;
        for (std::size_t i = 1; i < edges.size(); ++i)
            if (edges[i - 1] < edges[i])
                out.push_back({edges[i - 1], edges[i]});
        return out;
    };
    QuadratureResult head = adapt(substituted, panels(head_edges), opt);
    if (split == b)
        return head;
    QuadratureResult tail = adapt(f, panels(tail_edges), opt);
    return {head.value + tail.value, head.error_estimate + tail.error_estimate,
            head.evaluations + tail.evaluations};
}

} // namespace coordsim
