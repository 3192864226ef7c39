#pragma once

#include <map>
#include <vector>

#include "ssm/eps_mode.hpp"
#include "ssm/model.hpp"

namespace ssm {

// Truncated Fourier-Taylor series Σ_n Σ_{|k|<=n} w[n][k] r^n e^{ikθ} with
// vector-valued coefficients of length dim. Entries with |k| > n are zero by
// storage layout.
template <class S>
class FourierTaylor {
public:
    FourierTaylor() = default;
    FourierTaylor(int order, int dim, const S& zero)
        : order_(order), dim_(dim), zero_(zero), data_(static_cast<std::size_t>((order + 1) * (order + 1) * dim), zero) {}

    int order() const { return order_; }
    int dim() const { return dim_; }
    const S& zero() const { return zero_; }

    S& at(int n, int k, int c) { return data_[index(n, k, c)]; }
    const S& at(int n, int k, int c) const {
        if (n < 0 || n > order_ || k < -n || k > n) return zero_;
        return data_[index(n, k, c)];
    }
    std::vector<S> coeff(int n, int k) const {
        std::vector<S> v(dim_, zero_);
        for (int c = 0; c < dim_; ++c) v[c] = at(n, k, c);
        return v;
    }
    void set(int n, int k, const std::vector<S>& v) {
        for (int c = 0; c < dim_; ++c) at(n, k, c) = v[c];
    }

    FourierTaylor truncated(int order) const {
        FourierTaylor out(order, dim_, zero_);
        for (int n = 0; n <= std::min(order, order_); ++n)
            for (int k = -n; k <= n; ++k)
                for (int c = 0; c < dim_; ++c) out.at(n, k, c) = at(n, k, c);
        return out;
    }

    FourierTaylor& operator+=(const FourierTaylor& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    FourierTaylor& operator-=(const FourierTaylor& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    const std::vector<S>& raw() const { return data_; }
    std::vector<S>& raw() { return data_; }

private:
    std::size_t index(int n, int k, int c) const {
        return static_cast<std::size_t>((n * n + k + n) * dim_ + c);
    }

    int order_ = 0;
    int dim_ = 0;
    S zero_{};
    std::vector<S> data_;
};

template <class R>
using JetC = EpsPoly<Cx<R>>;
template <class R>
using JetR = EpsPoly<R>;
template <class R>
using Series = FourierTaylor<JetC<R>>;

// Product of component ca of a with component cb of b, truncated at `order`.
template <class S>
FourierTaylor<S> multiply(const FourierTaylor<S>& a, int ca, const FourierTaylor<S>& b, int cb, int order) {
    FourierTaylor<S> out(order, 1, a.zero());
    for (int n1 = 0; n1 <= std::min(order, a.order()); ++n1) {
        for (int k1 = -n1; k1 <= n1; ++k1) {
            const S& x = a.at(n1, k1, ca);
            if (x.is_zero()) continue;
            for (int n2 = 0; n1 + n2 <= order && n2 <= b.order(); ++n2) {
                for (int k2 = -n2; k2 <= n2; ++k2) {
                    const S& y = b.at(n2, k2, cb);
                    if (y.is_zero()) continue;
                    out.at(n1 + n2, k1 + k2, 0) += x * y;
                }
            }
        }
    }
    return out;
}

// Fourier-Taylor expansion of N_ε(W) through `order`.
template <class R>
Series<R> series_compose(const BasicField<R>& model, const Series<R>& W, int order, const EpsContext<R>& ctx) {
    const int dim = model.dim();
    const auto zero = ctx.template zero<Cx<R>>();
    Series<R> out(order, dim, zero);
    // powers[i][p] = W_i^p, built lazily
    std::vector<std::vector<Series<R>>> powers(dim);
    auto power = [&](int i, int p) -> const Series<R>& {
        auto& pw = powers[i];
        if (pw.empty()) {
            Series<R> one(order, 1, zero);
            one.at(0, 0, 0) = ctx.constant(Cx<R>(1));
            pw.push_back(one);
        }
        while (static_cast<int>(pw.size()) <= p) {
            pw.push_back(multiply(pw.back(), 0, W, i, order));
        }
        return pw[p];
    };
    for (const auto& t : model.terms) {
        Series<R> prod(order, 1, zero);
        bool first = true;
        for (int i = 0; i < dim; ++i) {
            if (t.exponents[i] == 0) continue;
            const auto& pi = power(i, t.exponents[i]);
            prod = first ? pi : multiply(prod, 0, pi, 0, order);
            first = false;
        }
        auto c = ctx.constant(Cx<R>(t.coefficient));
        for (int p = 0; p < t.eps_degree; ++p) c = ctx.times_eps(c);
        for (int n = 0; n <= order; ++n)
            for (int k = -n; k <= n; ++k) {
                const auto& x = prod.at(n, k, 0);
                if (!x.is_zero()) out.at(n, k, t.target) += c * x;
            }
    }
    return out;
}

// Σ_{k} coefficient e^{ikθ} at fixed n, evaluated as a complex vector.
template <class R, class E>
std::vector<Cx<R>> eval_series(const Series<R>& W, const R& r, const R& theta, const E& eps) {
    const int dim = W.dim();
    std::vector<Cx<R>> out(dim, Cx<R>(0));
    R rn(1);
    for (int n = 0; n <= W.order(); ++n) {
        for (int k = -n; k <= n; ++k) {
            Cx<R> e = cis(R(k) * theta) * rn;
            for (int c = 0; c < dim; ++c) {
                const auto& x = W.at(n, k, c);
                if (!x.is_zero()) out[c] += x.evaluate(eps) * e;
            }
        }
        rn *= r;
    }
    return out;
}

}  // namespace ssm
