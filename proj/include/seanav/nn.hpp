#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "seanav/rng.hpp"

namespace seanav::nn {

enum class Activation { Linear, Elu };

template <typename Real>
struct MlpCache {
    // acts[0] is the input copy; acts[l] the post-activation output of layer l.
    std::vector<std::vector<Real>> acts;
    std::vector<std::vector<Real>> preacts;
};

// Dense MLP over an externally owned flat parameter span. Layout per layer:
// row-major weight (out x in) followed by bias (out). Keeping parameters and
// gradients in caller-provided flat storage lets one Adam state drive several
// heads that share a parameter vector.
template <typename Real>
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> sizes, Activation hidden, Activation output)
        : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
        assert(sizes_.size() >= 2);
    }

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::size_t layer_count() const { return sizes_.size() - 1; }
    const std::vector<int>& sizes() const { return sizes_; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            n += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1])
               + static_cast<std::size_t>(sizes_[l + 1]);
        }
        return n;
    }

    // Orthogonal weights (gain 1.0 on every layer except the last, which uses
    // final_gain), zero biases.
    void init(std::span<Real> params, Rng& rng, double final_gain = 1.0) const {
        assert(params.size() == param_count());
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const int in = sizes_[l], out = sizes_[l + 1];
            const double gain = (l + 2 == sizes_.size()) ? final_gain : 1.0;
            init_orthogonal(params.subspan(off, static_cast<std::size_t>(in) * out), out, in,
                            gain, rng);
            off += static_cast<std::size_t>(in) * out;
            for (int i = 0; i < out; ++i) params[off + static_cast<std::size_t>(i)] = Real(0);
            off += static_cast<std::size_t>(out);
        }
    }

    std::span<const Real> forward(std::span<const Real> params, std::span<const Real> input,
                                  MlpCache<Real>& cache) const {
        const std::size_t layers = layer_count();
        cache.acts.resize(layers + 1);
        cache.preacts.resize(layers);
        cache.acts[0].assign(input.begin(), input.end());
        std::size_t off = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            const int in = sizes_[l], out = sizes_[l + 1];
            const Real* w = params.data() + off;
            const Real* b = w + static_cast<std::size_t>(in) * out;
            auto& z = cache.preacts[l];
            auto& a = cache.acts[l + 1];
            z.resize(static_cast<std::size_t>(out));
            a.resize(static_cast<std::size_t>(out));
            const Real* x = cache.acts[l].data();
            for (int o = 0; o < out; ++o) {
                const Real* row = w + static_cast<std::size_t>(o) * in;
                Real acc = b[o];
                for (int i = 0; i < in; ++i) acc += row[i] * x[i];
                z[static_cast<std::size_t>(o)] = acc;
            }
            const Activation act = (l + 1 == layers) ? output_ : hidden_;
            for (int o = 0; o < out; ++o) {
                a[static_cast<std::size_t>(o)] = apply(act, z[static_cast<std::size_t>(o)]);
            }
            off += static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
        }
        return cache.acts.back();
    }

    // Accumulates parameter gradients into grad_params (same layout as params)
    // and, when grad_input is non-empty, accumulates the input gradient too.
    void backward(std::span<const Real> params, const MlpCache<Real>& cache,
                  std::span<const Real> grad_output, std::span<Real> grad_params,
                  std::span<Real> grad_input, std::vector<Real>& scratch) const {
        const std::size_t layers = layer_count();
        scratch.assign(grad_output.begin(), grad_output.end());
        std::size_t off = param_count();
        std::vector<Real> next;
        for (std::size_t l = layers; l-- > 0;) {
            const int in = sizes_[l], out = sizes_[l + 1];
            off -= static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
            const Real* w = params.data() + off;
            Real* gw = grad_params.data() + off;
            Real* gb = gw + static_cast<std::size_t>(in) * out;
            const Activation act = (l + 1 == layers) ? output_ : hidden_;
            const auto& z = cache.preacts[l];
            const auto& x = cache.acts[l];
            for (int o = 0; o < out; ++o) {
                scratch[static_cast<std::size_t>(o)] *=
                    derivative(act, z[static_cast<std::size_t>(o)]);
            }
            const bool want_input = l > 0 || !grad_input.empty();
            if (want_input) {
                next.assign(static_cast<std::size_t>(in), Real(0));
            }
            for (int o = 0; o < out; ++o) {
                const Real g = scratch[static_cast<std::size_t>(o)];
                const Real* row = w + static_cast<std::size_t>(o) * in;
                Real* grow = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) {
                    grow[i] += g * x[static_cast<std::size_t>(i)];
                    if (want_input) next[static_cast<std::size_t>(i)] += g * row[i];
                }
                gb[o] += g;
            }
            if (l == 0) {
                if (!grad_input.empty()) {
                    for (int i = 0; i < in; ++i) grad_input[static_cast<std::size_t>(i)] += next[static_cast<std::size_t>(i)];
                }
            } else {
                scratch.swap(next);
            }
        }
    }

private:
    static Real apply(Activation a, Real z) {
        if (a == Activation::Linear) return z;
        return z > Real(0) ? z : std::exp(z) - Real(1);
    }
    static Real derivative(Activation a, Real z) {
        if (a == Activation::Linear) return Real(1);
        return z > Real(0) ? Real(1) : std::exp(z);
    }

    // Orthonormal rows (out <= in) or columns (out > in) via modified
    // Gram-Schmidt on a Gaussian draw, matching the usual orthogonal init.
    static void init_orthogonal(std::span<Real> w, int out, int in, double gain, Rng& rng) {
        const int rows = out, cols = in;
        std::vector<double> m(static_cast<std::size_t>(rows) * cols);
        for (auto& v : m) v = rng.normal();
        const bool by_rows = rows <= cols;
        const int nvec = by_rows ? rows : cols;
        const int dim = by_rows ? cols : rows;
        auto at = [&](int v, int d) -> double& {
            return by_rows ? m[static_cast<std::size_t>(v) * cols + d]
                           : m[static_cast<std::size_t>(d) * cols + v];
        };
        for (int v = 0; v < nvec; ++v) {
            for (int u = 0; u < v; ++u) {
                double dot = 0.0;
                for (int d = 0; d < dim; ++d) dot += at(v, d) * at(u, d);
                for (int d = 0; d < dim; ++d) at(v, d) -= dot * at(u, d);
            }
            double nrm = 0.0;
            for (int d = 0; d < dim; ++d) nrm += at(v, d) * at(v, d);
            nrm = std::sqrt(nrm);
            if (nrm < 1e-12) nrm = 1.0;
            for (int d = 0; d < dim; ++d) at(v, d) /= nrm;
        }
        for (std::size_t i = 0; i < m.size(); ++i) w[i] = static_cast<Real>(gain * m[i]);
    }

    std::vector<int> sizes_;
    Activation hidden_ = Activation::Elu;
    Activation output_ = Activation::Linear;
};

template <typename Real>
struct Adam {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t steps = 0;
    std::vector<Real> m, v;

    void reset(std::size_t n) {
        m.assign(n, Real(0));
        v.assign(n, Real(0));
        steps = 0;
    }

    void step(std::span<Real> params, std::span<const Real> grads) {
        assert(params.size() == m.size() && grads.size() == m.size());
        ++steps;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = static_cast<double>(grads[i]);
            const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
            const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
            m[i] = static_cast<Real>(mi);
            v[i] = static_cast<Real>(vi);
            const double mh = mi / bc1;
            const double vh = vi / bc2;
            params[i] = static_cast<Real>(static_cast<double>(params[i]) - lr * mh / (std::sqrt(vh) + eps));
        }
    }
};

}  // namespace seanav::nn
