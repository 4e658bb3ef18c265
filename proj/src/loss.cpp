#include "slsim/loss.hpp"

#include <cmath>
#include <vector>

#include "slsim/errors.hpp"
#include "slsim/scalar_ops.hpp"

namespace slsim {

namespace {

template <typename C>
C mean_of(std::vector<C>& terms, const char* what) {
    if (terms.empty())
        throw contract_error(std::string(what) + ": no valid pixels to reduce over");
    C s = vsum(std::span<const C>(terms.data(), terms.size()));
    return s * (1.0 / double(terms.size()));
}

// Sobel x/y responses at (y, x); caller guarantees the 3x3 neighbourhood is in
// bounds and valid.
template <typename T>
void sobel_at(const Image<T>& im, int y, int x, T& gx, T& gy) {
    const T& a = im(y - 1, x - 1);
    const T& b = im(y - 1, x);
    const T& c = im(y - 1, x + 1);
    const T& d = im(y, x - 1);
    const T& e = im(y, x + 1);
    const T& f = im(y + 1, x - 1);
    const T& g = im(y + 1, x);
    const T& h = im(y + 1, x + 1);
    gx = (c + e * 2.0 + h) - (a + d * 2.0 + f);
    gy = (f + g * 2.0 + h) - (a + b * 2.0 + c);
}

} // namespace

template <typename S, typename R>
scalar_promote_t<S, R> masked_loss(const Image<S>& sim, const Image<R>& ref,
                                   const MaskImage& valid, const LossSpec& spec) {
    using C = scalar_promote_t<S, R>;
    if (sim.width != ref.width || sim.height != ref.height)
        throw contract_error("masked_loss: image shapes differ");
    if (valid.width != sim.width || valid.height != sim.height)
        throw contract_error("masked_loss: mask shape differs");
    if (sim.channels != 1 || ref.channels != 1 || valid.channels != 1)
        throw contract_error("masked_loss: expects single-channel images");
    if (spec.w_l1 < 0.0 || spec.w_huber < 0.0 || spec.w_sobel < 0.0)
        throw config_error("masked_loss: negative component weight");
    if (spec.w_huber > 0.0 && spec.huber_tau <= 0.0)
        throw config_error("masked_loss: huber_tau must be positive");
    if (spec.w_l1 == 0.0 && spec.w_huber == 0.0 && spec.w_sobel == 0.0)
        throw config_error("masked_loss: all component weights are zero");

    const int w = sim.width, h = sim.height;
    const double tau = spec.huber_tau;

    std::vector<C> parts;

    if (spec.w_l1 > 0.0 || spec.w_huber > 0.0) {
        std::vector<C> l1_terms, huber_terms;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!valid(y, x))
                    continue;
                C e = sim(y, x) - ref(y, x);
                if (spec.w_l1 > 0.0)
                    l1_terms.push_back(abs(e));
                if (spec.w_huber > 0.0) {
                    // Branch on the value only: the loss is C1 at |e| = tau.
                    if (std::fabs(value_of(e)) <= tau)
                        huber_terms.push_back(sqr(e) * 0.5);
                    else
                        huber_terms.push_back(abs(e) * tau - 0.5 * tau * tau);
                }
            }
        }
        if (spec.w_l1 > 0.0)
            parts.push_back(mean_of(l1_terms, "l1 loss") * spec.w_l1);
        if (spec.w_huber > 0.0)
            parts.push_back(mean_of(huber_terms, "huber loss") * spec.w_huber);
    }

    if (spec.w_sobel > 0.0) {
        std::vector<C> terms;
        for (int y = 1; y + 1 < h; ++y) {
            for (int x = 1; x + 1 < w; ++x) {
                bool ok = true;
                for (int dy = -1; dy <= 1 && ok; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        if (!valid(y + dy, x + dx)) {
                            ok = false;
                            break;
                        }
                if (!ok)
                    continue;
                S sgx, sgy;
                R rgx, rgy;
                sobel_at(sim, y, x, sgx, sgy);
                sobel_at(ref, y, x, rgx, rgy);
                terms.push_back(abs(sgx - rgx) + abs(sgy - rgy));
            }
        }
        parts.push_back(mean_of(terms, "gradient loss") * spec.w_sobel);
    }

    return vsum(std::span<const C>(parts.data(), parts.size()));
}

template double masked_loss(const Image<double>&, const Image<double>&, const MaskImage&,
                            const LossSpec&);
template ad::Var masked_loss(const Image<ad::Var>&, const Image<double>&, const MaskImage&,
                             const LossSpec&);
template ad::Var masked_loss(const Image<ad::Var>&, const Image<ad::Var>&, const MaskImage&,
                             const LossSpec&);

} // namespace slsim
