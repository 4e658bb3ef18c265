#include "slsim/matcher.hpp"

#include <cmath>

#include "slsim/errors.hpp"
#include "slsim/parallel.hpp"

namespace slsim {

namespace {

constexpr double kZnccEps = 1e-6; // under the sqrt; zeroes constant-block scores
constexpr int kTileRows = 32;     // row granularity of the internal matcher tiles

template <typename S>
void check_match_inputs(const Image<S>& capture, const std::vector<Image<S>>& refs,
                        const SensorConfig& cfg, int d_min, int d_max) {
    validate(cfg);
    if (capture.width != cfg.width || capture.height != cfg.height)
        throw contract_error("matcher: capture does not match the configured image size");
    if (refs.empty()) throw contract_error("matcher: no reference images");
    for (const auto& r : refs)
        if (r.width != capture.width || r.height != capture.height ||
            r.channels != capture.channels)
            throw contract_error("matcher: reference shape differs from capture");
    if (d_min < 0 || d_min > d_max || d_max >= cfg.width)
        throw config_error("matcher: disparity range must satisfy 0 <= d_min <= d_max < width");
}

template <typename S>
CostVolume<S> make_volume(const Image<S>& capture, int n_sub, const SensorConfig& cfg, int d_min,
                          int d_max, int ya, int yb) {
    const int h = cfg.block_size / 2;
    if (d_min < 0 || d_max < d_min)
        throw config_error("matcher: disparity range must satisfy 0 <= d_min <= d_max");
    CostVolume<S> vol;
    vol.width = capture.width;
    vol.height = capture.height;
    vol.d_min = d_min;
    vol.d_max = d_max;
    vol.n_sub = n_sub;
    vol.x0 = d_max + h;
    vol.x1 = capture.width - h;
    vol.y0 = ya;
    vol.y1 = yb;
    for (int k = d_min; k <= d_max; ++k)
        for (int i = 0; i < n_sub; ++i) vol.labels.push_back(k + double(i) / n_sub);
    if (vol.x0 >= vol.x1 || vol.y0 >= vol.y1)
        throw contract_error("matcher: image too small for the block size and disparity range");
    vol.scores.resize(static_cast<size_t>(vol.y1 - vol.y0) * (vol.x1 - vol.x0) *
                      vol.labels.size());
    return vol;
}

// Fills (or, when accumulate is set, adds to) vol.scores for rows
// [vol.y0, vol.y1) from one single-channel capture/reference set. All window
// sums are built from per-row running horizontal sums plus a fixed-order
// vertical gather of w row values, so any row partition produces bitwise
// identical scores.
template <typename S>
void score_channel_rows(const Image<S>& capture, const std::vector<Image<S>>& refs,
                        const SensorConfig& cfg, CostVolume<S>& vol, bool accumulate) {
    const int W = capture.width;
    const int w = cfg.block_size, h = w / 2;
    const double inv_n = 1.0 / (w * w);
    const int ya = vol.y0, yb = vol.y1, rh = yb - ya;
    const int x0 = vol.x0, x1 = vol.x1;
    const int n_sub = vol.n_sub;

    std::vector<S> ring(static_cast<size_t>(w) * W), ring2(static_cast<size_t>(w) * W);
    std::vector<S> col(W), col2(W);
    std::vector<S> gather(w), gather2(w);

    // Horizontal running window sums of one image row into ring slot r % w.
    auto fill_stat_row = [&](const Image<S>& img, int r) {
        for (int x = 0; x < W; ++x) {
            col[x] = img(r, x, 0);
            col2[x] = sqr(img(r, x, 0));
        }
        S* rs = &ring[static_cast<size_t>(r % w) * W];
        S* rs2 = &ring2[static_cast<size_t>(r % w) * W];
        S run = vsum(std::span<const S>(col.data(), w));
        S run2 = vsum(std::span<const S>(col2.data(), w));
        rs[h] = run;
        rs2[h] = run2;
        for (int x = h + 1; x < W - h; ++x) {
            run = run + col[x + h] - col[x - h - 1];
            run2 = run2 + col2[x + h] - col2[x - h - 1];
            rs[x] = run;
            rs2[x] = run2;
        }
    };

    // Vertical gather in fixed top-to-bottom row order.
    auto vertical = [&](std::vector<S>& rbuf, int y, int x) {
        for (int j = 0; j < w; ++j) gather[j] = rbuf[static_cast<size_t>((y - h + j) % w) * W + x];
        return vsum(std::span<const S>(gather.data(), w));
    };

    // Window sum B and scatter Sxx = B2 - B^2/n per pixel of the given image.
    auto image_stats = [&](const Image<S>& img, std::vector<S>& b_out, std::vector<S>& sxx_out) {
        b_out.resize(static_cast<size_t>(rh) * W);
        sxx_out.resize(static_cast<size_t>(rh) * W);
        for (int r = ya - h; r < ya + h; ++r) fill_stat_row(img, r);
        for (int y = ya; y < yb; ++y) {
            fill_stat_row(img, y + h);
            for (int x = h; x < W - h; ++x) {
                S b = vertical(ring, y, x);
                for (int j = 0; j < w; ++j)
                    gather2[j] = ring2[static_cast<size_t>((y - h + j) % w) * W + x];
                S b2 = vsum(std::span<const S>(gather2.data(), w));
                b_out[static_cast<size_t>(y - ya) * W + x] = b;
                sxx_out[static_cast<size_t>(y - ya) * W + x] = b2 - sqr(b) * inv_n;
            }
        }
    };

    std::vector<S> b_cap, sxx_cap;
    image_stats(capture, b_cap, sxx_cap);
    std::vector<std::vector<S>> b_ref(n_sub), syy_ref(n_sub);
    for (int i = 0; i < n_sub; ++i) image_stats(refs[i], b_ref[i], syy_ref[i]);

    // Per-label cross terms: ring of running sums of capture * shifted ref.
    std::vector<S> xring(static_cast<size_t>(w) * W), xcol(W);
    auto fill_cross_row = [&](const Image<S>& ref, int k, int r) {
        for (int x = k; x < W; ++x) xcol[x] = capture(r, x, 0) * ref(r, x - k, 0);
        S* rs = &xring[static_cast<size_t>(r % w) * W];
        S run = vsum(std::span<const S>(xcol.data() + k, w));
        rs[k + h] = run;
        for (int x = k + h + 1; x < W - h; ++x) {
            run = run + xcol[x + h] - xcol[x - h - 1];
            rs[x] = run;
        }
    };

    for (int i = 0; i < n_sub; ++i) {
        const Image<S>& ref = refs[i];
        for (int k = vol.d_min; k <= vol.d_max; ++k) {
            int j = (k - vol.d_min) * n_sub + i;
            for (int r = ya - h; r < ya + h; ++r) fill_cross_row(ref, k, r);
            for (int y = ya; y < yb; ++y) {
                fill_cross_row(ref, k, y + h);
                size_t row_at = static_cast<size_t>(y - ya) * W;
                for (int x = x0; x < x1; ++x) {
                    S bx = vertical(xring, y, x);
                    S sxy = bx - b_cap[row_at + x] * b_ref[i][row_at + x - k] * inv_n;
                    S den = sqrt(sxx_cap[row_at + x] * syy_ref[i][row_at + x - k] + kZnccEps);
                    S score = sxy / den;
                    size_t at = vol.at(y, x, j);
                    if (accumulate)
                        vol.scores[at] = vol.scores[at] + score;
                    else
                        vol.scores[at] = score;
                }
            }
        }
    }
}

template <typename S>
void softargmax_rows(const CostVolume<S>& vol, const S& beta, const SensorConfig& cfg,
                     DisparityMap<S>& out) {
    const int L = vol.n_labels();
    const double fb = cfg.focal_px * cfg.baseline_mm;
    std::vector<S> e(L), t(L);
    for (int y = vol.y0; y < vol.y1; ++y)
        for (int x = vol.x0; x < vol.x1; ++x) {
            size_t base = vol.at(y, x, 0);
            int arg = 0;
            double best = value_of(vol.scores[base]);
            for (int j = 1; j < L; ++j) {
                double v = value_of(vol.scores[base + j]);
                if (v > best) {
                    best = v;
                    arg = j;
                }
            }
            const S& m = vol.scores[base + arg]; // subtracting the max node keeps exp bounded
            for (int j = 0; j < L; ++j) {
                e[j] = exp(beta * (vol.scores[base + j] - m));
                t[j] = e[j] * vol.labels[j];
            }
            S den = vsum(std::span<const S>(e.data(), L));
            S num = vsum(std::span<const S>(t.data(), L));
            S d = num / den;
            out.disparity(y, x) = d;
            out.depth(y, x) = fb / d;
            out.valid(y, x) = 1;
            out.confidence(y, x) = best;
        }
}

template <typename S>
void match_tile(const Image<S>& capture, const std::vector<Image<S>>& refs,
                const SensorConfig& cfg, const S& beta, int d_min, int d_max, int ya, int yb,
                DisparityMap<S>& out) {
    CostVolume<S> vol =
        make_volume(capture, static_cast<int>(refs.size()), cfg, d_min, d_max, ya, yb);
    score_rows(capture, refs, cfg, vol);
    softargmax_rows(vol, beta, cfg, out);
}

template <typename S>
DisparityMap<S> alloc_output(const Image<S>& capture, const S& beta, int d_min, int d_max,
                             int n_sub) {
    DisparityMap<S> out;
    out.disparity = Image<S>(capture.width, capture.height, 1);
    out.depth = Image<S>(capture.width, capture.height, 1);
    out.valid = MaskImage(capture.width, capture.height, 1, 0);
    out.confidence = ImageD(capture.width, capture.height, 1, 0.0);
    out.d_min = d_min;
    out.d_max = d_max;
    out.n_sub = n_sub;
    for (auto& v : out.disparity.data) v = zero_like(beta);
    for (auto& v : out.depth.data) v = zero_like(beta);
    return out;
}

} // namespace

template <typename S>
CostVolume<S> cost_volume(const Image<S>& capture, const Image<S>& reference,
                          const SensorConfig& cfg, std::pair<int, int> d_range) {
    std::vector<Image<S>> refs{reference};
    check_match_inputs(capture, refs, cfg, d_range.first, d_range.second);
    const int h = cfg.block_size / 2;
    CostVolume<S> vol = make_volume(capture, 1, cfg, d_range.first, d_range.second, h,
                                    capture.height - h);
    score_rows(capture, refs, cfg, vol);
    return vol;
}

template <typename S>
DisparityMap<S> soft_disparity(const CostVolume<S>& volume, const S& beta,
                               const SensorConfig& cfg) {
    if (volume.scores.empty()) throw contract_error("soft_disparity: empty cost volume");
    DisparityMap<S> out = alloc_output(Image<S>(volume.width, volume.height, 1), beta,
                                       volume.d_min, volume.d_max, volume.n_sub);
    softargmax_rows(volume, beta, cfg, out);
    return out;
}

template <typename S>
DisparityMap<S> block_match(const Image<S>& capture, const std::vector<Image<S>>& refs,
                            const SensorConfig& cfg, const S& beta, int d_min, int d_max,
                            int threads) {
    check_match_inputs(capture, refs, cfg, d_min, d_max);
    if (static_cast<int>(refs.size()) != cfg.subpixel_levels)
        throw contract_error("block_match: reference count must equal subpixel_levels");
    const int h = cfg.block_size / 2;
    const int y0 = h, y1 = capture.height - h;
    DisparityMap<S> out = alloc_output(capture, beta, d_min, d_max, cfg.subpixel_levels);
    if (y0 >= y1) throw contract_error("block_match: image shorter than the block size");
    int n_tiles = (y1 - y0 + kTileRows - 1) / kTileRows;
    if constexpr (std::is_same_v<S, ad::Var>) {
        for (int i = 0; i < n_tiles; ++i) // tape recording is sequential
            match_tile(capture, refs, cfg, beta, d_min, d_max, y0 + i * kTileRows,
                       std::min(y1, y0 + (i + 1) * kTileRows), out);
    } else {
        parallel_chunks(n_tiles, threads, [&](int i) {
            match_tile(capture, refs, cfg, beta, d_min, d_max, y0 + i * kTileRows,
                       std::min(y1, y0 + (i + 1) * kTileRows), out);
        });
    }
    return out;
}

template <typename S>
DisparityMap<S> strip_split_match(const Image<S>& capture, const std::vector<Image<S>>& refs,
                                  const SensorConfig& cfg, const S& beta, int d_min, int d_max,
                                  int m, int threads) {
    check_match_inputs(capture, refs, cfg, d_min, d_max);
    if (static_cast<int>(refs.size()) != cfg.subpixel_levels)
        throw contract_error("strip_split_match: reference count must equal subpixel_levels");
    if (m < 1) throw config_error("strip_split_match: strip count must be >= 1");
    if (capture.height / m < 2 * cfg.block_size)
        throw config_error("strip_split_match: strip height below twice the block size");
    const int h = cfg.block_size / 2;
    const int y0 = h, y1 = capture.height - h;
    DisparityMap<S> out = alloc_output(capture, beta, d_min, d_max, cfg.subpixel_levels);
    // even partition of all rows; each strip intersects the valid rows
    int base = capture.height / m, extra = capture.height % m;
    std::vector<std::pair<int, int>> strips;
    int at = 0;
    for (int i = 0; i < m; ++i) {
        int len = base + (i < extra ? 1 : 0);
        int a = std::max(at, y0), b = std::min(at + len, y1);
        if (a < b) strips.emplace_back(a, b);
        at += len;
    }
    if constexpr (std::is_same_v<S, ad::Var>) {
        for (const auto& [a, b] : strips)
            match_tile(capture, refs, cfg, beta, d_min, d_max, a, b, out);
    } else {
        parallel_chunks(static_cast<int>(strips.size()), threads, [&](int i) {
            match_tile(capture, refs, cfg, beta, d_min, d_max, strips[i].first, strips[i].second,
                       out);
        });
    }
    return out;
}

#define SLSIM_INSTANTIATE_MATCHER(S)                                                            \
    template CostVolume<S> cost_volume<S>(const Image<S>&, const Image<S>&, const SensorConfig&, \
                                          std::pair<int, int>);                                  \
    template DisparityMap<S> soft_disparity<S>(const CostVolume<S>&, const S&,                   \
                                               const SensorConfig&);                             \
    template DisparityMap<S> block_match<S>(const Image<S>&, const std::vector<Image<S>>&,       \
                                            const SensorConfig&, const S&, int, int, int);       \
    template DisparityMap<S> strip_split_match<S>(const Image<S>&, const std::vector<Image<S>>&, \
                                                  const SensorConfig&, const S&, int, int, int,  \
                                                  int);

SLSIM_INSTANTIATE_MATCHER(double)
SLSIM_INSTANTIATE_MATCHER(ad::Var)

} // namespace slsim
