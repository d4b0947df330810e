#include "pel/codecs.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <unordered_map>

#include "pel/rng.hpp"

namespace pel {

const char* codec_kind_name(CodecKind kind) {
    switch (kind) {
        case CodecKind::uniform_mse: return "uniform-mse";
        case CodecKind::deadzone_opaque: return "deadzone-opaque";
        case CodecKind::cell_sampler_perceptual: return "cell-sampler-perceptual";
    }
    return "?";
}

CodecKind codec_kind_from_name(const std::string& name) {
    if (name == "uniform-mse") return CodecKind::uniform_mse;
    if (name == "deadzone-opaque") return CodecKind::deadzone_opaque;
    if (name == "cell-sampler-perceptual") return CodecKind::cell_sampler_perceptual;
    throw ConfigError("unknown codec kind: " + name);
}

std::string Bitstream::codec_id() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s:delta=%.17g:offset=%.17g", codec_kind_name(kind), delta, offset);
    return buf;
}

uint64_t Bitstream::content_hash() const {
    uint64_t h = fnv1a64(codec_id());
    h = mix_word(h, static_cast<uint64_t>(n));
    h = mix_word(h, static_cast<uint64_t>(d));
    if (!symbols.empty()) h = mix_word(h, fnv1a64(symbols.data(), symbols.size() * sizeof(int64_t)));
    return h;
}

int64_t QuantizerGeometry::index_of(double x) const { return static_cast<int64_t>(std::floor((x - offset) / delta)); }

double QuantizerGeometry::center(int64_t index) const { return offset + (static_cast<double>(index) + 0.5) * delta; }

void QuantizerGeometry::bounds(int64_t index, double* lo, double* hi) const {
    *lo = offset + static_cast<double>(index) * delta;
    *hi = offset + static_cast<double>(index + 1) * delta;
}

double SoftQuantizer::soft_center(double x) const {
    const int64_t k0 = geom.index_of(x);
    double wsum = 0.0, csum = 0.0;
    for (int64_t k = k0 - 2; k <= k0 + 2; ++k) {
        const double c = geom.center(k);
        const double z = (x - c) / (tau * geom.delta);
        const double w = std::exp(-z * z);
        wsum += w;
        csum += w * c;
    }
    return csum / wsum;
}

double SoftQuantizer::soft_center_grad(double x) const {
    const int64_t k0 = geom.index_of(x);
    double wsum = 0.0, csum = 0.0, dwsum = 0.0, dcsum = 0.0;
    const double s = tau * geom.delta;
    for (int64_t k = k0 - 2; k <= k0 + 2; ++k) {
        const double c = geom.center(k);
        const double z = (x - c) / s;
        const double w = std::exp(-z * z);
        const double dw = w * (-2.0 * z / s);
        wsum += w;
        csum += w * c;
        dwsum += dw;
        dcsum += dw * c;
    }
    // quotient rule on csum/wsum. At tau = 10 the window weights are nearly
    // uniform, so the surrogate hugs the hard staircase (in-cell tilt of a
    // few percent of delta); the window shift at a cell boundary swaps one
    // far cell on each side, which cancels to first order by symmetry.
    return (dcsum * wsum - csum * dwsum) / (wsum * wsum);
}

namespace {

void check_finite(const SampleBatch& x, const char* what) {
    if (!x.all_finite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

class QuantizerCodec : public BaseCodec {
  public:
    QuantizerCodec(CodecKind kind, double delta, double offset) : kind_(kind), geom_{kind, delta, offset} {
        if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("codec: delta must be > 0");
        if (!std::isfinite(offset)) throw ConfigError("codec: offset must be finite");
        if (kind != CodecKind::deadzone_opaque) soft_ = SoftQuantizer{geom_, 10.0};
    }

    CodecKind kind() const override { return kind_; }
    bool differentiable() const override { return kind_ != CodecKind::deadzone_opaque; }

    Bitstream encode(const SampleBatch& x) const override {
        check_finite(x, "encode");
        Bitstream y;
        y.kind = kind_;
        y.delta = geom_.delta;
        y.offset = geom_.offset;
        y.n = x.n;
        y.d = x.d;
        y.symbols.resize(x.values.size());
        const bool deadzone = kind_ == CodecKind::deadzone_opaque;
        for (size_t i = 0; i < x.values.size(); ++i) {
            int64_t k = geom_.index_of(x.values[i]);
            if (deadzone) {
                // widened zero bin [-delta, delta): indices -1 and 0 merge
                // into 0, everything below shifts up by one
                if (k == -1) k = 0;
                else if (k < -1) k += 1;
            }
            y.symbols[i] = k;
        }
        return y;
    }

    SampleBatch decode(const Bitstream& y, uint64_t rng_seed) const override {
        if (y.kind != kind_ || y.delta != geom_.delta || y.offset != geom_.offset)
            throw std::invalid_argument("decode: foreign bitstream (codec mismatch)");
        if (y.n < 0 || y.d < 1 || y.symbols.size() != static_cast<size_t>(y.n * y.d))
            throw std::invalid_argument("decode: corrupt bitstream shape");
        SampleBatch x(y.n, y.d);
        switch (kind_) {
            case CodecKind::uniform_mse:
                for (size_t i = 0; i < y.symbols.size(); ++i) x.values[i] = geom_.center(y.symbols[i]);
                break;
            case CodecKind::deadzone_opaque:
                for (size_t i = 0; i < y.symbols.size(); ++i) {
                    const int64_t k = y.symbols[i];
                    // zero bin decodes to its center = offset; side bins to
                    // their midpoints (cells [k*delta,(k+1)*delta) for k>0,
                    // ((k-1)*delta, k*delta] mirrored below)
                    double u;
                    if (k == 0) u = 0.0;
                    else if (k > 0) u = (static_cast<double>(k) + 0.5) * geom_.delta;
                    else u = (static_cast<double>(k) - 0.5) * geom_.delta;
                    x.values[i] = geom_.offset + u;
                }
                break;
            case CodecKind::cell_sampler_perceptual:
                for (int64_t i = 0; i < y.n; ++i) {
                    Rng rng(sample_stream(rng_seed, static_cast<uint64_t>(i)));
                    const int64_t* sym = y.symbols.data() + i * y.d;
                    double* row = x.row(i);
                    for (int64_t j = 0; j < y.d; ++j) {
                        double lo, hi;
                        geom_.bounds(sym[j], &lo, &hi);
                        row[j] = lo + (hi - lo) * rng.uniform();
                    }
                }
                break;
        }
        return x;
    }

    std::optional<QuantizerGeometry> geometry() const override {
        if (kind_ == CodecKind::deadzone_opaque) return std::nullopt;
        return geom_;
    }

    const SoftQuantizer* soft_quantizer() const override {
        if (kind_ == CodecKind::deadzone_opaque) return nullptr;
        return &*soft_;
    }

  private:
    CodecKind kind_;
    QuantizerGeometry geom_;
    std::optional<SoftQuantizer> soft_;
};

// adaptive Simpson with an absolute tolerance; integrands here are smooth
// mixture densities restricted to one cell
double simpson(double fa, double fm, double fb, double a, double b) { return (b - a) / 6.0 * (fa + 4.0 * fm + fb); }

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double m, double b, double fa, double fm, double fb, double whole,
                            double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(fa, flm, fm, a, m);
    const double right = simpson(fm, frm, fb, m, b);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return adaptive_simpson_rec(f, a, m, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40);
}

}  // namespace

std::unique_ptr<BaseCodec> make_codec(CodecKind kind, double delta, double offset) {
    return std::make_unique<QuantizerCodec>(kind, delta, offset);
}

double rate_bits(const Bitstream& y) {
    if (y.n < 1000) throw std::invalid_argument("rate_bits: need n >= 1000 for a stable estimate");
    double total = 0.0;
    for (int64_t j = 0; j < y.d; ++j) {
        std::unordered_map<int64_t, int64_t> hist;
        for (int64_t i = 0; i < y.n; ++i) ++hist[y.symbols[i * y.d + j]];
        double h = 0.0;
        for (const auto& [sym, count] : hist) {
            const double p = static_cast<double>(count) / static_cast<double>(y.n);
            h -= p * std::log2(p);
        }
        total += h;
    }
    return total / static_cast<double>(y.d);
}

SampleBatch cell_posterior_mean(const GmmModel& model, const BaseCodec& codec, const Bitstream& y) {
    if (y.d != 1 || model.d() != 1) throw std::invalid_argument("cell_posterior_mean: only d=1 supported");
    const auto geom = codec.geometry();
    if (!geom) throw std::invalid_argument("cell_posterior_mean: codec exposes no cell geometry");
    const auto density = [&](double x) { return std::exp(model.log_density(0.0, std::span<const double>(&x, 1))); };
    const auto xdensity = [&](double x) { return x * density(x); };

    std::map<int64_t, double> cache;
    SampleBatch out(y.n, 1);
    for (int64_t i = 0; i < y.n; ++i) {
        const int64_t sym = y.symbols[i];
        auto it = cache.find(sym);
        if (it == cache.end()) {
            double lo, hi;
            geom->bounds(sym, &lo, &hi);
            const double mass = adaptive_simpson(density, lo, hi, 1e-13);
            double mean;
            if (mass < 1e-280) {
                mean = geom->center(sym);  // numerically empty cell: fall back to midpoint
            } else {
                mean = adaptive_simpson(xdensity, lo, hi, 1e-13) / mass;
            }
            it = cache.emplace(sym, mean).first;
        }
        out.values[i] = it->second;
    }
    return out;
}

}  // namespace pel
