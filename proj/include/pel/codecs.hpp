#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pel/batch.hpp"
#include "pel/gmm.hpp"

namespace pel {

enum class CodecKind : uint8_t { uniform_mse = 0, deadzone_opaque = 1, cell_sampler_perceptual = 2 };

const char* codec_kind_name(CodecKind kind);
CodecKind codec_kind_from_name(const std::string& name);

// Quantization indices plus the identity of the codec that produced them.
// Enhancement must never touch this; pipeline runs hash it before and after.
struct Bitstream {
    CodecKind kind = CodecKind::uniform_mse;
    double delta = 1.0;
    double offset = 0.0;
    int64_t n = 0;
    int64_t d = 0;
    std::vector<int64_t> symbols;  // row-major n x d

    std::string codec_id() const;
    uint64_t content_hash() const;
};

// Cell layout of a codec that exposes one. The opaque codec never does; that
// is the API surface the end-to-end opacity claim is checked against.
struct QuantizerGeometry {
    CodecKind kind;
    double delta;
    double offset;

    int64_t index_of(double x) const;
    double center(int64_t index) const;
    void bounds(int64_t index, double* lo, double* hi) const;
};

// Differentiable stand-in for the hard quantizer, for gradient-based
// constraints: center(x) ~ sum_k c_k softmax(-((x - c_k)/(tau*delta))^2) over
// a window of 5 cells around the hard cell, tau = 10. Values are in
// reconstruction units (cell centers), so the constraint target is the
// decoded center of the bitstream symbol.
struct SoftQuantizer {
    QuantizerGeometry geom;
    double tau = 10.0;

    double soft_center(double x) const;
    double soft_center_grad(double x) const;
};

class BaseCodec {
  public:
    virtual ~BaseCodec() = default;
    virtual CodecKind kind() const = 0;
    virtual bool differentiable() const = 0;
    virtual Bitstream encode(const SampleBatch& x) const = 0;
    // rng_seed feeds stochastic reconstructions (cell-sampler); deterministic
    // codecs ignore it. Row i depends only on (seed, i).
    virtual SampleBatch decode(const Bitstream& y, uint64_t rng_seed) const = 0;
    // Cell layout, when the codec exposes one. deadzone-opaque returns
    // nullopt by design.
    virtual std::optional<QuantizerGeometry> geometry() const { return std::nullopt; }
    virtual const SoftQuantizer* soft_quantizer() const { return nullptr; }
};

std::unique_ptr<BaseCodec> make_codec(CodecKind kind, double delta, double offset);

// Empirical Shannon entropy of the symbol histogram per dimension, averaged
// over dimensions: bits per sample-dimension. Requires n >= 1000.
double rate_bits(const Bitstream& y);

// Exact E[X0 | symbol cell] per entry by adaptive quadrature on the model
// density; the oracle quantifying the midpoint-decode MSE proxy. d=1 only,
// and the codec must expose its geometry.
SampleBatch cell_posterior_mean(const GmmModel& model, const BaseCodec& codec, const Bitstream& y);

}  // namespace pel
