#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace pel {

// Configuration problems (bad keys, invalid parameter combinations). The CLI
// maps these to exit code 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Numerical contract violations at run time (non-finite values, failed
// monotonicity diagnostics). The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Row-major n x d sample matrix. Plain storage: parallel work is partitioned
// by row and every row's randomness comes from its own derived stream, so no
// linear-algebra container is needed here.
struct SampleBatch {
    int64_t n = 0;
    int64_t d = 0;
    std::vector<double> values;

    SampleBatch() = default;
    SampleBatch(int64_t n_, int64_t d_) : n(n_), d(d_), values(static_cast<size_t>(n_ * d_), 0.0) {
        if (n_ < 0 || d_ < 1) throw std::invalid_argument("SampleBatch: n must be >= 0 and d >= 1");
    }

    double* row(int64_t i) { return values.data() + i * d; }
    const double* row(int64_t i) const { return values.data() + i * d; }
    std::span<double> row_span(int64_t i) { return {row(i), static_cast<size_t>(d)}; }
    std::span<const double> row_span(int64_t i) const { return {row(i), static_cast<size_t>(d)}; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_shape(const SampleBatch& a, const SampleBatch& b, const char* what) {
    if (a.n != b.n || a.d != b.d) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace pel
