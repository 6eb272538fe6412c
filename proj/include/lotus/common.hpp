#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lotus {

// Error taxonomy. The CLI maps these onto exit codes:
// config/usage -> 1, io/format -> 2, numeric -> 3.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    std::string path;
    IoError(std::string p, const std::string& msg)
        : std::runtime_error(msg + ": " + p), path(std::move(p)) {}
};

struct FormatError : std::runtime_error {
    std::string path;
    uint64_t offset;
    FormatError(std::string p, uint64_t off, const std::string& msg)
        : std::runtime_error(msg + " (" + p + ", byte " + std::to_string(off) + ")"),
          path(std::move(p)),
          offset(off) {}
};

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Named sub-streams of the run seed. Commands that must replay each other's
// stochastic choices (e.g. lottery fine-tuning reproducing the baseline run
// at drop_fraction 0) derive the same stream ids.
namespace streams {
constexpr uint64_t kDataTrain = 1;
constexpr uint64_t kDataEval = 2;
constexpr uint64_t kInit = 3;
constexpr uint64_t kTrain = 4;
constexpr uint64_t kIspSubset = 5;
constexpr uint64_t kIspTrain = 6;
}  // namespace streams

inline uint64_t derive_stream(uint64_t seed, uint64_t stream) {
    uint64_t x = seed ^ (0xA24BAED4963EE407ull * (stream + 1));
    return splitmix64(x);
}

// All randomness in the project flows through this: a single 64-bit seed
// expanded via splitmix64. Determinism is within-build, not cross-language.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        do {
            u = uniform();
        } while (u <= 0.0);
        const double r = std::sqrt(-2.0 * std::log(u));
        const double theta = 6.283185307179586 * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // N(0, sigma^2) resampled until |z| <= clip standard deviations.
    double truncated_normal(double sigma, double clip) {
        double z = 0.0;
        do {
            z = normal();
        } while (std::fabs(z) > clip);
        return z * sigma;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// floor(fraction * n), tolerating the binary rounding of decimal grid values
// (0.3 * 1000 must count as 300, not 299).
inline int64_t floor_count(double fraction, int64_t n) {
    return static_cast<int64_t>(std::floor(fraction * static_cast<double>(n) + 1e-6));
}

}  // namespace lotus
