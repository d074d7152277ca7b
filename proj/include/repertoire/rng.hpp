#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace repertoire {

/// Stream tags, one per module, so streams of different modules never collide.
enum class RngTag : std::uint64_t {
    ShapeSpace = 1,
    Encounter = 2,
    Estimator = 3,
    Competition = 4,
    Mobile = 5,
    Perturbation = 6,
};

/// Counter-based generator: output n is a keyed hash of n.
/// The key is derived from (seed, tag, stream), so every
/// (experiment, unit) pair gets an independent, reproducible stream.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, RngTag tag, std::uint64_t stream = 0);
    CounterRng(std::uint64_t seed, RngTag tag, std::uint64_t stream, std::uint64_t substream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    /// Uniform in (0, 1], never exactly zero.
    double uniform();
    double normal();
    /// Failures before the first success of a Bernoulli(p) sequence; +inf when p <= 0.
    double geometric_failures(double p);
    std::uint64_t poisson(double mean);
    std::uint64_t binomial(std::uint64_t n, double p);
    std::vector<std::uint64_t> multinomial(std::uint64_t n, const std::vector<double>& p);
    /// Index drawn from unnormalized nonnegative weights.
    std::size_t categorical(const std::vector<double>& w);

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace repertoire
