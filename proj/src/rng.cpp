#include "repertoire/rng.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace repertoire {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, RngTag tag, std::uint64_t stream)
    : CounterRng(seed, tag, stream, 0) {}

CounterRng::CounterRng(std::uint64_t seed, RngTag tag, std::uint64_t stream, std::uint64_t substream) {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ static_cast<std::uint64_t>(tag));
    k = mix64(k ^ stream);
    k = mix64(k ^ (substream * 0xd1b54a32d192ed03ULL));
    key_ = k;
}

CounterRng::result_type CounterRng::operator()() {
    // Two rounds over (key, counter) behave well even for adjacent keys.
    std::uint64_t c = counter_++;
    return mix64(mix64(c ^ key_) + key_);
}

double CounterRng::uniform() {
    // 53 random bits mapped to (0, 1].
    return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
}

double CounterRng::normal() {
    // Box-Muller, one value per call keeps the stream position a pure function of draws.
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double CounterRng::geometric_failures(double p) {
    if (p >= 1.0) {
        (void)uniform();
        return 0.0;
    }
    double u = uniform();
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    return std::floor(std::log(u) / std::log1p(-p));
}

std::uint64_t CounterRng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(*this);
}

std::uint64_t CounterRng::binomial(std::uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::binomial_distribution<std::uint64_t> d(n, p);
    return d(*this);
}

std::vector<std::uint64_t> CounterRng::multinomial(std::uint64_t n, const std::vector<double>& p) {
    std::vector<std::uint64_t> out(p.size(), 0);
    double rest = 0.0;
    for (double x : p) {
        if (x < 0.0) throw std::invalid_argument("multinomial: negative probability");
        rest += x;
    }
    std::uint64_t left = n;
    for (std::size_t i = 0; i < p.size() && left > 0; ++i) {
        if (p[i] <= 0.0) continue;
        double frac = rest > 0.0 ? std::min(1.0, p[i] / rest) : 1.0;
        std::uint64_t k = (i + 1 == p.size()) ? left : binomial(left, frac);
        out[i] = k;
        left -= k;
        rest -= p[i];
    }
    if (left > 0) {
        // Rounding left a remainder; give it to the last positive bin.
        for (std::size_t i = p.size(); i-- > 0;) {
            if (p[i] > 0.0) {
                out[i] += left;
                break;
            }
        }
    }
    return out;
}

std::size_t CounterRng::categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u <= acc && w[i] > 0.0) return i;
    }
    for (std::size_t i = w.size(); i-- > 0;)
        if (w[i] > 0.0) return i;
    return 0;
}

}  // namespace repertoire
