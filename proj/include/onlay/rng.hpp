#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace onlay {

std::uint64_t splitmix64(std::uint64_t& state);

/// Independent stream seed for (seed, a, b, ...) so that every node, step and
/// purpose draws from its own generator.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts);

/// mt19937_64 with portable bounded draws (the std distributions are
/// implementation-defined, which would break cross-platform replay).
class Rng {
public:
   explicit Rng(std::uint64_t seed) : gen_(seed) {}

   std::uint64_t next() { return gen_(); }
   std::uint64_t below(std::uint64_t bound); // uniform in [0, bound), bound > 0
   double        unit();                     // uniform in [0, 1)
   bool          chance(double p) { return p >= 1.0 || (p > 0.0 && unit() < p); }

private:
   std::mt19937_64 gen_;
};

} // namespace onlay
