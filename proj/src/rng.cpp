#include "onlay/rng.hpp"

namespace onlay {

std::uint64_t splitmix64(std::uint64_t& state) {
   std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
   z               = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
   z               = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
   return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
   std::uint64_t state = seed;
   std::uint64_t h     = splitmix64(state);
   for (auto p : parts) {
      state ^= p + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2);
      h = splitmix64(state);
   }
   return h;
}

std::uint64_t Rng::below(std::uint64_t bound) {
   // Rejection sampling on the top of the range keeps the draw unbiased.
   std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
   std::uint64_t x;
   do
      x = gen_();
   while (x >= limit);
   return x % bound;
}

double Rng::unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

} // namespace onlay
