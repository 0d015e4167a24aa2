#include "credfed/rng.hpp"

namespace credfed {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t h) {
  return fnv1a64(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()), h);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t s = splitmix64(root ^ fnv1a64(stream));
  s = splitmix64(s ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  s = splitmix64(s ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
  return s;
}

Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t a, std::uint64_t b) {
  return Rng(derive_seed(root, stream, a, b));
}

}  // namespace credfed
