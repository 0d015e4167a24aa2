#pragma once

#include <cstdint>
#include <vector>

// Arithmetic in Z_q[X] / (X^N + 1) for a prime q < 2^62.
namespace credfed::he {

using Poly = std::vector<std::uint64_t>;

inline std::uint64_t add_mod(std::uint64_t a, std::uint64_t b, std::uint64_t q) {
  const std::uint64_t s = a + b;
  return s >= q ? s - q : s;
}

inline std::uint64_t sub_mod(std::uint64_t a, std::uint64_t b, std::uint64_t q) {
  return a >= b ? a - b : a + q - b;
}

// Requires a, b < q. Below 2^62 the quotient comes from an x87 long double
// estimate that is off by at most one, which avoids a 128-bit division.
inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t q) {
  if (q >= (std::uint64_t{1} << 62)) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % q);
  }
  const auto quot = static_cast<std::uint64_t>(static_cast<long double>(a) * b / q);
  auto r = static_cast<std::int64_t>(a * b - quot * q);
  if (r < 0) r += static_cast<std::int64_t>(q);
  else if (r >= static_cast<std::int64_t>(q)) r -= static_cast<std::int64_t>(q);
  return static_cast<std::uint64_t>(r);
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t q);

// Deterministic Miller-Rabin for 64-bit inputs.
bool is_prime(std::uint64_t n);

// Maps a signed integer into [0, q).
std::uint64_t reduce_signed(std::int64_t v, std::uint64_t q);
// Centered lift of a residue into (-q/2, q/2].
std::int64_t center(std::uint64_t v, std::uint64_t q);

Poly negacyclic_multiply_schoolbook(const Poly& a, const Poly& b, std::uint64_t q);

/// Negacyclic number-theoretic transform. Requires q prime with q = 1 mod 2N.
class NegacyclicNtt {
 public:
  NegacyclicNtt(std::size_t n, std::uint64_t q);

  std::size_t degree() const { return n_; }
  std::uint64_t modulus() const { return q_; }

  void forward(Poly& a) const;
  void inverse(Poly& a) const;
  Poly multiply(Poly a, Poly b) const;

 private:
  std::size_t n_;
  std::uint64_t q_;
  std::uint64_t n_inv_;
  std::vector<std::uint64_t> psi_rev_;
  std::vector<std::uint64_t> psi_inv_rev_;
};

}  // namespace credfed::he
