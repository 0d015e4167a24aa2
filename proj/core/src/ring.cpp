#include "credfed/ring.hpp"

#include <bit>

#include "credfed/errors.hpp"

namespace credfed::he {

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t q) {
  std::uint64_t r = 1 % q;
  base %= q;
  while (exp) {
    if (exp & 1) r = mul_mod(r, base, q);
    base = mul_mod(base, base, q);
    exp >>= 1;
  }
  return r;
}

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    std::uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

std::uint64_t reduce_signed(std::int64_t v, std::uint64_t q) {
  const auto sq = static_cast<std::int64_t>(q);
  std::int64_t r = v % sq;
  if (r < 0) r += sq;
  return static_cast<std::uint64_t>(r);
}

std::int64_t center(std::uint64_t v, std::uint64_t q) {
  return v > q / 2 ? -static_cast<std::int64_t>(q - v) : static_cast<std::int64_t>(v);
}

Poly negacyclic_multiply_schoolbook(const Poly& a, const Poly& b, std::uint64_t q) {
  const std::size_t n = a.size();
  if (b.size() != n) throw DimensionError("ring multiply: degree mismatch");
  Poly out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t p = mul_mod(a[i], b[j], q);
      const std::size_t k = i + j;
      // X^N = -1
      if (k < n) out[k] = add_mod(out[k], p, q);
      else out[k - n] = sub_mod(out[k - n], p, q);
    }
  }
  return out;
}

namespace {

std::size_t bit_reverse(std::size_t x, int bits) {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

}  // namespace

NegacyclicNtt::NegacyclicNtt(std::size_t n, std::uint64_t q) : n_(n), q_(q) {
  if (n < 2 || !std::has_single_bit(n)) throw ParameterError("ring degree must be a power of two >= 2");
  if (q >= (1ULL << 62) || !is_prime(q)) throw ParameterError("ring modulus must be a prime below 2^62");
  if ((q - 1) % (2 * n) != 0) throw ParameterError("ring modulus must satisfy q = 1 mod 2N");

  std::uint64_t psi = 0;
  for (std::uint64_t g = 2; g < q && psi == 0; ++g) {
    const std::uint64_t w = pow_mod(g, (q - 1) / (2 * n), q);
    // w has order dividing 2N; w^N = -1 makes the order exactly 2N.
    if (pow_mod(w, n, q) == q - 1) psi = w;
  }
  if (psi == 0) throw ParameterError("no primitive 2N-th root of unity modulo q");
  const std::uint64_t psi_inv = pow_mod(psi, q - 2, q);
  n_inv_ = pow_mod(n, q - 2, q);

  const int bits = std::countr_zero(n);
  psi_rev_.resize(n);
  psi_inv_rev_.resize(n);
  std::uint64_t p = 1;
  std::uint64_t pi = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = bit_reverse(i, bits);
    psi_rev_[r] = p;
    psi_inv_rev_[r] = pi;
    p = mul_mod(p, psi, q);
    pi = mul_mod(pi, psi_inv, q);
  }
}

void NegacyclicNtt::forward(Poly& a) const {
  if (a.size() != n_) throw DimensionError("ntt: degree mismatch");
  std::size_t t = n_;
  for (std::size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j1 = 2 * i * t;
      const std::uint64_t s = psi_rev_[m + i];
      for (std::size_t j = j1; j < j1 + t; ++j) {
        const std::uint64_t u = a[j];
        const std::uint64_t v = mul_mod(a[j + t], s, q_);
        a[j] = add_mod(u, v, q_);
        a[j + t] = sub_mod(u, v, q_);
      }
    }
  }
}

void NegacyclicNtt::inverse(Poly& a) const {
  if (a.size() != n_) throw DimensionError("ntt: degree mismatch");
  std::size_t t = 1;
  for (std::size_t m = n_; m > 1; m >>= 1) {
    const std::size_t h = m >> 1;
    std::size_t j1 = 0;
    for (std::size_t i = 0; i < h; ++i) {
      const std::uint64_t s = psi_inv_rev_[h + i];
      for (std::size_t j = j1; j < j1 + t; ++j) {
        const std::uint64_t u = a[j];
        const std::uint64_t v = a[j + t];
        a[j] = add_mod(u, v, q_);
        a[j + t] = mul_mod(sub_mod(u, v, q_), s, q_);
      }
      j1 += 2 * t;
    }
    t <<= 1;
  }
  for (auto& v : a) v = mul_mod(v, n_inv_, q_);
}

Poly NegacyclicNtt::multiply(Poly a, Poly b) const {
  forward(a);
  forward(b);
  for (std::size_t i = 0; i < n_; ++i) a[i] = mul_mod(a[i], b[i], q_);
  inverse(a);
  return a;
}

}  // namespace credfed::he
