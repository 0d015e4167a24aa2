#include <gtest/gtest.h>

#include <random>

#include "credfed/errors.hpp"
#include "credfed/ring.hpp"
#include "credfed/secure_agg.hpp"

using namespace credfed::he;

namespace {
constexpr std::uint64_t kQ = 576460752303421441ULL;

Poly random_poly(std::size_t n, std::uint64_t q, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint64_t> u(0, q - 1);
  Poly p(n);
  for (auto& c : p) c = u(rng);
  return p;
}
}  // namespace

TEST(ModArith, MulModMatchesWideDivision) {
  std::mt19937_64 rng(1);
  for (std::uint64_t q : std::initializer_list<std::uint64_t>{kQ, 97ULL, (1ULL << 61) - 1, 18446744073709551557ULL}) {
    std::uniform_int_distribution<std::uint64_t> u(0, q - 1);
    for (int i = 0; i < 20000; ++i) {
      const std::uint64_t a = u(rng), b = u(rng);
      const auto want = static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % q);
      ASSERT_EQ(mul_mod(a, b, q), want) << a << " * " << b << " mod " << q;
    }
    ASSERT_EQ(mul_mod(q - 1, q - 1, q), 1u);
  }
}

TEST(ModArith, PrimalityAndModulus) {
  EXPECT_TRUE(is_prime(kQ));
  EXPECT_EQ(kQ % 2048, 1u);
  EXPECT_LT(kQ, 1ULL << 59);
  for (std::uint64_t c = kQ + 2048; c < (1ULL << 59); c += 2048) EXPECT_FALSE(is_prime(c));
  EXPECT_FALSE(is_prime(1));
  EXPECT_TRUE(is_prime(2));
  EXPECT_FALSE(is_prime(561));  // Carmichael
  EXPECT_EQ(center(kQ - 1, kQ), -1);
  EXPECT_EQ(reduce_signed(-1, kQ), kQ - 1);
}

TEST(Ntt, RoundTripAndMatchesSchoolbook) {
  std::mt19937_64 rng(2);
  for (std::size_t n : {8u, 64u, 1024u}) {
    const NegacyclicNtt ntt(n, kQ);
    for (int t = 0; t < 3; ++t) {
      const Poly a = random_poly(n, kQ, rng), b = random_poly(n, kQ, rng);
      Poly c = a;
      ntt.forward(c);
      ntt.inverse(c);
      EXPECT_EQ(c, a);
      EXPECT_EQ(ntt.multiply(a, b), negacyclic_multiply_schoolbook(a, b, kQ));
    }
  }
}

TEST(Ntt, NegacyclicWrap) {
  // X^(N-1) * X = X^N = -1.
  const std::size_t n = 16;
  const NegacyclicNtt ntt(n, kQ);
  Poly a(n, 0), b(n, 0);
  a[n - 1] = 1;
  b[1] = 1;
  Poly want(n, 0);
  want[0] = kQ - 1;
  EXPECT_EQ(ntt.multiply(a, b), want);
}

TEST(Ntt, RejectsBadParameters) {
  EXPECT_THROW(NegacyclicNtt(12, kQ), credfed::Error);
  EXPECT_THROW(NegacyclicNtt(1024, 97), credfed::Error);
}
