#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "credfed/ring.hpp"
#include "credfed/rng.hpp"

// Approximate homomorphic encryption of real vectors, CKKS-style.
//
// Values are coefficient-encoded: each real is scaled by Delta, rounded and
// placed in one polynomial coefficient, so addition and multiplication by a
// plaintext scalar act coefficient-wise. That is all weighted aggregation
// needs, and it avoids the canonical embedding.
//
// WARNING: toy parameters (N = 1024, one 59-bit modulus). This is not
// secure and exists to exercise the aggregation protocol only.
namespace credfed::he {

struct SchemeParams {
  std::size_t ring_degree = 1024;
  std::uint64_t modulus = 576460752303421441ULL;  // largest prime < 2^59 with q = 1 mod 2048
  double scale = 33554432.0;                       // Delta = 2^25
  double error_stddev = 3.2;
  double max_abs_value = 100.0;                    // declared plaintext range [-R, R]

  // Throws ParameterError unless N is a power of two, q is an NTT-friendly
  // prime and Delta^2 * R < q / 2.
  void validate() const;
};

struct PublicKey {
  Poly b;  // -a * s + e
  Poly a;
};

struct SecretKey {
  Poly s;  // ternary, stored mod q
};

struct KeyPair {
  PublicKey pk;
  SecretKey sk;
};

struct CiphertextChunk {
  Poly c0;
  Poly c1;
};

struct Ciphertext {
  std::vector<CiphertextChunk> chunks;
  std::size_t length = 0;  // original vector length; the last chunk is zero-padded
  double scale = 0.0;      // Delta after encryption, Delta^2 after a plaintext multiply
};

class Scheme {
 public:
  explicit Scheme(SchemeParams params);

  const SchemeParams& params() const { return params_; }
  std::size_t chunk_count(std::size_t length) const;

  KeyPair keygen(Rng& rng) const;
  Ciphertext encrypt(const PublicKey& pk, std::span<const double> values, Rng& rng) const;
  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const;
  // gamma in [0, 1]; multiplies by round(gamma * Delta), so the scale becomes Delta^2.
  Ciphertext scale_by_plain(const Ciphertext& ct, double gamma) const;
  std::vector<double> decrypt(const SecretKey& sk, const Ciphertext& ct) const;

  // sum_k gamma_k * ct_k, evaluated entirely on ciphertexts.
  Ciphertext weighted_sum(std::span<const Ciphertext> cts, std::span<const double> gammas) const;

  Poly multiply(const Poly& a, const Poly& b) const { return ntt_.multiply(a, b); }

 private:
  Poly sample_ternary(Rng& rng) const;
  Poly sample_error(Rng& rng) const;
  Poly sample_uniform(Rng& rng) const;

  SchemeParams params_;
  NegacyclicNtt ntt_;
};

// Little-endian layout:
//   magic "CFDCTXT\0" | N u64 | q u64 | scale f64 | chunk count u64 |
//   vector length u64 | per chunk: c0[N] u64, c1[N] u64
std::vector<unsigned char> serialize(const Ciphertext& ct, const SchemeParams& params);
Ciphertext deserialize(std::span<const unsigned char> bytes, const SchemeParams& params);

}  // namespace credfed::he
