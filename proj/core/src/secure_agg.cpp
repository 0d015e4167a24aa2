#include "credfed/secure_agg.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "credfed/errors.hpp"

namespace credfed::he {

void SchemeParams::validate() const {
  if (ring_degree < 2 || !std::has_single_bit(ring_degree)) {
    throw ParameterError("he: ring degree must be a power of two");
  }
  if (!is_prime(modulus) || (modulus - 1) % (2 * ring_degree) != 0) {
    throw ParameterError("he: modulus must be a prime with q = 1 mod 2N");
  }
  if (!(scale >= 2.0)) throw ParameterError("he: scale must be at least 2");
  if (!(error_stddev > 0.0)) throw ParameterError("he: error stddev must be positive");
  if (!(max_abs_value > 0.0)) throw ParameterError("he: max_abs_value must be positive");
  if (scale * scale * max_abs_value >= static_cast<double>(modulus) / 2.0) {
    throw ParameterError("he: scale^2 * max_abs_value must stay below q/2");
  }
}

Scheme::Scheme(SchemeParams params)
    : params_((params.validate(), params)), ntt_(params_.ring_degree, params_.modulus) {}

std::size_t Scheme::chunk_count(std::size_t length) const {
  const std::size_t n = params_.ring_degree;
  return length == 0 ? 1 : (length + n - 1) / n;
}

Poly Scheme::sample_ternary(Rng& rng) const {
  std::uniform_int_distribution<int> dist(-1, 1);
  Poly p(params_.ring_degree);
  for (auto& c : p) c = reduce_signed(dist(rng), params_.modulus);
  return p;
}

Poly Scheme::sample_error(Rng& rng) const {
  // Rounded Gaussian, rejected beyond 6 sigma.
  std::normal_distribution<double> dist(0.0, params_.error_stddev);
  const double bound = 6.0 * params_.error_stddev;
  Poly p(params_.ring_degree);
  for (auto& c : p) {
    double v;
    do {
      v = std::round(dist(rng));
    } while (std::abs(v) > bound);
    c = reduce_signed(static_cast<std::int64_t>(v), params_.modulus);
  }
  return p;
}

Poly Scheme::sample_uniform(Rng& rng) const {
  std::uniform_int_distribution<std::uint64_t> dist(0, params_.modulus - 1);
  Poly p(params_.ring_degree);
  for (auto& c : p) c = dist(rng);
  return p;
}

KeyPair Scheme::keygen(Rng& rng) const {
  const std::uint64_t q = params_.modulus;
  KeyPair kp;
  kp.sk.s = sample_ternary(rng);
  kp.pk.a = sample_uniform(rng);
  const Poly e = sample_error(rng);
  const Poly as = multiply(kp.pk.a, kp.sk.s);
  kp.pk.b.resize(params_.ring_degree);
  for (std::size_t i = 0; i < params_.ring_degree; ++i) kp.pk.b[i] = add_mod(sub_mod(0, as[i], q), e[i], q);
  return kp;
}

Ciphertext Scheme::encrypt(const PublicKey& pk, std::span<const double> values, Rng& rng) const {
  const std::uint64_t q = params_.modulus;
  const std::size_t n = params_.ring_degree;
  if (pk.a.size() != n || pk.b.size() != n) throw ContractError("he: public key does not match ring degree");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(std::abs(values[i]) <= params_.max_abs_value)) {
      throw RangeError("he: value " + std::to_string(values[i]) + " at index " + std::to_string(i) +
                       " outside [-" + std::to_string(params_.max_abs_value) + ", " +
                       std::to_string(params_.max_abs_value) + "]");
    }
  }
  Ciphertext ct;
  ct.length = values.size();
  ct.scale = params_.scale;
  const std::size_t chunks = chunk_count(values.size());
  ct.chunks.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    Poly m(n, 0);
    for (std::size_t i = 0; i < n && c * n + i < values.size(); ++i) {
      m[i] = reduce_signed(std::llround(values[c * n + i] * params_.scale), q);
    }
    const Poly u = sample_ternary(rng);
    const Poly e1 = sample_error(rng);
    const Poly e2 = sample_error(rng);
    CiphertextChunk chunk{multiply(pk.b, u), multiply(pk.a, u)};
    for (std::size_t i = 0; i < n; ++i) {
      chunk.c0[i] = add_mod(add_mod(chunk.c0[i], e1[i], q), m[i], q);
      chunk.c1[i] = add_mod(chunk.c1[i], e2[i], q);
    }
    ct.chunks.push_back(std::move(chunk));
  }
  return ct;
}

Ciphertext Scheme::add(const Ciphertext& a, const Ciphertext& b) const {
  if (a.length != b.length || a.chunks.size() != b.chunks.size()) {
    throw ContractError("he: cannot add ciphertexts with different chunk layouts");
  }
  if (a.scale != b.scale) throw ContractError("he: cannot add ciphertexts with different scales");
  const std::uint64_t q = params_.modulus;
  Ciphertext out = a;
  for (std::size_t c = 0; c < out.chunks.size(); ++c) {
    for (std::size_t i = 0; i < params_.ring_degree; ++i) {
      out.chunks[c].c0[i] = add_mod(out.chunks[c].c0[i], b.chunks[c].c0[i], q);
      out.chunks[c].c1[i] = add_mod(out.chunks[c].c1[i], b.chunks[c].c1[i], q);
    }
  }
  return out;
}

Ciphertext Scheme::scale_by_plain(const Ciphertext& ct, double gamma) const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw RangeError("he: plaintext weight must lie in [0, 1]");
  // Only one plaintext multiplication fits: there is no rescaling.
  if (ct.scale != params_.scale) throw ContractError("he: ciphertext was already multiplied");
  const std::uint64_t q = params_.modulus;
  const std::uint64_t w = static_cast<std::uint64_t>(std::llround(gamma * params_.scale)) % q;
  Ciphertext out = ct;
  out.scale = ct.scale * params_.scale;
  for (auto& chunk : out.chunks) {
    for (std::size_t i = 0; i < params_.ring_degree; ++i) {
      chunk.c0[i] = mul_mod(chunk.c0[i], w, q);
      chunk.c1[i] = mul_mod(chunk.c1[i], w, q);
    }
  }
  return out;
}

std::vector<double> Scheme::decrypt(const SecretKey& sk, const Ciphertext& ct) const {
  if (!(ct.scale > 0.0)) throw ContractError("he: ciphertext scale is zero");
  if (sk.s.size() != params_.ring_degree) throw ContractError("he: secret key does not match ring degree");
  if (ct.chunks.size() != chunk_count(ct.length)) throw ContractError("he: inconsistent chunk layout");
  const std::uint64_t q = params_.modulus;
  const std::size_t n = params_.ring_degree;
  std::vector<double> out(ct.length);
  for (std::size_t c = 0; c < ct.chunks.size(); ++c) {
    const Poly c1s = multiply(ct.chunks[c].c1, sk.s);
    for (std::size_t i = 0; i < n && c * n + i < ct.length; ++i) {
      const std::uint64_t m = add_mod(ct.chunks[c].c0[i], c1s[i], q);
      out[c * n + i] = static_cast<double>(center(m, q)) / ct.scale;
    }
  }
  return out;
}

Ciphertext Scheme::weighted_sum(std::span<const Ciphertext> cts, std::span<const double> gammas) const {
  if (cts.empty()) throw ContractError("he: weighted sum of zero ciphertexts");
  if (cts.size() != gammas.size()) throw ContractError("he: one weight per ciphertext required");
  Ciphertext acc = scale_by_plain(cts[0], gammas[0]);
  for (std::size_t k = 1; k < cts.size(); ++k) acc = add(acc, scale_by_plain(cts[k], gammas[k]));
  return acc;
}

namespace {

constexpr char kMagic[8] = {'C', 'F', 'D', 'C', 'T', 'X', 'T', '\0'};

template <typename T>
void put(std::vector<unsigned char>& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const unsigned char> bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw ParseError("ciphertext: truncated buffer");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<unsigned char> serialize(const Ciphertext& ct, const SchemeParams& params) {
  std::vector<unsigned char> out(kMagic, kMagic + 8);
  put<std::uint64_t>(out, params.ring_degree);
  put<std::uint64_t>(out, params.modulus);
  put<double>(out, ct.scale);
  put<std::uint64_t>(out, ct.chunks.size());
  put<std::uint64_t>(out, ct.length);
  for (const auto& chunk : ct.chunks) {
    for (auto v : chunk.c0) put<std::uint64_t>(out, v);
    for (auto v : chunk.c1) put<std::uint64_t>(out, v);
  }
  return out;
}

Ciphertext deserialize(std::span<const unsigned char> bytes, const SchemeParams& params) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw ParseError("ciphertext: bad magic");
  std::size_t pos = 8;
  const auto n = get<std::uint64_t>(bytes, pos);
  const auto q = get<std::uint64_t>(bytes, pos);
  if (n != params.ring_degree || q != params.modulus) throw ParseError("ciphertext: scheme parameters differ");
  Ciphertext ct;
  ct.scale = get<double>(bytes, pos);
  const auto chunks = get<std::uint64_t>(bytes, pos);
  ct.length = get<std::uint64_t>(bytes, pos);
  const std::size_t expected = ct.length == 0 ? 1 : (ct.length + n - 1) / n;
  if (chunks != expected) throw ParseError("ciphertext: chunk count does not match vector length");
  if (bytes.size() - pos != chunks * 2 * n * sizeof(std::uint64_t)) throw ParseError("ciphertext: wrong payload size");
  ct.chunks.resize(chunks);
  for (auto& chunk : ct.chunks) {
    chunk.c0.resize(n);
    chunk.c1.resize(n);
    for (auto& v : chunk.c0) v = get<std::uint64_t>(bytes, pos);
    for (auto& v : chunk.c1) v = get<std::uint64_t>(bytes, pos);
    for (std::size_t i = 0; i < n; ++i)
      if (chunk.c0[i] >= q || chunk.c1[i] >= q) throw ParseError("ciphertext: coefficient not reduced mod q");
  }
  return ct;
}

}  // namespace credfed::he
