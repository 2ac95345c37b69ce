#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "embkit/error.hpp"

namespace embkit {

struct TokenizerConfig {
  std::size_t hash_buckets = 65536;
  bool lowercase = true;
  std::size_t max_query_tokens = 256;
  std::size_t max_doc_tokens = 512;

  void validate() const {
    if (hash_buckets < 2) {
      throw Error(ErrorCode::InvalidConfig, "hash_buckets must be >= 2");
    }
    if (max_query_tokens == 0 || max_doc_tokens == 0) {
      throw Error(ErrorCode::InvalidConfig, "max token lengths must be positive");
    }
  }

  friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

using TokenIds = std::vector<std::size_t>;

constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = kFnvOffsetBasis;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

namespace detail {

inline icu::UnicodeString nfc(const icu::UnicodeString& in) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::InvalidConfig, "ICU NFC normalizer unavailable");
  }
  icu::UnicodeString out = norm->normalize(in, status);
  if (U_FAILURE(status)) {
    return in;
  }
  return out;
}

}  // namespace detail

// Splits NFC-normalized (and optionally lowercased) text on Unicode
// whitespace; each token's UTF-8 bytes are hashed with FNV-1a 64.
inline std::vector<std::string> normalized_tokens(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  if (text.empty()) {
    return tokens;
  }
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u = detail::nfc(u);
  if (lowercase) {
    u.toLower(icu::Locale::getRoot());
    u = detail::nfc(u);
  }

  icu::UnicodeString current;
  auto flush = [&] {
    if (!current.isEmpty()) {
      std::string utf8;
      current.toUTF8String(utf8);
      tokens.push_back(std::move(utf8));
      current.remove();
    }
  };
  for (int32_t i = 0; i < u.length();) {
    const UChar32 cp = u.char32At(i);
    if (u_isUWhiteSpace(cp)) {
      flush();
    } else {
      current.append(cp);
    }
    i = u.moveIndex32(i, 1);
  }
  flush();
  return tokens;
}

inline TokenIds tokenize(std::string_view text, const TokenizerConfig& cfg, bool is_query) {
  const auto tokens = normalized_tokens(text, cfg.lowercase);
  const std::size_t limit = is_query ? cfg.max_query_tokens : cfg.max_doc_tokens;
  TokenIds ids;
  ids.reserve(std::min(tokens.size(), limit));
  for (const auto& t : tokens) {
    if (ids.size() >= limit) {
      break;
    }
    ids.push_back(static_cast<std::size_t>(fnv1a64(t) % cfg.hash_buckets));
  }
  return ids;
}

}  // namespace embkit
