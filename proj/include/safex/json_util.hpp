#pragma once

#include "safex/error.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <initializer_list>
#include <string>
#include <string_view>

namespace safex {

using json = nlohmann::json;

/// Strict view over a JSON object: typed field access that reports the full
/// field path on failure, plus a rejection of unknown keys.
class JsonReader {
public:
  JsonReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object", path_);
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }
  std::string at(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  const json& field(std::string_view key) const {
    auto it = j_.find(std::string(key));
    if (it == j_.end()) fail("missing required field", at(key));
    return *it;
  }

  double number(std::string_view key) const {
    const json& v = field(key);
    if (!v.is_number()) fail("expected a number", at(key));
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail("expected a finite number", at(key));
    return d;
  }

  double number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  long long integer(std::string_view key) const {
    const json& v = field(key);
    if (!v.is_number_integer()) fail("expected an integer", at(key));
    return v.get<long long>();
  }

  std::string string(std::string_view key) const {
    const json& v = field(key);
    if (!v.is_string()) fail("expected a string", at(key));
    return v.get<std::string>();
  }

  std::string string_or(std::string_view key, std::string fallback) const {
    return has(key) ? string(key) : fallback;
  }

  bool boolean(std::string_view key) const {
    const json& v = field(key);
    if (!v.is_boolean()) fail("expected a boolean", at(key));
    return v.get<bool>();
  }

  const json& array(std::string_view key) const {
    const json& v = field(key);
    if (!v.is_array()) fail("expected an array", at(key));
    return v;
  }

  JsonReader object(std::string_view key) const { return JsonReader(field(key), at(key)); }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (auto k : keys) known = known || it.key() == k;
      if (!known) fail("unknown field", at(it.key()));
    }
  }

  [[noreturn]] static void fail(const std::string& msg, const std::string& path,
                                ErrorCode code = ErrorCode::Validation) {
    throw Error(code, msg + (path.empty() ? "" : " at '" + path + "'"), path);
  }

private:
  const json& j_;
  std::string path_;
};

/// Lowercase hex SHA-256 of `data`.
inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace safex
