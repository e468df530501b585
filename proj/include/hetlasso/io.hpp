#pragma once

// On-disk formats.
//
// Instance container (binary, little-endian, extension-agnostic):
//   bytes 0-3   magic "HLPI"
//   u32         format version (currently 1)
//   u64         metadata length in bytes, then that many bytes of UTF-8 JSON
//   u64 m, u64 n
//   f64[m*n]    F, row-major
//   f64[m]      y
//   f64[n]      x0
//   f64[n]      v
//   u8          has_eta
//   if has_eta: u8 scheme kind (0 isotropic, 1 gram),
//               f64 sigma_eta_bar_sq, f64[n] variances, f64[n] eta
//
// CSV output is RFC 4180: header row, fields quoted when they contain a
// comma, quote, or newline, quotes doubled. Doubles are written with 17
// significant digits so records round-trip bit-exactly.

#include <Eigen/Core>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetlasso/types.hpp"

namespace hetlasso {

inline constexpr std::uint32_t kInstanceFormatVersion = 1;

namespace detail_io {

template <class T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("instance file: truncated read");
  return value;
}

inline void write_doubles(std::ostream& os, const double* data, std::size_t count) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

inline void read_doubles(std::istream& is, double* data, std::size_t count) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw std::runtime_error("instance file: truncated read");
}

}  // namespace detail_io

inline void write_instance(const std::string& path, const ProblemInstance& inst,
                           const NoiseRealization* eta = nullptr,
                           const nlohmann::json& extra_metadata = nlohmann::json::object()) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);

  nlohmann::json meta = extra_metadata;
  meta["seed"] = inst.seed;
  meta["sigma_xi"] = inst.sigma_xi;
  meta["writer"] = "hetlasso";
  const std::string meta_str = meta.dump();

  os.write("HLPI", 4);
  detail_io::write_pod(os, kInstanceFormatVersion);
  detail_io::write_pod(os, static_cast<std::uint64_t>(meta_str.size()));
  os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  detail_io::write_pod(os, static_cast<std::uint64_t>(inst.m()));
  detail_io::write_pod(os, static_cast<std::uint64_t>(inst.n()));

  // Row-major F for sequential reading.
  for (Eigen::Index i = 0; i < inst.m(); ++i)
    for (Eigen::Index j = 0; j < inst.n(); ++j) detail_io::write_pod(os, inst.F(i, j));
  detail_io::write_doubles(os, inst.y.data(), static_cast<std::size_t>(inst.y.size()));
  detail_io::write_doubles(os, inst.x0.data(), static_cast<std::size_t>(inst.x0.size()));
  detail_io::write_doubles(os, inst.v.data(), static_cast<std::size_t>(inst.v.size()));

  const std::uint8_t has_eta = eta != nullptr ? 1 : 0;
  detail_io::write_pod(os, has_eta);
  if (eta != nullptr) {
    detail_io::write_pod(os, static_cast<std::uint8_t>(eta->scheme.kind == PerturbationKind::kGramBased));
    detail_io::write_pod(os, eta->scheme.sigma_eta_bar_sq);
    detail_io::write_doubles(os, eta->variances.data(), static_cast<std::size_t>(eta->variances.size()));
    detail_io::write_doubles(os, eta->eta.data(), static_cast<std::size_t>(eta->eta.size()));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

struct LoadedInstance {
  ProblemInstance instance;
  std::optional<NoiseRealization> eta;
  nlohmann::json metadata;
};

inline LoadedInstance read_instance(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HLPI", 4) != 0)
    throw std::runtime_error("not an instance file (bad magic): " + path);
  const auto version = detail_io::read_pod<std::uint32_t>(is);
  if (version != kInstanceFormatVersion)
    throw std::runtime_error("unsupported instance format version " + std::to_string(version));

  const auto meta_len = detail_io::read_pod<std::uint64_t>(is);
  std::string meta_str(meta_len, '\0');
  is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw std::runtime_error("instance file: truncated metadata");

  LoadedInstance out;
  out.metadata = nlohmann::json::parse(meta_str);
  const auto m = static_cast<Eigen::Index>(detail_io::read_pod<std::uint64_t>(is));
  const auto n = static_cast<Eigen::Index>(detail_io::read_pod<std::uint64_t>(is));
  if (m < 1 || n < 1 || m > (1 << 24) || n > (1 << 24))
    throw std::runtime_error("instance file: implausible dimensions");

  ProblemInstance& inst = out.instance;
  inst.F.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) inst.F(i, j) = detail_io::read_pod<double>(is);
  inst.y.resize(m);
  inst.x0.resize(n);
  inst.v.resize(n);
  detail_io::read_doubles(is, inst.y.data(), static_cast<std::size_t>(m));
  detail_io::read_doubles(is, inst.x0.data(), static_cast<std::size_t>(n));
  detail_io::read_doubles(is, inst.v.data(), static_cast<std::size_t>(n));
  inst.sigma_xi = out.metadata.value("sigma_xi", 0.0);
  inst.seed = out.metadata.value("seed", std::uint64_t{0});
  inst.check();

  const auto has_eta = detail_io::read_pod<std::uint8_t>(is);
  if (has_eta != 0) {
    NoiseRealization eta;
    const auto kind = detail_io::read_pod<std::uint8_t>(is);
    const auto s2 = detail_io::read_pod<double>(is);
    eta.scheme = PerturbationScheme{kind != 0 ? PerturbationKind::kGramBased : PerturbationKind::kIsotropic, s2};
    eta.variances.resize(n);
    eta.eta.resize(n);
    detail_io::read_doubles(is, eta.variances.data(), static_cast<std::size_t>(n));
    detail_io::read_doubles(is, eta.eta.data(), static_cast<std::size_t>(n));
    eta.check();
    out.eta = std::move(eta);
  }
  return out;
}

// 17 significant digits: enough for bit-exact double round-trips.
inline std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string csv_escape(const std::string& field) {
  const bool needs_quoting = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quoting) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : os_(path, std::ios::binary) {
    if (!os_) throw std::runtime_error("cannot open for writing: " + path);
  }

  void write_row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) os_ << ',';
      os_ << csv_escape(fields[i]);
    }
    os_ << "\r\n";
    if (!os_) throw std::runtime_error("csv write failed");
  }

 private:
  std::ofstream os_;
};

}  // namespace hetlasso
