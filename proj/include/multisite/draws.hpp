#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "multisite/csv.hpp"
#include "multisite/errors.hpp"

namespace mst {

enum class ModelKind { Gaussian, DpDiffuse, DpInform };

inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::Gaussian: return "gaussian";
    case ModelKind::DpDiffuse: return "dp-diffuse";
    case ModelKind::DpInform: return "dp-inform";
  }
  return "?";
}

inline ModelKind parse_model(const std::string& s) {
  if (s == "gaussian") return ModelKind::Gaussian;
  if (s == "dp-diffuse") return ModelKind::DpDiffuse;
  if (s == "dp-inform") return ModelKind::DpInform;
  throw InputError("unknown model: " + s);
}

// Joint posterior draws of the site effects plus per-iteration
// hyperparameter trails. DP fits also carry the concentration and the
// occupied-cluster count; Gaussian fits leave those empty.
struct DrawMatrix {
  ModelKind model = ModelKind::Gaussian;
  std::vector<std::string> site_ids;
  std::size_t num_draws = 0;
  std::vector<double> tau;          // num_draws x J, row-major
  std::vector<double> hyper_tau;    // grand mean trail
  std::vector<double> hyper_sigma;  // cross-site SD trail
  std::vector<double> alpha;        // DP only
  std::vector<int> k;               // DP only

  std::size_t num_sites() const { return site_ids.size(); }
  double at(std::size_t s, std::size_t j) const {
    return tau[s * site_ids.size() + j];
  }
  bool is_dp() const { return !alpha.empty(); }
};

// ---- binary draw file --------------------------------------------------
// 16-byte magic "MSTDRAWS0001\0\0\0\0", then little-endian:
//   u64 num_draws, u64 num_sites, u8 model_tag, u8 has_dp, 6 reserved bytes,
//   per site: u32 id length + id bytes,
//   doubles: tau (S*J), hyper_tau (S), hyper_sigma (S),
//   if has_dp: alpha (S) and k (S, as u32).

inline constexpr char kDrawsMagic[16] = {'M', 'S', 'T', 'D', 'R', 'A',
                                         'W', 'S', '0', '0', '0', '1',
                                         0,   0,   0,   0};

namespace detail {
template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("truncated draw file");
  return v;
}
inline void put_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}
inline void get_doubles(std::istream& in, std::vector<double>& v,
                        std::size_t n) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw InputError("truncated draw file");
}
}  // namespace detail

inline void write_draws_binary(std::ostream& out, const DrawMatrix& d) {
  out.write(kDrawsMagic, sizeof(kDrawsMagic));
  detail::put<std::uint64_t>(out, d.num_draws);
  detail::put<std::uint64_t>(out, d.num_sites());
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(d.model));
  detail::put<std::uint8_t>(out, d.is_dp() ? 1 : 0);
  for (int i = 0; i < 6; ++i) detail::put<std::uint8_t>(out, 0);
  for (const auto& id : d.site_ids) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  detail::put_doubles(out, d.tau);
  detail::put_doubles(out, d.hyper_tau);
  detail::put_doubles(out, d.hyper_sigma);
  if (d.is_dp()) {
    detail::put_doubles(out, d.alpha);
    for (int k : d.k) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(k));
  }
}

inline DrawMatrix read_draws_binary(std::istream& in) {
  char magic[16];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDrawsMagic, sizeof(magic)) != 0)
    throw InputError("not a draw file (bad magic)");
  DrawMatrix d;
  d.num_draws = detail::get<std::uint64_t>(in);
  auto j = detail::get<std::uint64_t>(in);
  d.model = static_cast<ModelKind>(detail::get<std::uint8_t>(in));
  bool has_dp = detail::get<std::uint8_t>(in) != 0;
  for (int i = 0; i < 6; ++i) detail::get<std::uint8_t>(in);
  d.site_ids.resize(j);
  for (auto& id : d.site_ids) {
    auto len = detail::get<std::uint32_t>(in);
    id.resize(len);
    in.read(id.data(), len);
    if (!in) throw InputError("truncated draw file");
  }
  detail::get_doubles(in, d.tau, d.num_draws * j);
  detail::get_doubles(in, d.hyper_tau, d.num_draws);
  detail::get_doubles(in, d.hyper_sigma, d.num_draws);
  if (has_dp) {
    detail::get_doubles(in, d.alpha, d.num_draws);
    d.k.resize(d.num_draws);
    for (auto& k : d.k) k = static_cast<int>(detail::get<std::uint32_t>(in));
  }
  return d;
}

// ---- CSV draw file -----------------------------------------------------
// Header: site ids, then "tau","sigma" and for DP fits "alpha","K".
// A leading "# model=<name>" comment carries the fit's model.

inline void write_draws_csv(std::ostream& out, const DrawMatrix& d) {
  csv::Writer w(out);
  w.comment(" model=" + to_string(d.model));
  std::string header;
  for (const auto& id : d.site_ids) header += id + ",";
  header += "tau,sigma";
  if (d.is_dp()) header += ",alpha,K";
  out << header << '\n';
  const std::size_t j = d.num_sites();
  for (std::size_t s = 0; s < d.num_draws; ++s) {
    for (std::size_t c = 0; c < j; ++c) out << csv::fmt(d.tau[s * j + c]) << ',';
    out << csv::fmt(d.hyper_tau[s]) << ',' << csv::fmt(d.hyper_sigma[s]);
    if (d.is_dp()) out << ',' << csv::fmt(d.alpha[s]) << ',' << d.k[s];
    out << '\n';
  }
}

inline DrawMatrix read_draws_csv(std::istream& in) {
  auto t = csv::read(in);
  DrawMatrix d;
  for (const auto& c : t.comments) {
    auto pos = c.find("model=");
    if (pos != std::string::npos) d.model = parse_model(c.substr(pos + 6));
  }
  bool has_dp = t.header.size() >= 4 && t.header.back() == "K" &&
                t.header[t.header.size() - 2] == "alpha";
  std::size_t j = t.header.size() - (has_dp ? 4 : 2);
  d.site_ids.assign(t.header.begin(), t.header.begin() + j);
  d.num_draws = t.rows.size();
  d.tau.reserve(d.num_draws * j);
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < j; ++c) d.tau.push_back(csv::to_double(r[c]));
    d.hyper_tau.push_back(csv::to_double(r[j]));
    d.hyper_sigma.push_back(csv::to_double(r[j + 1]));
    if (has_dp) {
      d.alpha.push_back(csv::to_double(r[j + 2]));
      d.k.push_back(static_cast<int>(csv::to_int(r[j + 3])));
    }
  }
  return d;
}

// Dispatch on filename: ".csv" -> text, anything else -> binary.
inline void write_draws_file(const std::string& path, const DrawMatrix& d) {
  bool is_csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
  std::ofstream out(path, is_csv ? std::ios::out
                                 : std::ios::out | std::ios::binary);
  if (!out) throw InputError("cannot write draw file: " + path);
  if (is_csv)
    write_draws_csv(out, d);
  else
    write_draws_binary(out, d);
}

inline DrawMatrix read_draws_file(const std::string& path) {
  bool is_csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
  std::ifstream in(path, is_csv ? std::ios::in : std::ios::in | std::ios::binary);
  if (!in) throw InputError("cannot open draw file: " + path);
  return is_csv ? read_draws_csv(in) : read_draws_binary(in);
}

}  // namespace mst
