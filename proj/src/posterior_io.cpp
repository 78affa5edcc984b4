#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "stlgm/csv.hpp"
#include "stlgm/error.hpp"
#include "stlgm/samplers.hpp"

namespace stlgm {
namespace {

constexpr char kWMagic[8] = {'S', 'T', 'L', 'G', 'M', 'W', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double x) {
  std::uint64_t v;
  std::memcpy(&v, &x, 8);
  put_u64(out, v);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated w-draw file");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t v = get_u64(in);
  double x;
  std::memcpy(&x, &v, 8);
  return x;
}

}  // namespace

void write_posterior_csv(std::ostream& out, const PosteriorSamples& samples) {
  std::vector<std::string> header{"iteration"};
  for (auto& name : samples.column_names()) header.push_back(name);
  header.emplace_back(samples.kind == ModelKind::normal ? "log_marginal" : "log_target");
  header.emplace_back("accepted");
  csv::write_record(out, header);
  for (std::size_t r = 0; r < samples.draws(); ++r) {
    std::vector<std::string> f{std::to_string(samples.iteration[r])};
    for (Eigen::Index c = 0; c < samples.params.cols(); ++c) {
      f.push_back(csv::format_double(samples.params(static_cast<Eigen::Index>(r), c)));
    }
    f.push_back(csv::format_double(samples.log_target[r]));
    f.push_back(std::to_string(samples.accepted[r]));
    csv::write_record(out, f);
  }
}

PosteriorSamples read_posterior_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("posterior file is empty");
  const auto header = csv::split_record(line);
  if (header.size() < 7 || header.front() != "iteration" || header[1] != "alpha") {
    throw IoError("posterior file has an unexpected header");
  }
  PosteriorSamples s;
  const bool normal = header[header.size() - 2] == "log_marginal";
  s.kind = normal ? ModelKind::normal : ModelKind::bernoulli;
  const std::size_t param_cols = header.size() - 3;
  const std::size_t theta_cols = param_cols - 1 - (normal ? 1 : 0);
  if (theta_cols % 3 != 0 || theta_cols == 0) throw IoError("posterior file has a malformed parameter block");
  s.components = theta_cols / 3;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_record(line);
    if (f.size() != header.size()) throw IoError("posterior file row has the wrong field count");
    std::vector<double> row(param_cols);
    double it = 0.0, lt = 0.0, acc = 0.0;
    bool ok = csv::parse_double(f[0], it) && csv::parse_double(f[header.size() - 2], lt) &&
              csv::parse_double(f.back(), acc);
    for (std::size_t c = 0; c < param_cols && ok; ++c) ok = csv::parse_double(f[c + 1], row[c]);
    if (!ok) throw IoError("posterior file has an unparsable number");
    s.iteration.push_back(static_cast<std::size_t>(it));
    s.log_target.push_back(lt);
    s.accepted.push_back(static_cast<int>(acc));
    rows.push_back(std::move(row));
  }
  s.params.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(param_cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < param_cols; ++c) {
      s.params(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return s;
}

void write_w_draws(std::ostream& out, const PosteriorSamples& samples) {
  out.write(kWMagic, 8);
  const std::size_t n = samples.coords.size();
  put_u64(out, n);
  put_u64(out, samples.w_rows.size());
  for (const auto& c : samples.coords) {
    put_f64(out, c.x);
    put_f64(out, c.y);
    put_f64(out, c.t);
  }
  for (std::size_t k = 0; k < samples.w_rows.size(); ++k) {
    put_u64(out, samples.w_rows[k]);
    for (std::size_t i = 0; i < n; ++i) {
      put_f64(out, samples.w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
    }
  }
}

void read_w_draws(std::istream& in, PosteriorSamples& samples) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kWMagic, 8) != 0) {
    throw IoError("not a w-draw file (bad magic)");
  }
  const auto n = get_u64(in);
  const auto rows = get_u64(in);
  samples.coords.resize(n);
  for (auto& c : samples.coords) {
    c.x = get_f64(in);
    c.y = get_f64(in);
    c.t = get_f64(in);
  }
  samples.w_rows.resize(rows);
  samples.w.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < rows; ++k) {
    samples.w_rows[k] = get_u64(in);
    if (samples.w_rows[k] >= samples.draws()) {
      throw IoError("w-draw file references a parameter row that is not in the posterior file");
    }
    for (std::size_t i = 0; i < n; ++i) {
      samples.w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = get_f64(in);
    }
  }
}

}  // namespace stlgm
