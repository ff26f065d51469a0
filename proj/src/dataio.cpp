#include "dkgcm/dataio.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace dkgcm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_double(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

/// Seconds between two timestamps of the form YYYY-MM-DD[T ]HH:MM:SS, or of
/// plain integers. Returns 0 when the format is not recognized.
long timestamp_delta_seconds(const std::string& a, const std::string& b) {
  auto parse = [](const std::string& s, std::time_t& t) {
    std::tm tm{};
    int y, mo, d, h, mi, se;
    if (std::sscanf(s.c_str(), "%d-%d-%d%*c%d:%d:%d", &y, &mo, &d, &h, &mi, &se) == 6) {
      tm.tm_year = y - 1900;
      tm.tm_mon = mo - 1;
      tm.tm_mday = d;
      tm.tm_hour = h;
      tm.tm_min = mi;
      tm.tm_sec = se;
      t = timegm(&tm);
      return true;
    }
    double num;
    if (parse_double(s, num)) {
      t = static_cast<std::time_t>(num);
      return true;
    }
    return false;
  };
  std::time_t ta, tb;
  if (!parse(a, ta) || !parse(b, tb)) return 0;
  return static_cast<long>(tb - ta);
}

void check_series_invariants(const TrafficSeries& s) {
  require(s.values.cols() == s.node_ids.size(),
          "series: node id count does not match column count");
  for (std::size_t i = 0; i < s.node_ids.size(); ++i)
    for (std::size_t j = i + 1; j < s.node_ids.size(); ++j)
      require(s.node_ids[i] != s.node_ids[j],
              "series: duplicate node id '" + s.node_ids[i] + "'");
  for (std::size_t r = 0; r < s.values.rows(); ++r)
    for (std::size_t c = 0; c < s.values.cols(); ++c)
      require(std::isfinite(s.values.at(r, c)),
              "series: non-finite value at row " + std::to_string(r + 1) +
                  ", node " + s.node_ids[c]);
}

TrafficSeries load_series_csv(const std::string& path, MissingPolicy missing) {
  std::ifstream is(path);
  require(is.good(), "cannot open series file " + path);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "series file is empty: " + path);
  std::vector<std::string> header = split_csv_line(line);
  require(header.size() >= 2 && trim(header[0]) == "timestamp",
          "series CSV: header must start with 'timestamp' followed by node ids");

  TrafficSeries series;
  for (std::size_t i = 1; i < header.size(); ++i)
    series.node_ids.push_back(trim(header[i]));
  const std::size_t n = series.node_ids.size();

  std::vector<double> flat;
  std::vector<std::string> timestamps;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    require(cells.size() == n + 1,
            "series CSV row " + std::to_string(lineno) + ": expected " +
                std::to_string(n + 1) + " cells, got " + std::to_string(cells.size()));
    timestamps.push_back(trim(cells[0]));
    for (std::size_t c = 0; c < n; ++c) {
      double v;
      const std::string cell = trim(cells[c + 1]);
      const bool is_missing = cell.empty() || cell == "nan" || cell == "NaN";
      if (is_missing || !parse_double(cell, v) || !std::isfinite(v)) {
        if (is_missing && missing == MissingPolicy::ForwardFill && !flat.empty() &&
            flat.size() >= n) {
          v = flat[flat.size() - n];  // previous row, same column
        } else {
          fail("series CSV: bad value at row " + std::to_string(lineno) +
               ", column " + std::to_string(c + 2) + " (node " + series.node_ids[c] +
               "): '" + cell + "'");
        }
      }
      flat.push_back(v);
    }
  }
  require(!timestamps.empty(), "series CSV has no data rows: " + path);
  series.values = Matrix(timestamps.size(), n, std::move(flat));
  series.start_timestamp = timestamps.front();
  if (timestamps.size() >= 2) {
    const long dt = timestamp_delta_seconds(timestamps[0], timestamps[1]);
    if (dt > 0) series.interval_seconds = dt;
  }
  check_series_invariants(series);
  return series;
}

TrafficSeries load_series_raw(const std::string& path, MissingPolicy missing) {
  std::ifstream meta(path + ".json");
  require(meta.good(), "cannot open sidecar " + path + ".json");
  nlohmann::json j = nlohmann::json::parse(meta);

  TrafficSeries series;
  const std::size_t t = j.at("T").get<std::size_t>();
  const std::size_t n = j.at("N").get<std::size_t>();
  series.node_ids = j.at("node_ids").get<std::vector<std::string>>();
  series.interval_seconds = j.at("interval_seconds").get<long>();
  series.start_timestamp = j.at("start_timestamp").get<std::string>();
  require(series.node_ids.size() == n, "raw series sidecar: node_ids length != N");

  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open series file " + path);
  std::vector<double> flat(t * n);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    require(!is.fail(), "raw series: file shorter than T*N float32 values");
    std::uint32_t bits = static_cast<std::uint32_t>(buf[0]) |
                         (static_cast<std::uint32_t>(buf[1]) << 8) |
                         (static_cast<std::uint32_t>(buf[2]) << 16) |
                         (static_cast<std::uint32_t>(buf[3]) << 24);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    if (!std::isfinite(v)) {
      if (missing == MissingPolicy::ForwardFill && i >= n &&
          std::isfinite(flat[i - n])) {
        flat[i] = flat[i - n];
        continue;
      }
      fail("raw series: non-finite value at row " + std::to_string(i / n + 1) +
           ", column " + std::to_string(i % n + 1));
    }
    flat[i] = static_cast<double>(v);
  }
  is.peek();
  require(is.eof(), "raw series: file longer than T*N float32 values");
  series.values = Matrix(t, n, std::move(flat));
  check_series_invariants(series);
  return series;
}

}  // namespace

SeriesFormat parse_series_format(const std::string& name) {
  if (name == "csv") return SeriesFormat::Csv;
  if (name == "raw-f32") return SeriesFormat::RawF32;
  fail("unknown series format '" + name + "' (expected csv or raw-f32)");
}

TrafficSeries load_series(const std::string& path, SeriesFormat format,
                          MissingPolicy missing) {
  return format == SeriesFormat::Csv ? load_series_csv(path, missing)
                                     : load_series_raw(path, missing);
}

void save_series_csv(const std::string& path, const TrafficSeries& series) {
  std::ofstream os(path);
  require(os.good(), "cannot write " + path);
  os << "timestamp";
  for (const auto& id : series.node_ids) os << "," << id;
  os << "\n";
  char buf[64];
  for (std::size_t r = 0; r < series.values.rows(); ++r) {
    // Synthetic timestamps: start index + interval multiples, kept numeric.
    os << (r == 0 && !series.start_timestamp.empty() ? series.start_timestamp
                                                     : std::to_string(r * series.interval_seconds));
    for (std::size_t c = 0; c < series.values.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", series.values.at(r, c));
      os << "," << buf;
    }
    os << "\n";
  }
  require(os.good(), "write failed for " + path);
}

void save_series_raw_f32(const std::string& path, const TrafficSeries& series) {
  {
    nlohmann::json j;
    j["T"] = series.values.rows();
    j["N"] = series.values.cols();
    j["node_ids"] = series.node_ids;
    j["interval_seconds"] = series.interval_seconds;
    j["start_timestamp"] = series.start_timestamp;
    std::ofstream meta(path + ".json");
    require(meta.good(), "cannot write sidecar " + path + ".json");
    meta << j.dump(2) << "\n";
  }
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot write " + path);
  for (double v : series.values.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    char buf[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                   static_cast<char>((bits >> 16) & 0xff),
                   static_cast<char>((bits >> 24) & 0xff)};
    os.write(buf, 4);
  }
  require(os.good(), "write failed for " + path);
}

AdjacencyMatrix load_adjacency(const std::string& path,
                               const std::vector<std::string>& node_ids) {
  std::ifstream is(path);
  require(is.good(), "cannot open adjacency file " + path);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "adjacency file is empty: " + path);
  std::vector<std::string> header = split_csv_line(line);
  require(header.size() == 3 && trim(header[0]) == "from" && trim(header[1]) == "to" &&
              trim(header[2]) == "weight",
          "adjacency CSV: header must be 'from,to,weight'");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < node_ids.size(); ++i) index[node_ids[i]] = i;

  AdjacencyMatrix adj;
  adj.node_ids = node_ids;
  adj.weights = Matrix(node_ids.size(), node_ids.size());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    require(cells.size() == 3,
            "adjacency CSV row " + std::to_string(lineno) + ": expected 3 cells");
    auto fit = index.find(trim(cells[0]));
    auto tit = index.find(trim(cells[1]));
    require(fit != index.end(), "adjacency row " + std::to_string(lineno) +
                                    ": unknown node '" + trim(cells[0]) + "'");
    require(tit != index.end(), "adjacency row " + std::to_string(lineno) +
                                    ": unknown node '" + trim(cells[1]) + "'");
    double w;
    require(parse_double(cells[2], w) && std::isfinite(w),
            "adjacency row " + std::to_string(lineno) + ": bad weight '" +
                trim(cells[2]) + "'");
    require(w >= 0.0, "adjacency row " + std::to_string(lineno) + ": negative weight");
    if (fit->second == tit->second) continue;  // keep the diagonal zero
    // Symmetric closure; duplicate edges keep the largest weight.
    const double cur = adj.weights.at(fit->second, tit->second);
    const double next = std::max(cur, w);
    adj.weights.at(fit->second, tit->second) = next;
    adj.weights.at(tit->second, fit->second) = next;
  }
  return adj;
}

void save_adjacency_csv(const std::string& path, const AdjacencyMatrix& adj) {
  std::ofstream os(path);
  require(os.good(), "cannot write " + path);
  os << "from,to,weight\n";
  char buf[64];
  for (std::size_t i = 0; i < adj.weights.rows(); ++i)
    for (std::size_t j = i + 1; j < adj.weights.cols(); ++j)
      if (adj.weights.at(i, j) > 0.0) {
        std::snprintf(buf, sizeof(buf), "%.9g", adj.weights.at(i, j));
        os << adj.node_ids[i] << "," << adj.node_ids[j] << "," << buf << "\n";
      }
  require(os.good(), "write failed for " + path);
}

NormStats zscore_fit(const TrafficSeries& train) {
  const std::size_t t = train.values.rows();
  const std::size_t n = train.values.cols();
  require(t > 0, "zscore_fit: empty series");
  NormStats stats;
  stats.mean.resize(n);
  stats.stddev.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += train.values.at(r, c);
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t r = 0; r < t; ++r) {
      const double d = train.values.at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(t);  // population variance
    stats.mean[c] = mean;
    stats.stddev[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return stats;
}

Matrix zscore_apply(const Matrix& values, const NormStats& stats) {
  require(values.cols() == stats.mean.size(),
          "zscore_apply: stats fitted for " + std::to_string(stats.mean.size()) +
              " nodes, data has " + std::to_string(values.cols()));
  Matrix out(values.rows(), values.cols());
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < values.cols(); ++c)
      out.at(r, c) = (values.at(r, c) - stats.mean[c]) / stats.stddev[c];
  return out;
}

Matrix zscore_invert(const Matrix& normalized, const NormStats& stats) {
  require(normalized.cols() == stats.mean.size(),
          "zscore_invert: stats fitted for " + std::to_string(stats.mean.size()) +
              " nodes, data has " + std::to_string(normalized.cols()));
  Matrix out(normalized.rows(), normalized.cols());
  for (std::size_t r = 0; r < normalized.rows(); ++r)
    for (std::size_t c = 0; c < normalized.cols(); ++c)
      out.at(r, c) = normalized.at(r, c) * stats.stddev[c] + stats.mean[c];
  return out;
}

SplitSeries split_chronological(const TrafficSeries& series, double train_ratio,
                                double val_ratio, double test_ratio) {
  require(std::abs(train_ratio + val_ratio + test_ratio - 1.0) < 1e-9,
          "split ratios must sum to 1");
  require(train_ratio > 0 && val_ratio >= 0 && test_ratio >= 0,
          "split ratios must be non-negative with positive train share");
  const std::size_t t = series.values.rows();
  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(train_ratio * static_cast<double>(t)));
  const std::size_t n_val = static_cast<std::size_t>(
      std::floor(val_ratio * static_cast<double>(t)));
  require(n_train >= 1 && n_train + n_val <= t, "series too short to split");
  auto cut = [&](std::size_t r0, std::size_t r1, std::size_t offset) {
    TrafficSeries part;
    part.values = series.values.rows_slice(r0, r1);
    part.node_ids = series.node_ids;
    part.interval_seconds = series.interval_seconds;
    // Keep only the origin timestamp of the full series on the first cut;
    // downstream consumers track offsets via origin indices.
    part.start_timestamp = offset == 0 ? series.start_timestamp : "";
    return part;
  };
  SplitSeries out;
  out.train = cut(0, n_train, 0);
  out.val = cut(n_train, n_train + n_val, n_train);
  out.test = cut(n_train + n_val, t, n_train + n_val);
  return out;
}

SampleSet make_windows(const Matrix& partition, std::size_t seq_len,
                       std::size_t horizon) {
  require(seq_len >= 1 && horizon >= 1, "make_windows: H and F must be positive");
  require(partition.rows() >= seq_len + horizon,
          "make_windows: partition length " + std::to_string(partition.rows()) +
              " < H+F = " + std::to_string(seq_len + horizon));
  SampleSet set;
  set.seq_len = seq_len;
  set.horizon = horizon;
  const std::size_t count = partition.rows() - seq_len - horizon + 1;
  set.inputs.reserve(count);
  set.targets.reserve(count);
  for (std::size_t o = 0; o < count; ++o) {
    set.inputs.push_back(partition.rows_slice(o, o + seq_len));
    set.targets.push_back(partition.rows_slice(o + seq_len, o + seq_len + horizon));
    set.origin_indices.push_back(o);
  }
  return set;
}

}  // namespace dkgcm
