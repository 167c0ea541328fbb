#include "cme/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "cme/errors.hpp"
#include "cme/linalg.hpp"
#include "cme/selection.hpp"

namespace cme::io {

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.emplace_back(trim(cur));
  return cells;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool numbered_column(const std::string& name, char prefix) {
  return name.size() > 1 && name[0] == prefix &&
         std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

double cell_value(const CsvTable& t, std::size_t row, std::size_t col, const std::string& source) {
  const auto v = parse_double(t.rows[row][col]);
  if (!v)
    throw DataError(source + ": non-numeric value '" + t.rows[row][col] + "' at row " + std::to_string(row + 1) +
                    " (line " + std::to_string(row + 2) + "), column " + std::to_string(col + 1) + " (" +
                    t.header[col] + ")");
  return *v;
}

// Subject keys in order of first appearance, with their row indices.
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_rows(const CsvTable& t, std::size_t subject_col) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> where;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& key = t.rows[r][subject_col];
    auto [it, fresh] = where.emplace(key, groups.size());
    if (fresh) groups.push_back({key, {}});
    groups[it->second].second.push_back(r);
  }
  return groups;
}

}  // namespace

std::optional<double> parse_double(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return v;
}

std::optional<std::size_t> CsvTable::find(std::string_view column) const {
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::require(std::string_view column) const {
  const auto c = find(column);
  if (!c) throw DataError("missing column '" + std::string(column) + "'");
  return *c;
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  CsvTable t;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw DataError(source + ": empty file");
  return t;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_matrix_csv(const fs::path& path, const std::vector<std::string>& header, const MatrixXd& values) {
  if (static_cast<Index>(header.size()) != values.cols()) throw DataError("header/column count mismatch");
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
  out += '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out += ',';
      out += format_double(values(i, j));
    }
    out += '\n';
  }
  write_atomic(path, out);
}

MatrixXd read_matrix_csv(const fs::path& path, std::vector<std::string>* header) {
  const CsvTable t = read_csv(path);
  MatrixXd m(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = cell_value(t, r, c, path.string());
  if (header) *header = t.header;
  return m;
}

DataSet table_to_dataset(const CsvTable& t, const LongSchema& schema, const std::string& source) {
  if (t.rows.empty()) throw DataError(source + ": no data rows");
  std::size_t subject_col = 0;
  std::optional<std::size_t> y_col;
  try {
    subject_col = t.require(schema.subject);
    if (schema.require_response)
      y_col = t.require(schema.y);
    else
      y_col = t.find(schema.y);
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }

  auto resolve = [&](const std::vector<std::string>& names, char prefix) {
    std::vector<std::size_t> cols;
    if (names.empty()) {
      for (std::size_t c = 0; c < t.header.size(); ++c)
        if (numbered_column(t.header[c], prefix)) cols.push_back(c);
      std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
        return std::stol(t.header[a].substr(1)) < std::stol(t.header[b].substr(1));
      });
    } else {
      for (const auto& n : names) {
        const auto c = t.find(n);
        if (!c) throw DataError(source + ": missing column '" + n + "'");
        cols.push_back(*c);
      }
    }
    if (cols.empty()) throw DataError(source + ": no '" + std::string(1, prefix) + "' covariate columns");
    return cols;
  };
  const auto xc = resolve(schema.x_columns, 'x');
  const auto zc = resolve(schema.z_columns, 'z');

  DataSet d;
  d.p = static_cast<Index>(xc.size());
  d.q = static_cast<Index>(zc.size());
  for (const auto& [key, rows] : group_rows(t, subject_col)) {
    SubjectBlock b;
    b.id = key;
    const Index m = static_cast<Index>(rows.size());
    b.X.resize(m, d.p);
    b.Z.resize(m, d.q);
    b.y = VectorXd::Zero(m);
    for (Index j = 0; j < m; ++j) {
      const std::size_t r = rows[static_cast<std::size_t>(j)];
      if (y_col) b.y(j) = cell_value(t, r, *y_col, source);
      for (std::size_t c = 0; c < xc.size(); ++c) b.X(j, static_cast<Index>(c)) = cell_value(t, r, xc[c], source);
      for (std::size_t c = 0; c < zc.size(); ++c) b.Z(j, static_cast<Index>(c)) = cell_value(t, r, zc[c], source);
    }
    d.blocks.push_back(std::move(b));
  }
  validate_dataset(d, {.require_response = schema.require_response});
  return d;
}

DataSet load_csv_long(const fs::path& path, const LongSchema& schema) {
  return table_to_dataset(read_csv(path), schema, path.string());
}

std::string dataset_to_csv(const DataSet& d) {
  std::string out = "subject,obs,y";
  for (Index j = 0; j < d.p; ++j) out += ",x" + std::to_string(j + 1);
  for (Index j = 0; j < d.q; ++j) out += ",z" + std::to_string(j + 1);
  out += '\n';
  for (const auto& b : d.blocks) {
    for (Index r = 0; r < b.m(); ++r) {
      out += b.id + ',' + std::to_string(r + 1) + ',' + format_double(b.y(r));
      for (Index j = 0; j < d.p; ++j) out += ',' + format_double(b.X(r, j));
      for (Index j = 0; j < d.q; ++j) out += ',' + format_double(b.Z(r, j));
      out += '\n';
    }
  }
  return out;
}

void write_csv_long(const fs::path& path, const DataSet& d) { write_atomic(path, dataset_to_csv(d)); }

RiboflavinDesign build_riboflavin_design(const CsvTable& t, const RiboflavinSchema& schema, Index n_spline) {
  if (t.rows.empty()) throw DataError("riboflavin table has no rows");
  const std::size_t subject_col = t.require(schema.subject);
  const std::size_t time_col = t.require(schema.time);
  const std::optional<std::size_t> y_col = schema.require_response ? t.require(schema.y) : t.find(schema.y);

  std::vector<std::size_t> gene_cols;
  if (schema.genes.empty()) {
    for (std::size_t c = 0; c < t.header.size(); ++c)
      if (c != subject_col && c != time_col && (!y_col || c != *y_col)) gene_cols.push_back(c);
  } else {
    for (const auto& g : schema.genes) gene_cols.push_back(t.require(g));
  }
  if (gene_cols.size() < 100)
    throw DataError("riboflavin design needs at least 100 gene columns, found " + std::to_string(gene_cols.size()));

  const Index N = static_cast<Index>(t.rows.size());
  const Index G = static_cast<Index>(gene_cols.size());
  MatrixXd genes(N, G);
  VectorXd times(N), y = VectorXd::Zero(N);
  for (Index r = 0; r < N; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    for (Index g = 0; g < G; ++g) genes(r, g) = cell_value(t, ur, gene_cols[static_cast<std::size_t>(g)], "riboflavin");
    times(r) = cell_value(t, ur, time_col, "riboflavin");
    if (y_col) y(r) = cell_value(t, ur, *y_col, "riboflavin");
  }
  if (N < 2) throw DataError("riboflavin design needs at least two rows to standardise");
  for (Index g = 0; g < G; ++g) {
    auto col = genes.col(g);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(N - 1));
    if (!(sd > 0)) throw DataError("gene column '" + t.header[gene_cols[static_cast<std::size_t>(g)]] + "' is constant");
    col /= sd;
  }

  RiboflavinDesign out;
  out.time_lo = times.minCoeff();
  out.time_hi = times.maxCoeff();
  const MatrixXd spline = bspline_basis(times, out.time_lo, out.time_hi, n_spline);

  out.columns.push_back("intercept");
  for (auto c : gene_cols) out.columns.push_back(t.header[c]);
  for (Index k = 0; k < n_spline; ++k) out.columns.push_back("spline" + std::to_string(k + 1));

  const Index p = 1 + G + n_spline;
  out.data.p = p;
  out.data.q = p;
  for (const auto& [key, rows] : group_rows(t, subject_col)) {
    SubjectBlock b;
    b.id = key;
    const Index m = static_cast<Index>(rows.size());
    b.X.resize(m, p);
    b.y.resize(m);
    for (Index j = 0; j < m; ++j) {
      const auto r = static_cast<Index>(rows[static_cast<std::size_t>(j)]);
      b.X(j, 0) = 1.0;
      b.X.row(j).segment(1, G) = genes.row(r);
      b.X.row(j).tail(n_spline) = spline.row(r);
      b.y(j) = y(r);
    }
    b.Z = b.X;
    out.data.blocks.push_back(std::move(b));
  }
  validate_dataset(out.data, {.require_response = schema.require_response});
  return out;
}

std::pair<DataSet, DataSet> split_train_test(const DataSet& d, Index n_train, std::uint64_t seed) {
  if (n_train < 1 || n_train >= d.n())
    throw ConfigError("split needs 1 <= n_train < n (n_train = " + std::to_string(n_train) +
                      ", n = " + std::to_string(d.n()) + ")");
  std::vector<Index> idx(static_cast<std::size_t>(d.n()));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  // Fisher-Yates with our own draws so the split does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = idx.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform(0.0, 1.0) * static_cast<double>(i + 1));
    std::swap(idx[i], idx[std::min(j, i)]);
  }
  std::sort(idx.begin(), idx.begin() + n_train);
  std::sort(idx.begin() + n_train, idx.end());
  DataSet train, test;
  train.p = test.p = d.p;
  train.q = test.q = d.q;
  for (Index k = 0; k < d.n(); ++k)
    (k < n_train ? train : test).blocks.push_back(d.blocks[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])]);
  return {train, test};
}

// ---- config ----

namespace {

Index to_index(const std::string& v, const std::string& where) {
  Index out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(where + ": expected a seed, got '" + v + "'");
  return out;
}

double to_double(const std::string& v, const std::string& where) {
  const auto d = parse_double(v);
  if (!d) throw ConfigError(where + ": expected a number, got '" + v + "'");
  return *d;
}

bool to_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

std::string unquote(std::string_view v) {
  v = trim(v);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return std::string(v);
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "fit" && section != "prior" && section != "scenario" && section != "geweke")
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key(trim(line.substr(0, eq)));
    const std::string val = unquote(line.substr(eq + 1));
    const std::string full = section + "." + key;
    if (!seen.insert(full).second) throw ConfigError(where + ": duplicate key " + full);
    const std::string at = where + " (" + full + ")";

    bool known = true;
    if (section == "fit") {
      if (key == "k1") cfg.fit.k1 = to_index(val, at);
      else if (key == "k2") cfg.fit.k2 = to_index(val, at);
      else if (key == "iterations") cfg.fit.iterations = to_index(val, at);
      else if (key == "burn_in") cfg.fit.burn_in = to_index(val, at);
      else if (key == "thin") cfg.fit.thin = to_index(val, at);
      else if (key == "seed") cfg.fit.seed = to_u64(val, at);
      else if (key == "s2m_tol") cfg.fit.s2m_tol = to_double(val, at);
      else known = false;
    } else if (section == "prior") {
      if (key == "a0") cfg.fit.prior.a0 = to_double(val, at);
      else if (key == "b0") cfg.fit.prior.b0 = to_double(val, at);
      else if (key == "sigma2_gamma") cfg.fit.prior.sigma2_gamma = to_double(val, at);
      else known = false;
    } else if (section == "scenario") {
      auto& s = cfg.scenario;
      if (key == "p") s.p = to_index(val, at);
      else if (key == "q") s.q = to_index(val, at);
      else if (key == "n") s.n = to_index(val, at);
      else if (key == "m") s.m = to_index(val, at);
      else if (key == "sigma") s.sigma = parse_sigma_structure(val);
      else if (key == "x_design") s.x_design = parse_x_design(val);
      else if (key == "replications") s.replications = to_index(val, at);
      else if (key == "test_subjects") s.test_subjects = to_index(val, at);
      else if (key == "tau0_sq") s.tau0_sq = to_double(val, at);
      else if (key == "with_oracle") s.with_oracle = to_bool(val, at);
      else known = false;
    } else {
      auto& g = cfg.geweke;
      if (key == "n") g.n = to_index(val, at);
      else if (key == "m") g.m = to_index(val, at);
      else if (key == "p") g.p = to_index(val, at);
      else if (key == "q") g.q = to_index(val, at);
      else if (key == "k1") g.k1 = to_index(val, at);
      else if (key == "k2") g.k2 = to_index(val, at);
      else if (key == "samples") g.samples = to_index(val, at);
      else if (key == "burn_in") g.burn_in = to_index(val, at);
      else if (key == "batches") g.batches = to_index(val, at);
      else if (key == "seed") g.seed = to_u64(val, at);
      else if (key == "a0") g.prior.a0 = to_double(val, at);
      else if (key == "b0") g.prior.b0 = to_double(val, at);
      else if (key == "sigma2_gamma") g.prior.sigma2_gamma = to_double(val, at);
      else known = false;
    }
    if (!known) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    cfg.echo.emplace_back(full, val);
  }
  sync_scenario(cfg);
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

void sync_scenario(RunConfig& cfg) {
  auto& s = cfg.scenario;
  s.k1 = cfg.fit.k1;
  s.k2 = cfg.fit.k2;
  s.iterations = cfg.fit.iterations;
  s.burn_in = cfg.fit.burn_in;
  s.thin = cfg.fit.thin;
  s.seed = cfg.fit.seed;
  s.prior = cfg.fit.prior;
  s.s2m_tol = cfg.fit.s2m_tol;
}

// ---- draws ----

namespace {

std::vector<std::string> numbered(const std::string& prefix, Index n) {
  std::vector<std::string> h;
  for (Index j = 0; j < n; ++j) h.push_back(prefix + std::to_string(j + 1));
  return h;
}

}  // namespace

void write_draws(const fs::path& dir, const PosteriorDraws& draws) {
  write_matrix_csv(dir / "beta_draws.csv", numbered("beta_", draws.beta.cols()), draws.beta);
  write_matrix_csv(dir / "tau2_draws.csv", {"tau2"}, draws.tau2);
  write_matrix_csv(dir / "gamma_draws.csv", numbered("gamma_", draws.gamma.cols()), draws.gamma);
}

PosteriorDraws read_draws(const fs::path& dir) {
  PosteriorDraws d;
  d.beta = read_matrix_csv(dir / "beta_draws.csv");
  const MatrixXd tau2 = read_matrix_csv(dir / "tau2_draws.csv");
  if (tau2.cols() != 1) throw DataError("tau2_draws.csv must have one column");
  d.tau2 = tau2.col(0);
  const fs::path g = dir / "gamma_draws.csv";
  d.gamma = fs::exists(g) ? read_matrix_csv(g) : MatrixXd(d.beta.rows(), 0);
  if (d.tau2.size() != d.beta.rows() || d.gamma.rows() != d.beta.rows())
    throw DataError("draw files in " + dir.string() + " have different row counts");
  return d;
}

std::string summary_csv(const MatrixXd& draws, const std::string& prefix) {
  const IntervalSet ci = credible_intervals(draws);
  const VectorXd med = column_medians(draws);
  std::string out = "coefficient,mean,median,q2.5,q97.5\n";
  for (Index j = 0; j < draws.cols(); ++j)
    out += prefix + std::to_string(j + 1) + ',' + format_double(draws.col(j).mean()) + ',' + format_double(med(j)) +
           ',' + format_double(ci.lower(j)) + ',' + format_double(ci.upper(j)) + '\n';
  return out;
}

// ---- metrics ----

namespace {

const char* const kMethodFields[] = {"tpr",        "fpr",         "signal_coverage", "zero_coverage",
                                     "signal_width", "zero_width", "mspe",            "pred_coverage",
                                     "pred_width", "risk",        "selected"};

std::vector<double> method_values(const MethodMetrics& m) {
  return {m.tpr,  m.fpr,           m.signal_coverage, m.zero_coverage, m.signal_width,
          m.zero_width, m.mspe, m.pred_coverage, m.pred_width, m.risk, static_cast<double>(m.selected)};
}

MethodMetrics method_from(const std::vector<double>& v) {
  MethodMetrics m;
  m.tpr = v[0];
  m.fpr = v[1];
  m.signal_coverage = v[2];
  m.zero_coverage = v[3];
  m.signal_width = v[4];
  m.zero_width = v[5];
  m.mspe = v[6];
  m.pred_coverage = v[7];
  m.pred_width = v[8];
  m.risk = v[9];
  m.selected = static_cast<Index>(v[10]);
  return m;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

}  // namespace

std::vector<std::string> metrics_header() {
  std::vector<std::string> h = {"sigma", "x_design", "m", "k1", "k2", "replication", "seed", "status"};
  for (const char* prefix : {"cme_", "oracle_"})
    for (const char* f : kMethodFields) h.push_back(std::string(prefix) + f);
  h.push_back("rel_mspe");
  h.push_back("rel_pred_width");
  return h;
}

std::string metrics_row(const ReplicationMetrics& r) {
  std::string out = std::string(to_string(r.sigma)) + ',' + std::string(to_string(r.x_design)) + ',' +
                    std::to_string(r.m) + ',' + std::to_string(r.k1) + ',' + std::to_string(r.k2) + ',' +
                    std::to_string(r.replication) + ',' + std::to_string(r.seed) + ',' + csv_escape(r.status);
  for (double v : method_values(r.cme)) out += ',' + format_double(v);
  if (r.oracle) {
    for (double v : method_values(*r.oracle)) out += ',' + format_double(v);
  } else {
    for (std::size_t k = 0; k < std::size(kMethodFields); ++k) out += ",NA";
  }
  out += ',' + (r.rel_mspe ? format_double(*r.rel_mspe) : std::string("NA"));
  out += ',' + (r.rel_pred_width ? format_double(*r.rel_pred_width) : std::string("NA"));
  return out;
}

std::string metrics_csv(const std::vector<ReplicationMetrics>& rows) {
  std::string out;
  const auto h = metrics_header();
  for (std::size_t j = 0; j < h.size(); ++j) out += (j ? "," : "") + h[j];
  out += '\n';
  for (const auto& r : rows) out += metrics_row(r) + '\n';
  return out;
}

std::vector<ReplicationMetrics> read_metrics_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto h = metrics_header();
  for (const auto& name : h) t.require(name);
  const std::string src = path.string();
  auto num = [&](std::size_t r, const std::string& col) {
    const std::string& cell = t.rows[r][t.require(col)];
    if (cell == "NA") return std::nan("");
    return cell_value(t, r, t.require(col), src);
  };
  std::vector<ReplicationMetrics> rows;
  const std::size_t nf = std::size(kMethodFields);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ReplicationMetrics m;
    m.sigma = parse_sigma_structure(t.rows[r][t.require("sigma")]);
    m.x_design = parse_x_design(t.rows[r][t.require("x_design")]);
    m.m = static_cast<Index>(num(r, "m"));
    m.k1 = static_cast<Index>(num(r, "k1"));
    m.k2 = static_cast<Index>(num(r, "k2"));
    m.replication = static_cast<Index>(num(r, "replication"));
    m.seed = to_u64(t.rows[r][t.require("seed")], src);
    m.status = t.rows[r][t.require("status")];
    std::vector<double> cme(nf), oracle(nf);
    for (std::size_t k = 0; k < nf; ++k) {
      cme[k] = num(r, std::string("cme_") + kMethodFields[k]);
      oracle[k] = num(r, std::string("oracle_") + kMethodFields[k]);
    }
    m.cme = method_from(cme);
    if (!std::isnan(oracle[6])) m.oracle = method_from(oracle);
    if (const double v = num(r, "rel_mspe"); !std::isnan(v)) m.rel_mspe = v;
    if (const double v = num(r, "rel_pred_width"); !std::isnan(v)) m.rel_pred_width = v;
    rows.push_back(std::move(m));
  }
  return rows;
}

// ---- report tables ----

namespace {

std::string two_dp(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Cell {
  double a = 0, b = 0;
  Index na = 0, nb = 0;
  void add(double x, double y) {
    if (!std::isnan(x)) {
      a += x;
      ++na;
    }
    if (!std::isnan(y)) {
      b += y;
      ++nb;
    }
  }
  std::string text() const {
    return two_dp(na ? a / static_cast<double>(na) : std::nan("")) + " (" +
           two_dp(nb ? b / static_cast<double>(nb) : std::nan("")) + ")";
  }
};

// (sigma, row label) -> (k2, m) -> cell
using Grid = std::map<std::pair<int, std::string>, std::map<std::pair<Index, Index>, Cell>>;

std::string render(const Grid& grid, const std::set<std::pair<Index, Index>>& cols, const std::string& lead) {
  std::string out = "sigma," + lead;
  for (const auto& [k2, m] : cols) out += ",k2=" + std::to_string(k2) + " m=" + std::to_string(m);
  out += '\n';
  for (const auto& [key, cells] : grid) {
    out += std::string(to_string(static_cast<SigmaStructure>(key.first))) + ',' + key.second;
    for (const auto& c : cols) {
      const auto it = cells.find(c);
      out += ',' + (it == cells.end() ? std::string() : it->second.text());
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string table1_csv(const std::vector<ReplicationMetrics>& rows) {
  Grid grid;
  std::set<std::pair<Index, Index>> cols;
  for (const auto& r : rows) {
    if (!r.ok()) continue;
    cols.insert({r.k2, r.m});
    grid[{static_cast<int>(r.sigma), "CME," + std::to_string(r.k1)}][{r.k2, r.m}].add(r.cme.tpr, r.cme.fpr);
    if (r.oracle) grid[{static_cast<int>(r.sigma), "OracleHS,"}][{r.k2, r.m}].add(r.oracle->tpr, r.oracle->fpr);
  }
  return render(grid, cols, "method,k1");
}

std::string table2_csv(const std::vector<ReplicationMetrics>& rows) {
  Grid grid;
  std::set<std::pair<Index, Index>> cols;
  for (const auto& r : rows) {
    if (!r.ok()) continue;
    cols.insert({r.k2, r.m});
    grid[{static_cast<int>(r.sigma), std::to_string(r.k1)}][{r.k2, r.m}].add(
        r.cme.pred_coverage, r.rel_pred_width.value_or(std::nan("")));
  }
  return render(grid, cols, "k1");
}

}  // namespace cme::io
