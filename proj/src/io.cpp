#include "oblique/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace oblique {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_text(std::ostream& os, const Matrix& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << format_full(m(i, j));
    }
    os << '\n';
  }
}

namespace {

bool next_content_line(std::istream& is, std::string& line, int& line_no) {
  while (std::getline(is, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    std::size_t end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    return true;
  }
  return false;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, int line_no) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ParseError("expected a number, got '" + tok + "'", line_no);
  return v;
}

}  // namespace

Matrix read_matrix_text(std::istream& is, int& line_no) {
  std::string line;
  if (!next_content_line(is, line, line_no))
    throw ParseError("expected matrix dimensions", line_no);
  auto dims = split_ws(line);
  if (dims.size() != 2)
    throw ParseError("matrix dimension line must be 'rows cols'", line_no);
  long rows = std::strtol(dims[0].c_str(), nullptr, 10);
  long cols = std::strtol(dims[1].c_str(), nullptr, 10);
  if (rows < 1 || cols < 1)
    throw ParseError("matrix dimensions must be positive", line_no);

  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!next_content_line(is, line, line_no))
      throw ParseError("matrix row " + std::to_string(i + 1) + " missing", line_no);
    auto toks = split_ws(line);
    if (static_cast<long>(toks.size()) != cols)
      throw ParseError("matrix row has " + std::to_string(toks.size()) +
                           " entries, expected " + std::to_string(cols),
                       line_no);
    for (long j = 0; j < cols; ++j) m(i, j) = parse_double(toks[j], line_no);
  }
  return m;
}

Matrix load_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open matrix file: " + path);
  int line_no = 0;
  return read_matrix_text(is, line_no);
}

void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write matrix file: " + path);
  write_matrix_text(os, m);
}

bool ProblemFile::has_param(const std::string& key) const {
  return params.count(key) > 0;
}

std::string ProblemFile::param_str(const std::string& key,
                                   const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

double ProblemFile::param_double(const std::string& key, double fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  return parse_double(it->second, 0);
}

std::uint64_t ProblemFile::param_u64(const std::string& key,
                                     std::uint64_t fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  return std::strtoull(it->second.c_str(), nullptr, 10);
}

std::vector<double> ProblemFile::param_list(const std::string& key) const {
  std::vector<double> out;
  auto it = params.find(key);
  if (it == params.end()) return out;
  for (const std::string& tok : split_ws(it->second)) out.push_back(parse_double(tok, 0));
  return out;
}

const Matrix* ProblemFile::find_matrix(const std::string& name) const {
  for (const auto& [n, m] : matrices)
    if (n == name) return &m;
  return nullptr;
}

const Matrix& ProblemFile::require_matrix(const std::string& name) const {
  const Matrix* m = find_matrix(name);
  if (!m) throw InvalidInput("problem file is missing matrix [" + name + "]");
  return *m;
}

ProblemFile parse_problem_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open problem file: " + path);

  ProblemFile pf;
  int line_no = 0;
  std::string line;

  if (!next_content_line(is, line, line_no))
    throw ParseError("empty problem file", line_no);
  {
    auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != "version")
      throw ParseError("first directive must be 'version v1'", line_no);
    if (toks[1] != "v1")
      throw ParseError("unrecognized problem file version '" + toks[1] + "'", line_no);
    pf.version = toks[1];
  }

  if (!next_content_line(is, line, line_no))
    throw ParseError("missing 'kind' directive", line_no);
  {
    auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != "kind")
      throw ParseError("second directive must be 'kind <name>'", line_no);
    const std::string& k = toks[1];
    if (k != "geninv" && k != "perturb" && k != "leaf" && k != "rankchart" &&
        k != "critcheck")
      throw ParseError("unknown problem kind '" + k + "'", line_no);
    pf.kind = k;
  }

  bool in_params = false;
  while (next_content_line(is, line, line_no)) {
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("unterminated section header", line_no);
      std::string header = line.substr(1, line.size() - 2);
      auto toks = split_ws(header);
      if (toks.size() == 1 && toks[0] == "params") {
        in_params = true;
        continue;
      }
      if (toks.size() == 2 && toks[0] == "matrix") {
        if (pf.find_matrix(toks[1]))
          throw ParseError("duplicate matrix [" + toks[1] + "]", line_no);
        Matrix m = read_matrix_text(is, line_no);
        pf.matrices.emplace_back(toks[1], std::move(m));
        in_params = false;
        continue;
      }
      throw ParseError("unknown section header '[" + header + "]'", line_no);
    }
    if (!in_params)
      throw ParseError("content outside any section: '" + line + "'", line_no);
    std::size_t sp = line.find_first_of(" \t");
    if (sp == std::string::npos)
      throw ParseError("parameter line needs 'key value'", line_no);
    std::string key = line.substr(0, sp);
    std::string value = line.substr(line.find_first_not_of(" \t", sp));
    if (pf.params.count(key))
      throw ParseError("duplicate parameter '" + key + "'", line_no);
    pf.params[key] = value;
  }
  return pf;
}

void write_leaf_csv(std::ostream& os, const LeafSample& sample,
                    const std::vector<double>& residuals) {
  if (residuals.size() != sample.size())
    throw InvalidInput("write_leaf_csv: one residual per node required");
  const Index d = sample.m0.dim();
  const Index s = sample.e_star.dim();
  const Index n = sample.x0.size();

  os << "# leaf sample v1\n";
  os << "# step " << format_full(sample.step) << '\n';
  os << "# shape " << sample.shape.size();
  for (Index v : sample.shape) os << ' ' << v;
  os << '\n';
  os << "# jacobian_mode " << sample.jacobian_mode << '\n';
  os << "# mixed_path_residual " << format_full(sample.mixed_path_residual) << '\n';
  os << "# integrable " << (sample.integrable ? 1 : 0) << '\n';
  os << "# complete " << (sample.complete ? 1 : 0) << '\n';
  auto emit_vector = [&os](const char* name, const Vector& v) {
    os << "# " << name << ' ' << v.size();
    for (Index i = 0; i < v.size(); ++i) os << ' ' << format_full(v(i));
    os << '\n';
  };
  emit_vector("x0", sample.x0);
  os << "# m0 " << sample.m0.ambient << ' ' << d;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < sample.m0.ambient; ++i)
      os << ' ' << format_full(sample.m0.basis(i, j));
  os << '\n';
  os << "# e_star " << sample.e_star.ambient << ' ' << s;
  for (Index j = 0; j < s; ++j)
    for (Index i = 0; i < sample.e_star.ambient; ++i)
      os << ' ' << format_full(sample.e_star.basis(i, j));
  os << '\n';

  for (Index i = 0; i < d; ++i) os << "z_" << (i + 1) << ',';
  for (Index i = 0; i < s; ++i) os << "psi_" << (i + 1) << ',';
  for (Index i = 0; i < n; ++i) os << "x_" << (i + 1) << ',';
  os << "leaf_residual\n";

  for (std::size_t node = 0; node < sample.size(); ++node) {
    const Vector& z = sample.grid[node];
    const Vector& p = sample.psi[node];
    Vector x = sample.m0.basis * z + sample.e_star.basis * p;
    for (Index i = 0; i < d; ++i) os << format_full(z(i)) << ',';
    for (Index i = 0; i < s; ++i) os << format_full(p(i)) << ',';
    for (Index i = 0; i < n; ++i) os << format_full(x(i)) << ',';
    os << format_full(residuals[node]) << '\n';
  }
}

LeafSample read_leaf_csv(std::istream& is) {
  LeafSample sample;
  std::string line;
  int line_no = 0;
  Index d = -1, s = -1;

  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("leaf csv: " + msg, line_no);
  };

  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream iss(line.substr(1));
      std::string key;
      iss >> key;
      if (key == "leaf") continue;
      if (key == "step") iss >> sample.step;
      else if (key == "shape") {
        std::size_t rank;
        iss >> rank;
        sample.shape.resize(rank);
        for (std::size_t i = 0; i < rank; ++i) iss >> sample.shape[i];
      } else if (key == "jacobian_mode") {
        iss >> sample.jacobian_mode;
      } else if (key == "mixed_path_residual") {
        iss >> sample.mixed_path_residual;
      } else if (key == "integrable") {
        int v;
        iss >> v;
        sample.integrable = v != 0;
      } else if (key == "complete") {
        int v;
        iss >> v;
        sample.complete = v != 0;
      } else if (key == "x0") {
        Index n;
        iss >> n;
        sample.x0.resize(n);
        for (Index i = 0; i < n; ++i) iss >> sample.x0(i);
      } else if (key == "m0" || key == "e_star") {
        Index ambient, dim;
        iss >> ambient >> dim;
        Matrix basis(ambient, dim);
        for (Index j = 0; j < dim; ++j)
          for (Index i = 0; i < ambient; ++i) iss >> basis(i, j);
        SubspaceBasis& target = (key == "m0") ? sample.m0 : sample.e_star;
        target.ambient = ambient;
        target.basis = basis;
        if (key == "m0") d = dim;
        else s = dim;
      } else {
        throw fail("unknown header key '" + key + "'");
      }
      continue;
    }
    if (line.rfind("z_", 0) == 0) continue;  // column header

    if (d < 0 || s < 0) throw fail("data row before basis headers");
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      char* end = nullptr;
      fields.push_back(std::strtod(tok.c_str(), &end));
    }
    Index n = sample.x0.size();
    if (static_cast<Index>(fields.size()) != d + s + n + 1)
      throw fail("row has the wrong number of fields");
    Vector z(d), p(s);
    for (Index i = 0; i < d; ++i) z(i) = fields[static_cast<std::size_t>(i)];
    for (Index i = 0; i < s; ++i) p(i) = fields[static_cast<std::size_t>(d + i)];
    sample.grid.push_back(z);
    sample.psi.push_back(p);
  }

  if (sample.shape.empty()) throw fail("missing shape header");
  if (sample.grid.size() != sample.size()) throw fail("node count mismatch");
  return sample;
}

}  // namespace oblique
