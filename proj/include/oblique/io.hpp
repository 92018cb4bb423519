#pragma once

#include "oblique/leaf.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oblique {

/* Shortest 17-significant-digit form; round-trips doubles exactly. */
std::string format_full(double v);

/* Text form: a "rows cols" line, then one whitespace-separated row per line. */
void write_matrix_text(std::ostream& os, const Matrix& m);

/* Reads one matrix block; line_no is advanced past consumed lines and used in
 * ParseError messages (1-based). */
Matrix read_matrix_text(std::istream& is, int& line_no);

Matrix load_matrix(const std::string& path);
void save_matrix(const std::string& path, const Matrix& m);

/* A flat problem description:
 *   version v1
 *   kind geninv|perturb|leaf|rankchart|critcheck
 *   [params]          key/value lines
 *   [matrix NAME]     matrix block
 * '#' starts a comment; blank lines are ignored. */
struct ProblemFile {
  std::string version;
  std::string kind;
  std::map<std::string, std::string> params;
  std::vector<std::pair<std::string, Matrix>> matrices;  // file order

  bool has_param(const std::string& key) const;
  std::string param_str(const std::string& key, const std::string& fallback) const;
  double param_double(const std::string& key, double fallback) const;
  std::uint64_t param_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> param_list(const std::string& key) const;  // empty if absent

  const Matrix* find_matrix(const std::string& name) const;
  const Matrix& require_matrix(const std::string& name) const;
};

ProblemFile parse_problem_file(const std::string& path);

/* CSV with '#'-prefixed header lines carrying every LeafSample field, then one
 * row per node: grid coordinates, psi coordinates, the reconstructed ambient
 * point, and a per-node residual column supplied by the caller. */
void write_leaf_csv(std::ostream& os, const LeafSample& sample,
                    const std::vector<double>& residuals);

/* Inverse of write_leaf_csv up to the derived columns; the returned sample
 * reproduces the written one field-for-field. */
LeafSample read_leaf_csv(std::istream& is);

}  // namespace oblique
