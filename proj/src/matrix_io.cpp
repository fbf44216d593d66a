#include "mcinf/matrix_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <vector>

#include "mcinf/error.hpp"

namespace mcinf {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) return std::nullopt;
  return v;
}

bool is_missing_token(const std::string& s) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower.empty() || lower == "nan" || lower == "na";
}

bool is_triplet_header(const std::string& line) {
  std::string compact;
  for (char c : line)
    if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return compact == "i,j,value" || compact == "row,col,value";
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  std::ostringstream msg;
  msg << "line " << line_no << ": " << what;
  throw ConfigError(msg.str());
}

}  // namespace

MatrixData parse_dense_csv(std::istream& in) {
  std::vector<std::vector<std::optional<double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = split_fields(t);
    std::vector<std::optional<double>> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (const auto& f : fields) {
      if (is_missing_token(f)) {
        row.emplace_back(std::nullopt);
        continue;
      }
      auto v = parse_number(f);
      if (!v) {
        numeric = false;
        break;
      }
      if (!std::isfinite(*v)) fail_line(line_no, "non-finite value");
      row.emplace_back(v);
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      fail_line(line_no, "unparseable field");
    }
    if (!rows.empty() && row.size() != rows.front().size()) fail_line(line_no, "ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw ConfigError("dense CSV: no data rows");
  MatrixData out;
  const Index n1 = static_cast<Index>(rows.size());
  const Index n2 = static_cast<Index>(rows.front().size());
  out.values = Matrix::Zero(n1, n2);
  out.available = IndexSet{n1, n2, {}};
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) {
      const auto& v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (v) {
        out.values(i, j) = *v;
        out.available.indices.push_back({i, j});
      }
    }
  return out;
}

MatrixData parse_triplets(std::istream& in, std::optional<std::pair<Index, Index>> dims) {
  struct Triplet {
    Index2 ix;
    double value;
  };
  std::vector<Triplet> entries;
  std::string line;
  std::size_t line_no = 0;
  bool seen_data = false;
  Index max_row = -1;
  Index max_col = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = split_fields(t);
    if (!seen_data && (is_triplet_header(t) || fields.size() != 3 || !parse_number(fields[0]))) {
      if (is_triplet_header(t) || !parse_number(fields[0])) {
        seen_data = true;
        continue;
      }
    }
    seen_data = true;
    if (fields.size() != 3) fail_line(line_no, "expected i,j,value");
    const auto i = parse_number(fields[0]);
    const auto j = parse_number(fields[1]);
    const auto v = parse_number(fields[2]);
    if (!i || !j || !v) fail_line(line_no, "unparseable triplet");
    if (*i < 0 || *j < 0 || std::floor(*i) != *i || std::floor(*j) != *j) fail_line(line_no, "invalid index");
    if (!std::isfinite(*v)) fail_line(line_no, "non-finite value");
    Triplet tr{{static_cast<Index>(*i), static_cast<Index>(*j)}, *v};
    max_row = std::max(max_row, tr.ix.row);
    max_col = std::max(max_col, tr.ix.col);
    entries.push_back(tr);
  }
  if (entries.empty()) throw ConfigError("triplet file: no entries");
  const Index n1 = dims ? dims->first : max_row + 1;
  const Index n2 = dims ? dims->second : max_col + 1;
  if (max_row >= n1 || max_col >= n2) throw ConfigError("triplet file: index exceeds stated dimensions");
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) { return a.ix < b.ix; });
  MatrixData out;
  out.values = Matrix::Zero(n1, n2);
  out.available = IndexSet{n1, n2, {}};
  out.available.indices.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k > 0 && entries[k].ix == entries[k - 1].ix) {
      std::ostringstream msg;
      msg << "triplet file: duplicate entry (" << entries[k].ix.row << "," << entries[k].ix.col << ")";
      throw ConfigError(msg.str());
    }
    out.values(entries[k].ix.row, entries[k].ix.col) = entries[k].value;
    out.available.indices.push_back(entries[k].ix);
  }
  return out;
}

MatrixData read_matrix_file(const std::string& path, MatrixFormat format) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file: " + path);
  if (format == MatrixFormat::automatic) {
    const bool ext = path.size() >= 9 && path.compare(path.size() - 9, 9, ".triplets") == 0;
    std::string first;
    while (std::getline(in, first) && trim(first).empty()) {
    }
    format = (ext || is_triplet_header(first)) ? MatrixFormat::triplet : MatrixFormat::dense;
    in.clear();
    in.seekg(0);
  }
  return format == MatrixFormat::triplet ? parse_triplets(in) : parse_dense_csv(in);
}

void write_dense_csv(std::ostream& out, const Matrix& A) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      if (j) out << ',';
      out << A(i, j);
    }
    out << '\n';
  }
}

void write_triplets(std::ostream& out, const ObservationSet& obs) {
  out << "i,j,value\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto idx = obs.indices();
  const auto val = obs.values();
  for (std::size_t k = 0; k < idx.size(); ++k) out << idx[k].row << ',' << idx[k].col << ',' << val[k] << '\n';
}

}  // namespace mcinf
