#include "semsr/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace semsr {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

SemanticTable::SemanticTable(Matrix values) : values_(std::move(values)) {
  require_finite("semantic_table", values_);
}

std::string SemanticTable::fingerprint() const {
  std::uint64_t h = fnv1a64(std::string_view("semb"));
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(values_.rows()), static_cast<std::uint64_t>(values_.cols())};
  h = fnv1a64(std::as_bytes(std::span(dims)), h);
  h = fnv1a64(std::as_bytes(std::span(values_.data(), static_cast<std::size_t>(values_.size()))), h);
  return hex64(h);
}

namespace {

constexpr char kMagic[5] = {'S', 'E', 'M', 'B', '1'};

SemanticTable load_binary(const std::string& path, const Catalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[5];
  std::uint64_t n = 0;
  std::uint64_t width = 0;
  in.read(magic, 5);
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&width), 8);
  if (!in || std::memcmp(magic, kMagic, 5) != 0) throw IoError("'" + path + "' is not a SEMB1 file");
  if (n != catalog.size()) {
    throw DataError("'" + path + "' holds " + std::to_string(n) + " rows but the catalog has " +
                    std::to_string(catalog.size()) + " items");
  }
  if (width == 0) throw DataError("'" + path + "' declares zero width");
  std::vector<float> raw(n * width);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) throw IoError("'" + path + "' is truncated");
  Matrix values(n, width);
  for (std::size_t i = 0; i < raw.size(); ++i) values.data()[i] = raw[i];
  return SemanticTable(std::move(values));
}

SemanticTable load_tsv(const std::string& path, const Catalog& catalog) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows(catalog.size());
  std::vector<char> seen(catalog.size(), 0);
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path, line_no, "expected '<item_id>\\t<floats>'");
    const std::string id = line.substr(0, tab);
    std::vector<double> values;
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw ParseError(path, line_no, "bad float");
      values.push_back(v);
      p = next;
      if (p < end) {
        if (*p != ',') throw ParseError(path, line_no, "expected ',' between floats");
        ++p;
      }
    }
    if (width == 0) width = values.size();
    if (values.size() != width || width == 0) {
      throw DataError(path + ":" + std::to_string(line_no) + ": width " + std::to_string(values.size()) +
                      " does not match " + std::to_string(width));
    }
    auto index = catalog.find(id);
    if (!index) continue;  // rows for filtered-out items are ignored
    rows[*index] = std::move(values);
    seen[*index] = 1;
  }
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (!seen[i]) missing.push_back(catalog.item(static_cast<ItemIndex>(i)).id);
  }
  if (!missing.empty()) {
    std::string msg = "'" + path + "' is missing " + std::to_string(missing.size()) + " catalog item(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(10, missing.size()); ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ...";
    throw DataError(msg);
  }
  Matrix values(catalog.size(), width);
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) values(i, j) = rows[i][j];
  }
  return SemanticTable(std::move(values));
}

}  // namespace

SemanticTable load_semantic_table(const std::string& path, const Catalog& catalog) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open '" + path + "'");
  char magic[5] = {};
  probe.read(magic, 5);
  if (probe.gcount() == 5 && std::memcmp(magic, kMagic, 5) == 0) return load_binary(path, catalog);
  return load_tsv(path, catalog);
}

void save_semantic_binary(const std::string& path, const SemanticTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::uint64_t n = table.rows();
  const std::uint64_t width = table.width();
  out.write(kMagic, 5);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&width), 8);
  std::vector<float> raw(table.values().data(), table.values().data() + table.values().size());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw IoError("short write to '" + path + "'");
}

void save_semantic_tsv(const std::string& path, const SemanticTable& table, const Catalog& catalog) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    out << catalog.item(static_cast<ItemIndex>(i)).id << '\t';
    for (std::size_t j = 0; j < table.width(); ++j) {
      if (j) out << ',';
      out << table.values()(i, j);
    }
    out << '\n';
  }
  write_file(path, out.str());
}

Vector encode_text(std::string_view text, std::size_t width) {
  if (width == 0) throw UsageError("encoder width must be at least 1");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(width));
  auto add_token = [&](std::string_view token) {
    std::mt19937_64 rng(fnv1a64(token, 0x5eed5eed5eed5eedULL));
    for (std::size_t j = 0; j < width; ++j) out[j] += standard_normal(rng);
  };
  std::string token;
  bool any = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else if (!token.empty()) {
      add_token(token);
      any = true;
      token.clear();
    }
  }
  if (!token.empty()) {
    add_token(token);
    any = true;
  }
  if (!any) add_token(text);
  if (l2_normalize(out) == 0.0) out[0] = 1.0;
  return out;
}

Vector pseudo_encode(const ItemMeta& item, std::size_t width) {
  return encode_text(metadata_text(item), width);
}

SemanticTable pseudo_encode_catalog(const Catalog& catalog, std::size_t width) {
  Matrix values(catalog.size(), width);
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    values.row(i) = pseudo_encode(catalog.item(static_cast<ItemIndex>(i)), width).transpose();
  }
  return SemanticTable(std::move(values));
}

Matrix Projection::apply(const Matrix& rows) const {
  return (rows.rowwise() - mean.transpose()) * basis;
}

Projection fit_projection(const SemanticTable& semantic, std::size_t d1) {
  const auto n = semantic.rows();
  const auto d2 = semantic.width();
  if (d1 == 0 || d1 > std::min(n, d2)) {
    throw UsageError("projection width " + std::to_string(d1) + " must be in [1, min(n, d2)] = [1, " +
                     std::to_string(std::min(n, d2)) + "]");
  }
  Projection proj;
  proj.mean = semantic.values().colwise().mean().transpose();
  const Eigen::MatrixXd centered = semantic.values().rowwise() - proj.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = std::max(1e-10, sv.size() ? sv[0] * 1e-9 : 0.0);

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d2), static_cast<Eigen::Index>(d1));
  std::size_t filled = 0;
  for (; filled < d1 && static_cast<Eigen::Index>(filled) < sv.size() && sv[filled] > tol; ++filled) {
    basis.col(filled) = svd.matrixV().col(filled);
  }
  if (filled < d1) {
    proj.warnings.push_back("semantic table has rank " + std::to_string(filled) + " < " + std::to_string(d1) +
                            "; completing the basis with orthonormal directions");
    // Gram-Schmidt over the standard basis.
    for (std::size_t e = 0; e < d2 && filled < d1; ++e) {
      Eigen::VectorXd v = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(d2), static_cast<Eigen::Index>(e));
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < filled; ++k) v -= basis.col(k).dot(v) * basis.col(k);
      }
      const double norm = v.norm();
      if (norm < 1e-6) continue;
      basis.col(filled++) = v / norm;
    }
  }
  for (std::size_t k = 0; k < d1; ++k) {
    Eigen::Index arg = 0;
    basis.col(k).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, k) < 0.0) basis.col(k) *= -1.0;
  }
  proj.basis = basis;
  return proj;
}

Matrix init_random_table(std::size_t n, std::size_t d1, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix table(n, d1);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = -0.1 + 0.2 * unit_uniform(rng);
  return table;
}

Matrix init_projected_table(const SemanticTable& semantic, const Projection& projection) {
  if (static_cast<std::size_t>(projection.basis.rows()) != semantic.width()) {
    throw UsageError("projection expects width " + std::to_string(projection.basis.rows()) +
                     " but the semantic table has width " + std::to_string(semantic.width()));
  }
  Matrix table = projection.apply(semantic.values());
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    const double norm = table.row(i).norm();
    if (norm > 1e-12) {
      table.row(i) /= norm;
    } else {
      // A row at the mean projects to zero; give it a fixed unit direction.
      table.row(i).setZero();
      table(i, 0) = 1.0;
    }
  }
  return table;
}

}  // namespace semsr
