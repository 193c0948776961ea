#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "monofix/oracle.hpp"

namespace monofix {

// The discrete domain [m]^d.
struct GridShape {
  int d = 1;
  int m = 1;

  std::size_t cells() const {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(m);
    return n;
  }

  bool contains(std::span<const int> idx) const {
    if (static_cast<int>(idx.size()) != d) return false;
    for (int v : idx)
      if (v < 1 || v > m) return false;
    return true;
  }

  // Row-major with coordinate 1 most significant; matches the CSV row order.
  std::size_t flat(std::span<const int> idx) const {
    std::size_t f = 0;
    for (int v : idx) f = f * static_cast<std::size_t>(m) + static_cast<std::size_t>(v - 1);
    return f;
  }

  GridIndex unflat(std::size_t f) const {
    GridIndex idx(static_cast<std::size_t>(d));
    for (int i = d - 1; i >= 0; --i) {
      idx[static_cast<std::size_t>(i)] = static_cast<int>(f % static_cast<std::size_t>(m)) + 1;
      f /= static_cast<std::size_t>(m);
    }
    return idx;
  }

  // Advances idx to the next grid point in row-major order; false after the last.
  bool next(GridIndex& idx) const {
    for (int i = d - 1; i >= 0; --i) {
      auto& v = idx[static_cast<std::size_t>(i)];
      if (v < m) {
        ++v;
        return true;
      }
      v = 1;
    }
    return false;
  }

  GridIndex first() const { return GridIndex(static_cast<std::size_t>(d), 1); }

  bool operator==(const GridShape&) const = default;
};

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense materialization of a function on [m]^d with values in [0,1].
class GridTable {
 public:
  GridTable() = default;
  GridTable(GridShape shape, double fill = 0.0)
      : shape_(shape), values_(shape.cells(), fill) {}
  GridTable(GridShape shape, std::vector<double> values)
      : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.cells()) {
      throw TableError("table has " + std::to_string(values_.size()) +
                       " values, grid " + std::to_string(shape_.m) + "^" +
                       std::to_string(shape_.d) + " needs " +
                       std::to_string(shape_.cells()));
    }
  }

  const GridShape& shape() const { return shape_; }
  int d() const { return shape_.d; }
  int m() const { return shape_.m; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::span<const int> idx) const { return values_[shape_.flat(idx)]; }
  double& operator[](std::span<const int> idx) { return values_[shape_.flat(idx)]; }
  double at(std::initializer_list<int> idx) const {
    return (*this)[std::span<const int>(idx.begin(), idx.size())];
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  // Throws unless every value is finite and in [0,1].
  void validate_range() const {
    for (std::size_t f = 0; f < values_.size(); ++f) {
      double v = values_[f];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw TableError("table value " + std::to_string(v) +
                         " outside [0,1] at cell " + std::to_string(f));
      }
    }
  }

  template <class Fn>
  static GridTable tabulate(GridShape shape, Fn&& fn) {
    GridTable t(shape);
    GridIndex idx = shape.first();
    std::size_t f = 0;
    do {
      t.values_[f++] = fn(std::span<const int>(idx));
    } while (shape.next(idx));
    return t;
  }

 private:
  GridShape shape_;
  std::vector<double> values_;
};

// Oracle reading a table by grid index.
inline GridOracle make_grid_oracle(GridTable table) {
  table.validate_range();
  auto shared = std::make_shared<const GridTable>(std::move(table));
  const auto d = static_cast<std::size_t>(shared->d());
  return GridOracle(d, [shared](std::span<const int> idx) {
    if (!shared->shape().contains(idx)) throw OracleError("grid index out of range");
    return (*shared)[idx];
  });
}

// CSV with header "i1,...,id,value" and one row per cell, indices 1-based.
// Row order is free; every cell must appear exactly once.
inline GridTable read_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TableError("empty CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      header.push_back(cell);
    }
  }
  if (header.size() < 2 || header.back() != "value") {
    throw TableError("CSV header must be i1,...,id,value");
  }
  const int d = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < d; ++i) {
    if (header[static_cast<std::size_t>(i)] != "i" + std::to_string(i + 1)) {
      throw TableError("CSV header column " + std::to_string(i + 1) + " must be i" +
                       std::to_string(i + 1));
    }
  }

  std::vector<std::pair<GridIndex, double>> rows;
  int m = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    GridIndex idx;
    double value = 0.0;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        if (col < d) {
          int v = std::stoi(cell, &used);
          if (v < 1) throw TableError("index must be >= 1");
          idx.push_back(v);
          m = std::max(m, v);
        } else {
          value = std::stod(cell, &used);
        }
      } catch (const TableError&) {
        throw TableError("CSV line " + std::to_string(lineno) + ": index must be >= 1");
      } catch (const std::exception&) {
        throw TableError("CSV line " + std::to_string(lineno) + ": cannot parse '" + cell + "'");
      }
      ++col;
    }
    if (col != d + 1) {
      throw TableError("CSV line " + std::to_string(lineno) + ": expected " +
                       std::to_string(d + 1) + " columns");
    }
    rows.emplace_back(std::move(idx), value);
  }
  if (rows.empty()) throw TableError("CSV has no data rows");

  GridShape shape{d, m};
  if (rows.size() != shape.cells()) {
    throw TableError("CSV has " + std::to_string(rows.size()) + " rows, grid " +
                     std::to_string(m) + "^" + std::to_string(d) + " needs " +
                     std::to_string(shape.cells()));
  }
  GridTable table(shape);
  std::vector<char> seen(shape.cells(), 0);
  for (auto& [idx, v] : rows) {
    auto f = shape.flat(idx);
    if (seen[f]) throw TableError("CSV repeats a cell");
    seen[f] = 1;
    table.values()[f] = v;
  }
  table.validate_range();
  return table;
}

inline GridTable read_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TableError("cannot open " + path);
  return read_table_csv(in);
}

inline void write_table_csv(std::ostream& out, const GridTable& table) {
  const auto& shape = table.shape();
  for (int i = 1; i <= shape.d; ++i) out << 'i' << i << ',';
  out << "value\n";
  GridIndex idx = shape.first();
  std::size_t f = 0;
  out.precision(17);
  do {
    for (int v : idx) out << v << ',';
    out << table.values()[f++] << '\n';
  } while (shape.next(idx));
}

}  // namespace monofix
