#include "mdsq/qbd_blocks.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mdsq {

std::optional<std::pair<int, int>> QbdBlocks::locate(const ChainState& s) const {
  int lvl = 0;
  ChainState key = s;
  if (s.m > boundary_top) {
    lvl = (s.m - boundary_top - 1) / level_width + 1;
    key.m -= (lvl - 1) * level_width;
  }
  const auto& pool = lvl == 0 ? boundary : level;
  auto it = std::lower_bound(pool.begin(), pool.end(), key);
  if (it == pool.end() || *it != key) return std::nullopt;
  return std::pair<int, int>{lvl, static_cast<int>(it - pool.begin())};
}

ChainState QbdBlocks::state_at(int level_index, int offset) const {
  if (level_index == 0) return boundary.at(offset);
  ChainState s = level.at(offset);
  s.m += (level_index - 1) * level_width;
  return s;
}

namespace {

void write_matrix(std::ostream& os, const Eigen::MatrixXd& a) {
  char buf[64];
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      auto res = std::to_chars(buf, buf + sizeof buf, a(i, j));
      if (j) os << ' ';
      os.write(buf, res.ptr - buf);
    }
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& is, int rows, int cols) {
  Eigen::MatrixXd a(rows, cols);
  std::string tok;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      if (!(is >> tok)) throw std::runtime_error("truncated block dump");
      double v = 0.0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw std::runtime_error("bad number '" + tok + "' in block dump");
      a(i, j) = v;
    }
  return a;
}

}  // namespace

void write_blocks(std::ostream& os, const QbdBlocks& q) {
  os << q.qb() << ' ' << q.ql() << '\n';
  for (const auto* m : {&q.B0, &q.B1, &q.B2, &q.A0, &q.A1, &q.A2}) write_matrix(os, *m);
}

QbdBlocks read_blocks(std::istream& is) {
  int qb = 0, ql = 0;
  if (!(is >> qb >> ql) || qb < 0 || ql < 1) throw std::runtime_error("bad block dump header");
  QbdBlocks q;
  q.B0 = read_matrix(is, ql, qb);
  q.B1 = read_matrix(is, qb, qb);
  q.B2 = read_matrix(is, qb, ql);
  q.A0 = read_matrix(is, ql, ql);
  q.A1 = read_matrix(is, ql, ql);
  q.A2 = read_matrix(is, ql, ql);
  return q;
}

}  // namespace mdsq
