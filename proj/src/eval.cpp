#include "exf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "exf/util.hpp"

namespace exf {

nlohmann::json RetrievalReport::to_json() const {
  nlohmann::json j;
  j["n_queries"] = n_queries;
  nlohmann::json entries = nlohmann::json::object();
  for (std::size_t i = 0; i < k_values.size(); ++i)
    entries["R@" + std::to_string(k_values[i])] = recall[i];
  j["recall"] = entries;
  return j;
}

nlohmann::json SpectralReport::to_json() const {
  return {{"rho", rho}, {"spectrum", spectrum}};
}

nlohmann::json PairRanking::to_json() const {
  auto dump = [](const std::vector<RankedPair>& pairs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pairs)
      arr.push_back({{"i", p.i}, {"j", p.j}, {"w", p.w}, {"same_class", p.same_class}});
    return arr;
  };
  return {{"top", dump(top)}, {"bottom", dump(bottom)}};
}

std::string PairRanking::render_text() const {
  std::ostringstream os;
  auto section = [&](const char* name, const std::vector<RankedPair>& pairs) {
    os << name << " pairs by weight\n";
    os << "  rank      i      j        w  same_class\n";
    std::size_t rank = 1;
    for (const auto& p : pairs) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "  %4zu  %5zu  %5zu  %7.5f  %s\n", rank, p.i,
                    p.j, p.w, p.same_class ? "yes" : "no");
      os << buf;
      ++rank;
    }
  };
  section("top", top);
  section("bottom", bottom);
  return os.str();
}

RetrievalReport recall_at_k(const Matrix& embeddings,
                            const std::vector<std::size_t>& labels,
                            const std::vector<std::size_t>& k_values) {
  const std::size_t n = embeddings.rows;
  if (n < 2) throw InvalidInput("recall_at_k: need at least 2 samples");
  if (labels.size() != n) throw InvalidInput("recall_at_k: label count mismatch");
  if (k_values.empty()) throw InvalidInput("recall_at_k: no K values");
  std::size_t max_k = 0;
  for (std::size_t k : k_values) {
    if (k == 0 || k >= n)
      throw InvalidInput("recall_at_k: K = " + std::to_string(k) +
                         " must satisfy 1 <= K < n = " + std::to_string(n));
    max_k = std::max(max_k, k);
  }

  DistanceMatrix d = pairwise_distances(embeddings);

  // hit_rank[q] = rank (1-based) of the nearest same-class neighbor, or 0.
  std::vector<std::size_t> hit_rank(n, 0);
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t q = 0; q < n; ++q) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != q) order.emplace_back(d.dist(q, j), j);
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(max_k),
                      order.end());
    for (std::size_t r = 0; r < max_k; ++r) {
      if (labels[order[r].second] == labels[q]) {
        hit_rank[q] = r + 1;
        break;
      }
    }
  }

  RetrievalReport report;
  report.k_values = k_values;
  report.n_queries = n;
  for (std::size_t k : k_values) {
    std::size_t hits = 0;
    for (std::size_t q = 0; q < n; ++q)
      if (hit_rank[q] != 0 && hit_rank[q] <= k) ++hits;
    report.recall.push_back(static_cast<double>(hits) / static_cast<double>(n));
  }
  return report;
}

SpectralReport spectral_decay(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows, d = embeddings.cols;
  if (n < 2) throw InvalidInput("spectral_decay: need at least 2 samples");

  Matrix centered = embeddings;
  for (std::size_t k = 0; k < d; ++k) {
    Accumulator acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(embeddings(i, k));
    double mean = acc.total() / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered(i, k) -= mean;
  }

  std::vector<double> sv = singular_values(centered);
  sv.resize(d, 0.0);  // pad when rank-deficient (n < d)

  double total = 0.0;
  for (double s : sv) total += s;
  if (total == 0.0)
    throw DegenerateInput("spectral_decay: all rows identical, spectrum undefined");

  SpectralReport report;
  report.spectrum.reserve(d);
  double rho = 0.0;
  for (double s : sv) {
    double p = s / total;
    report.spectrum.push_back(p);
    if (p > 0.0) rho += p * std::log(p * static_cast<double>(d));
  }
  report.rho = std::max(0.0, rho);
  return report;
}

PairRanking rank_pairs_by_weight(const WeightMatrix& w,
                                 const std::vector<std::size_t>& labels,
                                 std::size_t top) {
  if (labels.size() != w.n)
    throw InvalidInput("rank_pairs_by_weight: label count mismatch");
  const std::size_t pair_count = w.n * (w.n - 1) / 2;
  if (top > pair_count)
    throw InvalidInput("rank_pairs_by_weight: top = " + std::to_string(top) +
                       " exceeds pair count " + std::to_string(pair_count));

  std::vector<RankedPair> pairs;
  pairs.reserve(pair_count);
  for (std::size_t i = 0; i < w.n; ++i)
    for (std::size_t j = i + 1; j < w.n; ++j)
      pairs.push_back({i, j, w.w(i, j), labels[i] == labels[j]});

  auto heavier = [](const RankedPair& a, const RankedPair& b) {
    if (a.w != b.w) return a.w > b.w;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  };
  std::sort(pairs.begin(), pairs.end(), heavier);

  PairRanking out;
  out.top.assign(pairs.begin(), pairs.begin() + static_cast<long>(top));
  out.bottom.assign(pairs.end() - static_cast<long>(top), pairs.end());
  return out;
}

}  // namespace exf
