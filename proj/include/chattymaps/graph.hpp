#ifndef CHATTYMAPS_GRAPH_HPP
#define CHATTYMAPS_GRAPH_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "chattymaps/lexicon.hpp"
#include "chattymaps/types.hpp"

// Undirected weighted word graph built from photo tag lists: nodes are the
// sound words seen in at least one photo, an edge's weight counts the photos
// in which both words appear. Node ids are assigned lexicographically after
// accumulation, so the graph is identical under any photo ordering.

namespace chattymaps::graph {

struct Edge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  double w = 0;
};

class WeightedGraph {
 public:
  WeightedGraph() = default;

  WeightedGraph(std::vector<std::string> labels, const std::vector<Edge>& edges)
      : labels_(std::move(labels)), adj_(labels_.size()) {
    for (const auto& e : edges) {
      if (e.u >= labels_.size() || e.v >= labels_.size()) throw InternalError("edge endpoint out of range");
      if (e.u == e.v) throw InternalError("self loops are not allowed");
      if (!(e.w > 0)) throw InternalError("edge weight must be positive");
      adj_[e.u].emplace_back(e.v, e.w);
      adj_[e.v].emplace_back(e.u, e.w);
      total_weight_ += e.w;
      ++edge_count_;
    }
  }

  std::size_t node_count() const { return labels_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  double total_weight() const { return total_weight_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::pair<std::uint32_t, double>>& neighbors(std::uint32_t u) const { return adj_[u]; }

  double degree(std::uint32_t u) const {
    double d = 0;
    for (auto& [v, w] : adj_[u]) d += w;
    return d;
  }

  // (u, v, w) with u < v, ascending; the emission order
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count_);
    for (std::uint32_t u = 0; u < adj_.size(); ++u)
      for (auto& [v, w] : adj_[u])
        if (u < v) out.push_back({u, v, w});
    std::sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) {
      return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    return out;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj_;
  double total_weight_ = 0;
  std::size_t edge_count_ = 0;
};

// Accumulates photo tag lists; build() freezes the graph. Within one photo a
// word counts once no matter how often it was tagged.
class CooccurrenceBuilder {
 public:
  explicit CooccurrenceBuilder(std::unordered_set<std::string> terms) : terms_(std::move(terms)) {}

  void add_photo(const std::vector<std::string>& raw_tags) {
    std::set<std::string> present;
    for (const auto& raw : raw_tags) {
      auto norm = lexicon::normalize(raw);
      if (norm && terms_.count(*norm)) present.insert(std::move(*norm));
    }
    add_matched(present);
  }

  // pre-normalized, deduplicated words of one photo
  void add_matched(const std::set<std::string>& present) {
    for (const auto& w : present) ++word_photos_[w];
    for (auto it = present.begin(); it != present.end(); ++it) {
      auto jt = it;
      for (++jt; jt != present.end(); ++jt) ++pair_counts_[{*it, *jt}];
    }
  }

  WeightedGraph build() const {
    std::vector<std::string> labels;
    labels.reserve(word_photos_.size());
    for (auto& [w, _] : word_photos_) labels.push_back(w);  // map order = lexicographic
    std::unordered_map<std::string, std::uint32_t> id;
    for (std::uint32_t i = 0; i < labels.size(); ++i) id[labels[i]] = i;
    std::vector<Edge> edges;
    edges.reserve(pair_counts_.size());
    for (auto& [pair, c] : pair_counts_)
      edges.push_back({id.at(pair.first), id.at(pair.second), static_cast<double>(c)});
    return WeightedGraph(std::move(labels), edges);
  }

  const std::map<std::string, std::uint64_t>& word_photo_counts() const { return word_photos_; }

 private:
  std::unordered_set<std::string> terms_;
  std::map<std::string, std::uint64_t> word_photos_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts_;
};

inline WeightedGraph build_cooccurrence(const std::vector<PhotoRecord>& photos,
                                        const std::unordered_set<std::string>& terms) {
  CooccurrenceBuilder b(terms);
  for (const auto& p : photos) b.add_photo(p.tags);
  return b.build();
}

}  // namespace chattymaps::graph

#endif
