#ifndef CHATTYMAPS_COMMUNITY_HPP
#define CHATTYMAPS_COMMUNITY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "chattymaps/csv.hpp"
#include "chattymaps/graph.hpp"
#include "chattymaps/lexicon.hpp"

// Community structure over the word graph. The taxonomy's top level comes
// from minimizing the two-level map equation; oversized communities are
// refined by modularity maximization on their induced subgraphs; a merge file
// then renames and merges communities into the final category tree.

namespace chattymaps::community {

using Partition = std::vector<std::uint32_t>;

inline double plogp(double x) { return x > 0 ? x * std::log2(x) : 0.0; }

// Relabels communities by first appearance over ascending node id, so equal
// groupings always compare equal.
inline Partition canonical(const Partition& p) {
  Partition out(p.size());
  std::map<std::uint32_t, std::uint32_t> remap;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto [it, fresh] = remap.emplace(p[i], static_cast<std::uint32_t>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

inline std::size_t community_count(const Partition& p) {
  std::set<std::uint32_t> ids(p.begin(), p.end());
  return ids.size();
}

// Connected components, each sorted ascending, ordered by smallest member.
inline std::vector<std::vector<std::uint32_t>> components(const graph::WeightedGraph& g) {
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<bool> seen(g.node_count(), false);
  for (std::uint32_t s = 0; s < g.node_count(); ++s) {
    if (seen[s]) continue;
    std::vector<std::uint32_t> comp{s};
    seen[s] = true;
    for (std::size_t head = 0; head < comp.size(); ++head)
      for (auto& [v, w] : g.neighbors(comp[head]))
        if (!seen[v]) {
          seen[v] = true;
          comp.push_back(v);
        }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

// Two-level map equation in bits, evaluated per connected component (each
// with its own stationary distribution) and summed. Within a component with
// total degree 2m: node visit rates are deg/2m, a module's exit rate is its
// cut weight over 2m, and
//   L = plogp(q) - 2 sum_m plogp(q_m) + sum_m plogp(q_m + flow_m)
//       - sum_a plogp(p_a)
// which equals q H(exit distribution) + sum_m p_m H(within-module visits).
inline double map_equation(const graph::WeightedGraph& g, const Partition& part) {
  if (g.node_count() == 0) throw InputError("map equation undefined on an empty graph");
  if (part.size() != g.node_count()) throw InputError("partition size does not match graph");

  double total = 0;
  for (const auto& comp : components(g)) {
    double two_m = 0;
    for (auto u : comp) two_m += g.degree(u);
    if (two_m == 0) continue;  // isolated node: the walk never moves

    std::map<std::uint32_t, double> q, flow;
    double sum_plogp_nodes = 0;
    for (auto u : comp) {
      double p_u = g.degree(u) / two_m;
      sum_plogp_nodes += plogp(p_u);
      flow[part[u]] += p_u;
      for (auto& [v, w] : g.neighbors(u))
        if (part[v] != part[u]) q[part[u]] += w / two_m;
    }
    double q_total = 0, sum_plogp_q = 0, sum_plogp_mod = 0;
    for (auto& [m, fl] : flow) {
      double qm = q.count(m) ? q[m] : 0.0;
      q_total += qm;
      sum_plogp_q += plogp(qm);
      sum_plogp_mod += plogp(qm + fl);
    }
    total += plogp(q_total) - 2.0 * sum_plogp_q + sum_plogp_mod - sum_plogp_nodes;
  }
  return total;
}

struct InfomapOptions {
  std::uint64_t seed = 1;
  double tol_bits = 1e-10;   // stop when a pass or level gains less than this
  std::size_t max_passes = 200;
};

namespace detail {

// One component in flow units. Aggregated levels reuse the same shape; edge
// flows are w/2m of the original component and intra-supernode flow is
// dropped (it never crosses a module boundary).
struct FlowLevel {
  std::vector<double> flow;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;
  std::vector<std::vector<std::uint32_t>> members;  // original component-local nodes
};

struct ModuleState {
  std::vector<double> q, fl;
  std::vector<std::uint32_t> part;
  double q_total = 0;

  void rebuild(const FlowLevel& lv) {
    std::uint32_t mods = 0;
    for (auto m : part) mods = std::max(mods, m + 1);
    q.assign(mods, 0);
    fl.assign(mods, 0);
    q_total = 0;
    for (std::uint32_t i = 0; i < lv.flow.size(); ++i) {
      fl[part[i]] += lv.flow[i];
      for (auto& [j, f] : lv.adj[i])
        if (part[j] != part[i]) q[part[i]] += f;
    }
    for (double v : q) q_total += v;
  }

  double codelength_term() const {
    double s = plogp(q_total);
    for (std::size_t m = 0; m < q.size(); ++m) s += -2.0 * plogp(q[m]) + plogp(q[m] + fl[m]);
    return s;
  }
};

// Greedy single-node moves, lowest module id winning ties, until a pass
// improves less than tol.
inline double local_moves(const FlowLevel& lv, ModuleState& st, std::mt19937_64& rng,
                          const InfomapOptions& opt) {
  const std::size_t n = lv.flow.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> w_to(st.q.size() + n + 1, 0.0);
  double gained = 0;
  for (std::size_t pass = 0; pass < opt.max_passes; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    double pass_gain = 0;
    for (auto i : order) {
      const std::uint32_t a = st.part[i];
      double exit_i = 0;
      std::vector<std::uint32_t> touched;
      for (auto& [j, f] : lv.adj[i]) {
        exit_i += f;
        std::uint32_t m = st.part[j];
        if (m >= w_to.size()) w_to.resize(m + 1, 0.0);
        if (w_to[m] == 0.0) touched.push_back(m);
        w_to[m] += f;
      }
      std::sort(touched.begin(), touched.end());

      const double w_ia = a < w_to.size() ? w_to[a] : 0.0;
      const double qa_new = st.q[a] - exit_i + 2.0 * w_ia;
      const double fla_new = st.fl[a] - lv.flow[i];
      auto delta_to = [&](double qb, double flb, double w_ib) {
        double qb_new = qb + exit_i - 2.0 * w_ib;
        double qt_new = st.q_total + (qa_new - st.q[a]) + (qb_new - qb);
        double d = plogp(qt_new) - plogp(st.q_total);
        d += -2.0 * (plogp(qa_new) - plogp(st.q[a]) + plogp(qb_new) - plogp(qb));
        d += plogp(qa_new + fla_new) - plogp(st.q[a] + st.fl[a]);
        d += plogp(qb_new + flb + lv.flow[i]) - plogp(qb + flb);
        return d;
      };

      double best = 0;
      std::int64_t best_mod = -1;
      for (auto m : touched) {
        if (m == a) continue;
        double d = delta_to(st.q[m], st.fl[m], w_to[m]);
        if (d < best - 1e-15) {
          best = d;
          best_mod = m;
        }
      }
      // a fresh singleton module; only taken when strictly best
      if (st.fl[a] > lv.flow[i]) {
        double d = delta_to(0.0, 0.0, 0.0);
        if (d < best - 1e-15) {
          best = d;
          best_mod = static_cast<std::int64_t>(st.q.size());
        }
      }

      if (best_mod >= 0) {
        std::uint32_t b = static_cast<std::uint32_t>(best_mod);
        if (b == st.q.size()) {
          st.q.push_back(0);
          st.fl.push_back(0);
          if (b >= w_to.size()) w_to.resize(b + 1, 0.0);
        }
        double w_ib = w_to[b];
        st.q_total += (qa_new - st.q[a]) + (st.q[b] + exit_i - 2.0 * w_ib - st.q[b]);
        st.q[a] = qa_new;
        st.fl[a] = fla_new;
        st.q[b] = st.q[b] + exit_i - 2.0 * w_ib;
        st.fl[b] += lv.flow[i];
        st.part[i] = b;
        pass_gain += -best;
      }

      for (auto m : touched) w_to[m] = 0.0;
    }
    st.rebuild(lv);  // kill accumulated float drift
    gained += pass_gain;
    if (pass_gain <= opt.tol_bits) break;
  }
  return gained;
}

inline Partition compact(const Partition& p) { return canonical(p); }

inline Partition optimize_component(const FlowLevel& start, double const_plogp_nodes,
                                    std::mt19937_64& rng, const InfomapOptions& opt) {
  const std::size_t n0 = start.flow.size();
  Partition node_part(n0);
  std::iota(node_part.begin(), node_part.end(), 0);

  FlowLevel lv = start;
  double prev_len = std::numeric_limits<double>::infinity();
  while (true) {
    ModuleState st;
    st.part.resize(lv.flow.size());
    std::iota(st.part.begin(), st.part.end(), 0);
    st.rebuild(lv);
    local_moves(lv, st, rng, opt);
    Partition packed = compact(st.part);

    for (std::uint32_t s = 0; s < lv.members.size(); ++s)
      for (auto orig : lv.members[s]) node_part[orig] = packed[s];

    st.part = packed;
    st.rebuild(lv);
    double len = st.codelength_term() - const_plogp_nodes;
    if (prev_len - len <= opt.tol_bits) break;
    prev_len = len;

    // aggregate modules into supernodes
    std::uint32_t mods = 0;
    for (auto m : packed) mods = std::max(mods, m + 1);
    if (mods == lv.flow.size()) break;  // nothing merged; a further level changes nothing
    FlowLevel next;
    next.flow.assign(mods, 0);
    next.adj.resize(mods);
    next.members.resize(mods);
    for (std::uint32_t s = 0; s < lv.flow.size(); ++s) {
      next.flow[packed[s]] += lv.flow[s];
      for (auto orig : lv.members[s]) next.members[packed[s]].push_back(orig);
    }
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> agg;
    for (std::uint32_t u = 0; u < lv.flow.size(); ++u)
      for (auto& [v, f] : lv.adj[u]) {
        if (u >= v) continue;
        std::uint32_t mu = packed[u], mv = packed[v];
        if (mu == mv) continue;
        agg[{std::min(mu, mv), std::max(mu, mv)}] += f;
      }
    for (auto& [e, f] : agg) {
      next.adj[e.first].emplace_back(e.second, f);
      next.adj[e.second].emplace_back(e.first, f);
    }
    lv = std::move(next);
  }
  return node_part;
}

}  // namespace detail

// Greedy map-equation minimization: singleton start, repeated best
// single-node moves, module aggregation, recursion until the codelength
// stops improving. The seed only drives node visit order.
inline Partition infomap_partition(const graph::WeightedGraph& g, InfomapOptions opt = {}) {
  if (g.node_count() == 0) throw InputError("cannot partition an empty graph");
  Partition out(g.node_count(), 0);
  std::uint32_t next_id = 0;
  for (const auto& comp : components(g)) {
    double two_m = 0;
    for (auto u : comp) two_m += g.degree(u);
    if (comp.size() == 1 || two_m == 0) {
      for (auto u : comp) out[u] = next_id++;
      continue;
    }
    detail::FlowLevel lv;
    lv.flow.resize(comp.size());
    lv.adj.resize(comp.size());
    lv.members.resize(comp.size());
    std::map<std::uint32_t, std::uint32_t> local;
    for (std::uint32_t i = 0; i < comp.size(); ++i) local[comp[i]] = i;
    double const_plogp = 0;
    for (std::uint32_t i = 0; i < comp.size(); ++i) {
      lv.flow[i] = g.degree(comp[i]) / two_m;
      lv.members[i] = {i};
      const_plogp += plogp(lv.flow[i]);
      for (auto& [v, w] : g.neighbors(comp[i])) lv.adj[i].emplace_back(local.at(v), w / two_m);
    }
    std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ull + comp.front() + 1);
    Partition local_part = detail::optimize_component(lv, const_plogp, rng, opt);
    std::uint32_t width = 0;
    for (auto m : local_part) width = std::max(width, m + 1);
    for (std::uint32_t i = 0; i < comp.size(); ++i) out[comp[i]] = next_id + local_part[i];
    next_id += width;
  }
  return canonical(out);
}

// Weighted Newman modularity. Undefined without edges.
inline double modularity(const graph::WeightedGraph& g, const Partition& part) {
  if (part.size() != g.node_count()) throw InputError("partition size does not match graph");
  const double m = g.total_weight();
  if (!(m > 0)) throw InputError("modularity undefined on a graph without edges");
  std::map<std::uint32_t, double> tot, win2;
  for (std::uint32_t u = 0; u < g.node_count(); ++u) {
    tot[part[u]] += g.degree(u);
    for (auto& [v, w] : g.neighbors(u))
      if (part[v] == part[u]) win2[part[u]] += w;  // both directions: each intra edge twice
  }
  double q = 0;
  for (auto& [c, t] : tot) {
    double w2 = win2.count(c) ? win2[c] : 0.0;
    q += w2 / (2.0 * m) - (t / (2.0 * m)) * (t / (2.0 * m));
  }
  return q;
}

struct LouvainOptions {
  std::uint64_t seed = 1;
  double tol_gain = 1e-12;
  std::size_t max_passes = 200;
};

struct LouvainResult {
  Partition partition;
  std::vector<double> q_trace;  // modularity after each completed pass, non-decreasing
};

namespace detail {

struct LouvainLevel {
  std::vector<double> k;      // weighted degree incl. twice the self weight
  std::vector<double> self;   // self-loop weight (intra weight of the supernode)
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;
  std::vector<std::vector<std::uint32_t>> members;
};

}  // namespace detail

// Classic greedy modularity maximization; every accepted move increases Q,
// so the per-pass trace is monotone.
inline LouvainResult louvain(const graph::WeightedGraph& g, LouvainOptions opt = {}) {
  const double m = g.total_weight();
  if (!(m > 0)) throw InputError("cannot run modularity optimization without edges");
  const std::size_t n0 = g.node_count();

  detail::LouvainLevel lv;
  lv.k.resize(n0);
  lv.self.assign(n0, 0);
  lv.adj.resize(n0);
  lv.members.resize(n0);
  for (std::uint32_t u = 0; u < n0; ++u) {
    lv.k[u] = g.degree(u);
    lv.members[u] = {u};
    for (auto& [v, w] : g.neighbors(u)) lv.adj[u].emplace_back(v, w);
  }

  LouvainResult res;
  res.partition.resize(n0);
  std::iota(res.partition.begin(), res.partition.end(), 0);
  std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ull + 0xB5297A4D);

  while (true) {
    const std::size_t n = lv.k.size();
    Partition part(n);
    std::iota(part.begin(), part.end(), 0);
    std::vector<double> tot = lv.k;
    std::vector<double> w_to(n, 0.0);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    bool any_move = false;
    for (std::size_t pass = 0; pass < opt.max_passes; ++pass) {
      std::shuffle(order.begin(), order.end(), rng);
      bool moved = false;
      for (auto i : order) {
        const std::uint32_t a = part[i];
        std::vector<std::uint32_t> touched;
        for (auto& [j, f] : lv.adj[i]) {
          std::uint32_t c = part[j];
          if (w_to[c] == 0.0) touched.push_back(c);
          w_to[c] += f;
        }
        std::sort(touched.begin(), touched.end());

        tot[a] -= lv.k[i];
        double best_gain = w_to[a] / m - tot[a] * lv.k[i] / (2.0 * m * m);
        std::uint32_t best_c = a;
        for (auto c : touched) {
          if (c == a) continue;
          double gain = w_to[c] / m - tot[c] * lv.k[i] / (2.0 * m * m);
          if (gain > best_gain + opt.tol_gain) {
            best_gain = gain;
            best_c = c;
          }
        }
        tot[best_c] += lv.k[i];
        if (best_c != a) {
          part[i] = best_c;
          moved = true;
          any_move = true;
        }
        for (auto c : touched) w_to[c] = 0.0;
      }

      Partition packed = canonical(part);
      for (std::uint32_t s = 0; s < n; ++s)
        for (auto orig : lv.members[s]) res.partition[orig] = packed[s];
      res.q_trace.push_back(modularity(g, res.partition));
      if (!moved) break;
    }

    if (!any_move) break;

    Partition packed = canonical(part);
    std::uint32_t mods = 0;
    for (auto c : packed) mods = std::max(mods, c + 1);
    if (mods == n) break;
    detail::LouvainLevel next;
    next.k.assign(mods, 0);
    next.self.assign(mods, 0);
    next.adj.resize(mods);
    next.members.resize(mods);
    for (std::uint32_t s = 0; s < n; ++s) {
      next.k[packed[s]] += lv.k[s];
      next.self[packed[s]] += lv.self[s];
      for (auto orig : lv.members[s]) next.members[packed[s]].push_back(orig);
    }
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> agg;
    for (std::uint32_t u = 0; u < n; ++u)
      for (auto& [v, f] : lv.adj[u]) {
        if (u >= v) continue;
        std::uint32_t cu = packed[u], cv = packed[v];
        if (cu == cv)
          next.self[cu] += f;
        else
          agg[{std::min(cu, cv), std::max(cu, cv)}] += f;
      }
    for (auto& [e, f] : agg) {
      next.adj[e.first].emplace_back(e.second, f);
      next.adj[e.second].emplace_back(e.first, f);
    }
    lv = std::move(next);
  }

  res.partition = canonical(res.partition);
  return res;
}

// Top communities from the map equation, children from refining oversized
// ones. child[i] is -1 where the top community was left whole.
struct HierPartition {
  Partition top;
  std::vector<std::int32_t> child;
  std::vector<std::uint32_t> child_counts;  // per top community

  std::string key_of(std::uint32_t node) const {
    std::string k = "c" + std::to_string(top[node]);
    if (child[node] >= 0) k += "." + std::to_string(child[node]);
    return k;
  }
};

inline HierPartition louvain_refine(const graph::WeightedGraph& g, const Partition& top,
                                    std::size_t size_threshold, std::uint64_t seed = 1) {
  if (top.size() != g.node_count()) throw InputError("partition size does not match graph");
  HierPartition hp;
  hp.top = canonical(top);
  hp.child.assign(g.node_count(), -1);
  std::uint32_t mods = 0;
  for (auto c : hp.top) mods = std::max(mods, c + 1);
  hp.child_counts.assign(mods, 0);

  for (std::uint32_t c = 0; c < mods; ++c) {
    std::vector<std::uint32_t> members;
    for (std::uint32_t u = 0; u < g.node_count(); ++u)
      if (hp.top[u] == c) members.push_back(u);
    if (members.size() <= size_threshold) continue;

    std::map<std::uint32_t, std::uint32_t> local;
    for (std::uint32_t i = 0; i < members.size(); ++i) local[members[i]] = i;
    std::vector<graph::Edge> edges;
    for (std::uint32_t i = 0; i < members.size(); ++i)
      for (auto& [v, w] : g.neighbors(members[i])) {
        auto it = local.find(v);
        if (it != local.end() && local[members[i]] < it->second)
          edges.push_back({i, it->second, w});
      }
    if (edges.empty()) continue;
    std::vector<std::string> labels(members.size());
    for (std::uint32_t i = 0; i < members.size(); ++i) labels[i] = g.labels()[members[i]];
    graph::WeightedGraph sub(std::move(labels), edges);

    LouvainOptions lopt;
    lopt.seed = seed ^ (0x51ED2701ull + c);
    auto lr = louvain(sub, lopt);
    if (community_count(lr.partition) <= 1) continue;
    for (std::uint32_t i = 0; i < members.size(); ++i)
      hp.child[members[i]] = static_cast<std::int32_t>(lr.partition[i]);
    std::uint32_t kids = 0;
    for (auto ch : lr.partition) kids = std::max(kids, ch + 1);
    hp.child_counts[c] = kids;
  }
  return hp;
}

struct MergeRule {
  enum class Kind { merge, label } kind = Kind::merge;
  std::string source;
  std::string target;  // a community key for merge rules, a label for label rules
};

// CSV `kind,source,target`; kind is `merge` or `label`. Malformed rows are
// hard errors: this is a small hand-written control file.
inline std::vector<MergeRule> parse_merge_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<MergeRule> out;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t kind_col = 0, source_col = 1, target_col = 2;
  while (std::getline(in, line)) {
    ++lineno;
    bool blank = true;
    for (char ch : line) blank = blank && (ch == ' ' || ch == '\t' || ch == '\r');
    if (blank) continue;
    if (!have_header) {
      csv::Header h{csv::split(line)};
      kind_col = h.require("kind");
      source_col = h.require("source");
      target_col = h.require("target");
      have_header = true;
      continue;
    }
    auto fields = csv::split(line);
    if (fields.size() <= std::max(kind_col, std::max(source_col, target_col)))
      throw InputError("merge file line " + std::to_string(lineno) + ": too few columns");
    MergeRule r;
    if (fields[kind_col] == "merge")
      r.kind = MergeRule::Kind::merge;
    else if (fields[kind_col] == "label")
      r.kind = MergeRule::Kind::label;
    else
      throw InputError("merge file line " + std::to_string(lineno) + ": unknown kind '" + fields[kind_col] + "'");
    r.source = fields[source_col];
    r.target = fields[target_col];
    if (r.source.empty() || r.target.empty())
      throw InputError("merge file line " + std::to_string(lineno) + ": empty source or target");
    out.push_back(std::move(r));
  }
  if (!have_header) throw InputError("merge file has no header");
  return out;
}

// Applies merges (re-homing whole communities) and labels, then emits the
// final term -> path taxonomy. Unlabelled communities keep their generated
// key as the label.
inline lexicon::Taxonomy apply_merge(const graph::WeightedGraph& g, const HierPartition& hp,
                                     const std::vector<MergeRule>& rules) {
  std::set<std::string> keys;
  for (std::uint32_t c = 0; c < hp.child_counts.size(); ++c) {
    keys.insert("c" + std::to_string(c));
    for (std::uint32_t j = 0; j < hp.child_counts[c]; ++j)
      keys.insert("c" + std::to_string(c) + "." + std::to_string(j));
  }

  std::map<std::string, std::string> merged, labels;
  for (const auto& r : rules) {
    if (!keys.count(r.source)) throw InputError("merge rule references unknown community " + r.source);
    if (r.kind == MergeRule::Kind::merge) {
      if (!keys.count(r.target)) throw InputError("merge target is not a community: " + r.target);
      merged[r.source] = r.target;
    } else {
      labels[r.source] = r.target;
    }
  }

  auto resolve = [&](std::string k) {
    std::size_t hops = 0;
    while (merged.count(k)) {
      k = merged[k];
      if (++hops > rules.size()) throw InputError("merge rules form a cycle at " + k);
    }
    return k;
  };
  auto label_of = [&](const std::string& k) { return labels.count(k) ? labels[k] : k; };

  std::vector<TaxonomyEntry> entries;
  std::set<std::string> tops;
  for (std::uint32_t u = 0; u < g.node_count(); ++u) {
    std::string key = resolve(hp.key_of(u));
    TaxonomyEntry e;
    e.term = g.labels()[u];
    auto dot = key.find('.');
    if (dot == std::string::npos) {
      e.path = {label_of(key)};
    } else {
      e.path = {label_of(key.substr(0, dot)), label_of(key)};
    }
    tops.insert(e.path.front());
    entries.push_back(std::move(e));
  }
  return lexicon::Taxonomy(std::move(entries), std::vector<std::string>(tops.begin(), tops.end()));
}

}  // namespace chattymaps::community

#endif
