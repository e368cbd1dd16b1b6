#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mobagent/common.hpp"

namespace mobagent::itinerary {

struct Edge {
  std::string u;
  std::string v;
  double cost = 1;
};

// Undirected weighted managed-network graph with a distinguished manager node.
class Topology {
 public:
  // "manager <host>", "edge <u> <v> <cost>" and optionally "node <host>";
  // '#' starts a comment.
  static Topology parse(std::string_view text);
  static Topology load(const std::string& path);
  // Complete graph with unit costs, used when no topology file is configured.
  static Topology complete(const std::string& manager, const std::vector<std::string>& hosts);

  void set_manager(const std::string& host);
  void add_node(const std::string& host);
  // Throws FIELD_RANGE for cost < 1 or a self loop.
  void add_edge(const std::string& u, const std::string& v, double cost);

  const std::string& manager() const { return manager_; }
  const std::set<std::string>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_node(const std::string& host) const { return nodes_.count(host) > 0; }

 private:
  std::string manager_;
  std::set<std::string> nodes_;
  std::vector<Edge> edges_;
};

// All-pairs shortest-path distances (Floyd-Warshall) over a Topology.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(const Topology& topo);

  // Throws UNKNOWN_HOST; +inf when disconnected.
  double operator()(const std::string& a, const std::string& b) const;
  const std::string& manager() const { return manager_; }

 private:
  std::size_t index(const std::string& host) const;

  std::string manager_;
  std::map<std::string, std::size_t> index_;
  std::vector<double> d_;
  std::size_t n_ = 0;
};

// Migration cost model: an agent starts at s0 bytes and grows by sd bytes per
// visited host; each hop costs distance times current size.
struct CostParams {
  double s0 = 1000;
  double sd = 100;
};

using Route = std::vector<std::string>;

struct Plan {
  std::vector<Route> routes;
  double max_cost = 0;
  double total_cost = 0;

  std::size_t agent_count() const { return routes.size(); }
  friend bool operator==(const Plan&, const Plan&) = default;
};

inline constexpr std::size_t kDefaultMaxAgents = 8;
inline constexpr std::size_t kBruteForceLimit = 7;

// d(m,v1)*s0 + sum_i d(v_i,v_{i+1})*(s0+i*sd) + d(v_k,m)*(s0+k*sd).
double route_cost(const Route& route, const DistanceMatrix& d, const CostParams& params);
double route_cost(const Route& route, const Topology& topo, const CostParams& params);

// Deterministic min-max heuristic: for every agent count k, farthest-first
// seeding, cheapest-insertion assignment, then nearest-neighbour ordering
// improved by 2-opt. The best k wins on (max cost, total cost, k).
Plan plan(const Topology& topo, const std::vector<std::string>& targets, const CostParams& params,
          std::size_t k_max = kDefaultMaxAgents);

// Exact optimum of the same objective by enumerating all set partitions and
// orderings. Throws TOO_LARGE beyond seven targets.
Plan brute_force_plan(const Topology& topo, const std::vector<std::string>& targets, const CostParams& params);

struct TopologyEvent {
  enum class Kind { kHostJoined, kHostLost };
  Kind kind = Kind::kHostJoined;
  std::string host;
};

// Applies the event to the plan's target set and plans from scratch.
Plan replan_on_change(const Plan& current, const TopologyEvent& event, const Topology& topo,
                      const CostParams& params, std::size_t k_max = kDefaultMaxAgents);

// Strict objective order: (max cost, total cost, agent count), compared with a
// small relative tolerance.
bool better_plan(const Plan& a, const Plan& b);

}  // namespace mobagent::itinerary
