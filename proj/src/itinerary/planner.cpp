#include "mobagent/itinerary/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

namespace mobagent::itinerary {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool less_eps(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a < b;
  return a < b - 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

Plan finish(std::vector<Route> routes, const DistanceMatrix& d, const CostParams& params) {
  Plan p;
  p.routes = std::move(routes);
  for (const auto& r : p.routes) {
    const double c = route_cost(r, d, params);
    p.max_cost = std::max(p.max_cost, c);
    p.total_cost += c;
  }
  return p;
}

void check_targets(const std::vector<std::string>& targets, const DistanceMatrix& d) {
  if (targets.empty()) throw Error(Errc::kEmptyTargets, "no target hosts");
  for (const auto& t : targets) {
    if (t == d.manager()) throw Error(Errc::kFieldRange, "manager cannot be a target: " + t);
    if (std::isinf(d(d.manager(), t))) throw Error(Errc::kDisconnected, t + " is unreachable from the manager");
  }
}

std::vector<std::string> unique_sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Route nearest_neighbour(const Route& hosts, const DistanceMatrix& d) {
  Route rest = hosts;
  std::sort(rest.begin(), rest.end());
  Route out;
  std::string at = d.manager();
  while (!rest.empty()) {
    auto best = rest.begin();
    for (auto it = rest.begin(); it != rest.end(); ++it) {
      if (less_eps(d(at, *it), d(at, *best))) best = it;
    }
    at = *best;
    out.push_back(at);
    rest.erase(best);
  }
  return out;
}

void two_opt(Route& r, const DistanceMatrix& d, const CostParams& params) {
  double cost = route_cost(r, d, params);
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 1 < r.size() && !improved; ++i) {
      for (std::size_t j = i + 1; j < r.size() && !improved; ++j) {
        std::reverse(r.begin() + i, r.begin() + j + 1);
        const double c = route_cost(r, d, params);
        if (less_eps(c, cost)) {
          cost = c;
          improved = true;
        } else {
          std::reverse(r.begin() + i, r.begin() + j + 1);
        }
      }
    }
  }
}

// Single agent count k. Targets are sorted and unique.
Plan plan_k(const std::vector<std::string>& targets, std::size_t k, const DistanceMatrix& d,
            const CostParams& params) {
  const auto& m = d.manager();
  std::vector<Route> routes;
  std::vector<std::string> rest = targets;

  // Farthest-first seeds; ties go to the lexicographically smaller host.
  while (routes.size() < k) {
    auto best = rest.end();
    double best_score = -1;
    for (auto it = rest.begin(); it != rest.end(); ++it) {
      double score = d(m, *it);
      for (const auto& r : routes) score = std::min(score, d(r.front(), *it));
      if (score > best_score + 1e-9) {
        best_score = score;
        best = it;
      }
    }
    routes.push_back({*best});
    rest.erase(best);
  }

  // Cheapest marginal insertion over all (host, route, position).
  while (!rest.empty()) {
    double best_delta = kInf;
    std::size_t bh = 0, br = 0, bp = 0;
    for (std::size_t h = 0; h < rest.size(); ++h) {
      for (std::size_t ri = 0; ri < routes.size(); ++ri) {
        auto& r = routes[ri];
        const double base = route_cost(r, d, params);
        for (std::size_t pos = 0; pos <= r.size(); ++pos) {
          r.insert(r.begin() + pos, rest[h]);
          const double delta = route_cost(r, d, params) - base;
          r.erase(r.begin() + pos);
          if (less_eps(delta, best_delta)) {
            best_delta = delta;
            bh = h;
            br = ri;
            bp = pos;
          }
        }
      }
    }
    routes[br].insert(routes[br].begin() + bp, rest[bh]);
    rest.erase(rest.begin() + bh);
  }

  for (auto& r : routes) {
    Route nn = nearest_neighbour(r, d);
    two_opt(nn, d, params);
    if (less_eps(route_cost(nn, d, params), route_cost(r, d, params))) r = std::move(nn);
    else two_opt(r, d, params);
  }
  return finish(std::move(routes), d, params);
}

}  // namespace

Topology Topology::parse(std::string_view text) {
  Topology t;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    auto fail = [&](const std::string& why) {
      throw Error(Errc::kFieldRange, "topology line " + std::to_string(lineno) + ": " + why);
    };
    if (kw == "manager") {
      std::string h;
      if (!(ls >> h)) fail("manager needs a host");
      t.set_manager(h);
    } else if (kw == "node") {
      std::string h;
      if (!(ls >> h)) fail("node needs a host");
      t.add_node(h);
    } else if (kw == "edge") {
      std::string u, v;
      double c = 0;
      if (!(ls >> u >> v >> c)) fail("edge needs <u> <v> <cost>");
      t.add_edge(u, v, c);
    } else {
      fail("unknown keyword " + kw);
    }
    std::string extra;
    if (ls >> extra) fail("trailing token " + extra);
  }
  if (t.manager_.empty()) throw Error(Errc::kFieldRange, "topology has no manager line");
  return t;
}

Topology Topology::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::kIoError, "cannot read topology " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

Topology Topology::complete(const std::string& manager, const std::vector<std::string>& hosts) {
  Topology t;
  t.set_manager(manager);
  std::vector<std::string> all = hosts;
  all.push_back(manager);
  all = unique_sorted(std::move(all));
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) t.add_edge(all[i], all[j], 1);
  }
  return t;
}

void Topology::set_manager(const std::string& host) {
  manager_ = host;
  nodes_.insert(host);
}

void Topology::add_node(const std::string& host) { nodes_.insert(host); }

void Topology::add_edge(const std::string& u, const std::string& v, double cost) {
  if (u == v) throw Error(Errc::kFieldRange, "self loop on " + u);
  if (!(cost >= 1) || std::isinf(cost)) throw Error(Errc::kFieldRange, "edge cost must be >= 1");
  nodes_.insert(u);
  nodes_.insert(v);
  edges_.push_back({u, v, cost});
}

DistanceMatrix::DistanceMatrix(const Topology& topo) : manager_(topo.manager()) {
  if (manager_.empty()) throw Error(Errc::kUnknownHost, "topology has no manager");
  for (const auto& n : topo.nodes()) index_.emplace(n, n_++);
  d_.assign(n_ * n_, kInf);
  for (std::size_t i = 0; i < n_; ++i) d_[i * n_ + i] = 0;
  for (const auto& e : topo.edges()) {
    const auto a = index_.at(e.u), b = index_.at(e.v);
    d_[a * n_ + b] = std::min(d_[a * n_ + b], e.cost);
    d_[b * n_ + a] = d_[a * n_ + b];
  }
  for (std::size_t k = 0; k < n_; ++k) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double via = d_[i * n_ + k] + d_[k * n_ + j];
        if (via < d_[i * n_ + j]) d_[i * n_ + j] = via;
      }
    }
  }
}

std::size_t DistanceMatrix::index(const std::string& host) const {
  auto it = index_.find(host);
  if (it == index_.end()) throw Error(Errc::kUnknownHost, host);
  return it->second;
}

double DistanceMatrix::operator()(const std::string& a, const std::string& b) const {
  return d_[index(a) * n_ + index(b)];
}

double route_cost(const Route& route, const DistanceMatrix& d, const CostParams& params) {
  if (route.empty()) throw Error(Errc::kEmptyTargets, "empty route");
  const auto& m = d.manager();
  double cost = d(m, route.front()) * params.s0;
  for (std::size_t i = 1; i < route.size(); ++i) {
    cost += d(route[i - 1], route[i]) * (params.s0 + static_cast<double>(i) * params.sd);
  }
  cost += d(route.back(), m) * (params.s0 + static_cast<double>(route.size()) * params.sd);
  return cost;
}

double route_cost(const Route& route, const Topology& topo, const CostParams& params) {
  return route_cost(route, DistanceMatrix(topo), params);
}

bool better_plan(const Plan& a, const Plan& b) {
  if (less_eps(a.max_cost, b.max_cost)) return true;
  if (less_eps(b.max_cost, a.max_cost)) return false;
  if (less_eps(a.total_cost, b.total_cost)) return true;
  if (less_eps(b.total_cost, a.total_cost)) return false;
  return a.agent_count() < b.agent_count();
}

Plan plan(const Topology& topo, const std::vector<std::string>& targets, const CostParams& params,
          std::size_t k_max) {
  const DistanceMatrix d(topo);
  const auto hosts = unique_sorted(targets);
  check_targets(hosts, d);
  const std::size_t k_top = std::min(std::max<std::size_t>(k_max, 1), hosts.size());
  std::optional<Plan> best;
  for (std::size_t k = 1; k <= k_top; ++k) {
    Plan p = plan_k(hosts, k, d, params);
    if (!best || better_plan(p, *best)) best = std::move(p);
  }
  return *best;
}

Plan brute_force_plan(const Topology& topo, const std::vector<std::string>& targets, const CostParams& params) {
  const DistanceMatrix d(topo);
  const auto hosts = unique_sorted(targets);
  check_targets(hosts, d);
  const std::size_t n = hosts.size();
  if (n > kBruteForceLimit) {
    throw Error(Errc::kTooLarge, std::to_string(n) + " targets exceed the exhaustive limit of 7");
  }

  // Best ordering per non-empty subset.
  std::vector<Route> best_route(std::size_t{1} << n);
  std::vector<double> best_cost(best_route.size(), kInf);
  for (std::size_t mask = 1; mask < best_route.size(); ++mask) {
    Route r;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::size_t{1} << i)) r.push_back(hosts[i]);
    }
    do {
      const double c = route_cost(r, d, params);
      if (less_eps(c, best_cost[mask])) {
        best_cost[mask] = c;
        best_route[mask] = r;
      }
    } while (std::next_permutation(r.begin(), r.end()));
  }

  // Set partitions as restricted growth strings.
  std::optional<Plan> best;
  std::vector<std::size_t> a(n, 0);
  while (true) {
    const std::size_t blocks = *std::max_element(a.begin(), a.end()) + 1;
    std::vector<std::size_t> masks(blocks, 0);
    for (std::size_t i = 0; i < n; ++i) masks[a[i]] |= std::size_t{1} << i;
    Plan p;
    for (auto mk : masks) {
      p.routes.push_back(best_route[mk]);
      p.max_cost = std::max(p.max_cost, best_cost[mk]);
      p.total_cost += best_cost[mk];
    }
    if (!best || better_plan(p, *best)) best = std::move(p);

    // Next restricted growth string.
    std::size_t i = n;
    while (i-- > 1) {
      const std::size_t prefix_max = *std::max_element(a.begin(), a.begin() + i);
      if (a[i] <= prefix_max) {
        ++a[i];
        std::fill(a.begin() + i + 1, a.end(), 0);
        break;
      }
    }
    if (i == 0 || i == static_cast<std::size_t>(-1)) break;
  }
  return *best;
}

Plan replan_on_change(const Plan& current, const TopologyEvent& event, const Topology& topo,
                      const CostParams& params, std::size_t k_max) {
  std::vector<std::string> targets;
  for (const auto& r : current.routes) targets.insert(targets.end(), r.begin(), r.end());
  if (event.kind == TopologyEvent::Kind::kHostJoined) {
    targets.push_back(event.host);
  } else {
    targets.erase(std::remove(targets.begin(), targets.end(), event.host), targets.end());
  }
  return plan(topo, targets, params, k_max);
}

}  // namespace mobagent::itinerary
