#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mobagent/bench/migrate_compare.hpp"
#include "mobagent/itinerary/planner.hpp"
#include "mobagent/mibsim/mib.hpp"
#include "mobagent/proto/compress.hpp"
#include "mobagent/proto/frame.hpp"
#include "mobagent/security/crypto.hpp"

namespace py = pybind11;
using namespace mobagent;

namespace {

py::bytes to_py(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

Bytes from_py(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

py::dict plan_dict(const itinerary::Plan& p) {
  py::dict d;
  d["routes"] = p.routes;
  d["max_cost"] = p.max_cost;
  d["total_cost"] = p.total_cost;
  return d;
}

py::object value_to_py(const proto::QueryValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return py::int_(*i);
  if (const auto* s = std::get_if<std::string>(&v)) return py::str(*s);
  return py::none();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mobile-agent monitoring core: planner, wire framing and benchmarks";

  py::register_exception<Error>(m, "MobagentError");

  m.def(
      "route_cost",
      [](const std::string& topology, const std::vector<std::string>& route, double s0, double sd) {
        return itinerary::route_cost(route, itinerary::Topology::parse(topology), {s0, sd});
      },
      py::arg("topology"), py::arg("route"), py::arg("s0") = 1000.0, py::arg("sd") = 100.0);

  m.def(
      "plan",
      [](const std::string& topology, const std::vector<std::string>& targets, double s0, double sd,
         std::size_t k_max) {
        return plan_dict(itinerary::plan(itinerary::Topology::parse(topology), targets, {s0, sd}, k_max));
      },
      py::arg("topology"), py::arg("targets"), py::arg("s0") = 1000.0, py::arg("sd") = 100.0,
      py::arg("k_max") = itinerary::kDefaultMaxAgents);

  m.def(
      "brute_force_plan",
      [](const std::string& topology, const std::vector<std::string>& targets, double s0, double sd) {
        return plan_dict(itinerary::brute_force_plan(itinerary::Topology::parse(topology), targets, {s0, sd}));
      },
      py::arg("topology"), py::arg("targets"), py::arg("s0") = 1000.0, py::arg("sd") = 100.0);

  m.def(
      "encode_frame",
      [](int type, int flags, const py::bytes& payload) {
        return to_py(
            proto::encode_frame(static_cast<proto::MsgType>(type), static_cast<std::uint8_t>(flags), from_py(payload)));
      },
      py::arg("msg_type"), py::arg("flags"), py::arg("payload"));

  m.def("decode_frame", [](const py::bytes& frame) {
    const auto f = proto::decode_frame(from_py(frame));
    return py::make_tuple(static_cast<int>(f.type), static_cast<int>(f.flags), to_py(f.payload));
  });

  m.def("compress", [](const py::bytes& payload) {
    const auto c = proto::compress(from_py(payload));
    return py::make_tuple(to_py(c.data), c.was_compressed);
  });
  m.def("decompress", [](const py::bytes& deflated) { return to_py(proto::decompress(from_py(deflated))); });

  m.def("sha256", [](const py::bytes& data) {
    const auto d = security::sha256(from_py(data));
    return to_py(Bytes(d.begin(), d.end()));
  });

  m.def(
      "mib_get",
      [](const std::string& script, const std::string& oid, double t) {
        auto mib = mibsim::Mib::parse_script(script);
        mib.set_clock(t);
        return value_to_py(mib.get(oid));
      },
      py::arg("script"), py::arg("oid"), py::arg("t") = 0.0);

  m.def(
      "migrate_compare_json",
      [](std::size_t rounds, std::size_t hosts) {
        py::gil_scoped_release release;
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : bench::migrate_compare_all(rounds, hosts)) j.push_back(bench::to_json(r));
        return j.dump();
      },
      py::arg("rounds") = 10, py::arg("hosts") = 5);
}
