#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "soorl/harness.hpp"

namespace py = pybind11;
using namespace soorl;

namespace {

py::list objects_of(const FactoredState& s) {
  py::list out;
  for (const auto& o : s.objects) {
    py::dict d;
    d["class_id"] = o.class_id;
    d["x"] = o.x;
    d["y"] = o.y;
    d["w"] = o.w;
    d["h"] = o.h;
    d["alive"] = o.alive;
    out.append(d);
  }
  return out;
}

ExperimentConfig config_from(const std::string& text) {
  try {
    return parse_config_text(text);
  } catch (const ConfigError& e) {
    throw py::value_error(e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the soorl package";

  m.def("environment_names", &environment_names);
  m.def("exploration_bonus", &exploration_bonus, py::arg("n"), py::arg("beta"));
  m.def("episodes_to_consistent_goal", &episodes_to_consistent_goal, py::arg("reached"));

  py::class_<Environment>(m, "Environment")
      .def_property_readonly("name", &Environment::name)
      .def_property_readonly("action_names", &Environment::action_names)
      .def_property_readonly("atomic_actions", &Environment::atomic_actions)
      .def_property_readonly("episode_cap", &Environment::episode_cap)
      .def_property_readonly("done", &Environment::done)
      .def_property_readonly("goal_reached", &Environment::goal_reached)
      .def("object_classes",
           [](const Environment& e) {
             py::dict d;
             for (const auto& c : e.object_classes()) d[py::int_(c.id)] = c.name;
             return d;
           })
      .def("reset", [](Environment& e, std::uint64_t seed) { return objects_of(e.reset(seed)); }, py::arg("seed") = 0)
      .def(
          "step",
          [](Environment& e, int action, int noops) {
            const StepResult r = e.step({action, noops});
            return py::make_tuple(objects_of(r.state), r.reward, r.done, r.primitive_steps);
          },
          py::arg("action"), py::arg("noops") = 0)
      .def("state", [](const Environment& e) { return objects_of(e.state()); })
      .def("render_json", [](const Environment& e) { return e.render_json().dump(); });

  m.def(
      "make_environment",
      [](const std::string& name) {
        try {
          return make_environment(name);
        } catch (const EnvError& e) {
          throw py::value_error(e.what());
        }
      },
      py::arg("name"));

  m.def(
      "learn_macros",
      [](const std::string& env_name, int k_max, double threshold, int budget, std::uint64_t seed) {
        auto env = make_environment(env_name);
        MacroLearnerConfig cfg{k_max, threshold, budget, seed};
        const auto result = learn_macro_actions(*env, macro_candidates(*env), cfg);
        std::vector<std::pair<int, int>> out;
        for (const auto& mac : complete_macro_set(*env, result.macros)) out.emplace_back(mac.atomic, mac.noops);
        return out;
      },
      py::arg("env"), py::arg("k_max") = 8, py::arg("threshold") = 0.05, py::arg("budget") = 2000,
      py::arg("seed") = 0);

  m.def(
      "resolve_config", [](const std::string& text) { return config_from(text).to_json().dump(); },
      py::arg("config_json"));

  m.def(
      "run_rows_csv",
      [](const std::string& text) {
        const ExperimentConfig cfg = config_from(text);
        std::vector<ResultRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_rows(cfg);
        }
        std::ostringstream os;
        write_rows_csv(os, rows);
        return os.str();
      },
      py::arg("config_json"));

  m.def(
      "run_experiment",
      [](const std::string& text) {
        const ExperimentConfig cfg = config_from(text);
        ExperimentOutput out;
        {
          py::gil_scoped_release release;
          out = run_experiment(cfg);
        }
        py::dict d;
        d["rows"] = out.rows_path;
        d["summary"] = out.summary_path;
        d["config"] = out.config_path;
        return d;
      },
      py::arg("config_json"));
}
