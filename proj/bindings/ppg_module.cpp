// Python bindings for the main operations: GAE, the loss functions, the
// categorical distribution, the vectorized envs and end-to-end training.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ppg/config.hpp"
#include "ppg/gradcheck.hpp"
#include "ppg/harness.hpp"
#include "ppg/losses.hpp"
#include "ppg/rollout.hpp"

namespace py = pybind11;
using namespace ppg;

namespace {

EnvParams to_env_params(const py::dict& d) {
  EnvParams out;
  for (const auto& item : d)
    out[py::cast<std::string>(item.first)] = py::cast<double>(item.second);
  return out;
}

ExperimentConfig config_from_text(const std::string& text,
                                  const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = parse_config_text(text);
  apply_overrides(cfg, overrides);
  finalize_config(cfg);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Phasic policy gradient core";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<ContractError>(m, "ContractError");
  py::register_exception<NumericError>(m, "NumericError");

  m.def(
      "compute_gae",
      [](const Matd& rewards, const Matd& values,
         const std::vector<std::uint8_t>& dones, double gamma, double lambda) {
        const auto out = compute_gae(rewards, values, dones, GaeConfig{gamma, lambda});
        return py::make_tuple(out.advantages, out.targets);
      },
      py::arg("rewards"), py::arg("values"), py::arg("dones"),
      py::arg("gamma") = 0.999, py::arg("lambda_") = 0.95,
      "GAE advantages and value targets over [W x T] batches; values carries "
      "the bootstrap column [W x (T+1)].");

  m.def("loss_clip", &loss_clip<double>, py::arg("logp_new"),
        py::arg("logp_old"), py::arg("adv"), py::arg("eps") = 0.2);
  m.def("loss_value", &loss_value<double>, py::arg("v_pred"), py::arg("v_targ"));
  m.def("loss_aux", &loss_aux<double>, py::arg("aux_value"), py::arg("v_targ"));
  m.def("loss_joint", &loss_joint<double>, py::arg("aux_value"),
        py::arg("v_targ"), py::arg("logits_frozen"), py::arg("logits_current"),
        py::arg("beta_clone") = 1.0);
  m.def("loss_kl_policy", &loss_kl_policy<double>, py::arg("logp_new"),
        py::arg("logp_old"), py::arg("adv"), py::arg("logits_old"),
        py::arg("logits_new"), py::arg("beta_pi") = 1.0);
  m.def(
      "log_prob",
      [](const Matd& logits, const std::vector<int>& actions) {
        return CategoricalDist<double>{logits}.log_prob(actions);
      },
      py::arg("logits"), py::arg("actions"));
  m.def(
      "entropy",
      [](const Matd& logits) { return CategoricalDist<double>{logits}.entropy(); },
      py::arg("logits"));
  m.def(
      "kl",
      [](const Matd& p_logits, const Matd& q_logits) {
        return CategoricalDist<double>{p_logits}.kl(
            CategoricalDist<double>{q_logits});
      },
      py::arg("p_logits"), py::arg("q_logits"), "KL(p || q) per row");

  py::class_<RewardNormalizer>(m, "RewardNormalizer")
      .def(py::init<int, double>(), py::arg("num_envs"), py::arg("gamma") = 0.999)
      .def("normalize_step", &RewardNormalizer::normalize_step,
           py::arg("rewards"), py::arg("dones"))
      .def_property_readonly("std", &RewardNormalizer::std_estimate);

  py::class_<VecEnv>(m, "VecEnv")
      .def(py::init([](const std::string& name, int num_envs, std::uint64_t seed,
                       const py::dict& params) {
             return new VecEnv(name, num_envs, seed, to_env_params(params));
           }),
           py::arg("name"), py::arg("num_envs") = 1, py::arg("seed") = 0,
           py::arg("params") = py::dict())
      .def("reset", &VecEnv::reset)
      .def(
          "step",
          [](VecEnv& env, const std::vector<int>& actions) {
            Matd obs;
            Vecd rewards;
            std::vector<std::uint8_t> dones;
            std::vector<EpisodeResult> completed;
            env.step(actions, obs, rewards, dones, &completed);
            py::list eps;
            for (const auto& e : completed)
              eps.append(py::make_tuple(e.instance, e.ret, e.length));
            return py::make_tuple(obs, rewards, dones, eps);
          },
          py::arg("actions"))
      .def_property_readonly("num_envs", &VecEnv::num_envs)
      .def_property_readonly("obs_dim",
                             [](const VecEnv& e) { return e.spec().obs_dim; })
      .def_property_readonly(
          "action_count", [](const VecEnv& e) { return e.spec().action_count; })
      .def_property_readonly("max_episode_len", [](const VecEnv& e) {
        return e.spec().max_episode_len;
      });

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::vector<std::string>& overrides,
         const std::string& out_dir, int jobs) {
        ExperimentConfig cfg = config_from_text(config_text, overrides);
        std::ostringstream log;
        const auto summary = run_experiment(cfg, jobs, log, out_dir);
        py::dict out;
        out["dir"] = summary.dir;
        out["mean_final_return"] = summary.mean_final_return;
        out["std_final_return"] = summary.std_final_return;
        py::list runs;
        for (const auto& r : summary.runs) {
          py::dict rd;
          rd["seed"] = r.seed;
          rd["dir"] = r.dir;
          rd["final_return"] = r.final_return;
          runs.append(rd);
        }
        out["runs"] = runs;
        out["log"] = log.str();
        return out;
      },
      py::arg("config_text"), py::arg("overrides") = std::vector<std::string>{},
      py::arg("out_dir") = "", py::arg("jobs") = 1,
      "Train config x seeds; returns the summary dict.");

  m.def(
      "validate_config",
      [](const std::string& config_text, const std::vector<std::string>& overrides) {
        return serialize_config(config_from_text(config_text, overrides));
      },
      py::arg("config_text"), py::arg("overrides") = std::vector<std::string>{},
      "Parses + validates; returns the canonical snapshot text.");

  m.def(
      "gradcheck",
      [](int instances) {
        py::list out;
        for (const auto& r : run_gradient_checks(instances)) {
          py::dict d;
          d["loss"] = r.loss_name;
          d["max_err"] = r.max_err;
          d["pass"] = r.pass;
          out.append(d);
        }
        return out;
      },
      py::arg("instances") = 5);
}
