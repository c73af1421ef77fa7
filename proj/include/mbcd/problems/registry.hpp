#pragma once

#include <functional>
#include <map>

#include "mbcd/problems/alternating_projection.hpp"
#include "mbcd/problems/burer_monteiro.hpp"
#include "mbcd/problems/essential_matrix.hpp"
#include "mbcd/problems/gpca.hpp"
#include "mbcd/problems/homomorphic_sensing.hpp"
#include "mbcd/problems/irls.hpp"

namespace mbcd {

// Problem parameters as parsed from a config: numbers, strings, or numeric
// lists.  Factories validate every key and reject unknown ones.
using ParamValue = std::variant<double, std::string, std::vector<double>>;
using Params = std::map<std::string, ParamValue>;

inline double param_num(const Params& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  if (it == p.end()) return fallback;
  const double* v = std::get_if<double>(&it->second);
  require(v != nullptr, "param '" + key + "' must be a number");
  return *v;
}

inline int param_int(const Params& p, const std::string& key, int fallback) {
  const double v = param_num(p, key, static_cast<double>(fallback));
  require(v == std::floor(v), "param '" + key + "' must be an integer");
  return static_cast<int>(v);
}

inline std::string param_str(const Params& p, const std::string& key, std::string fallback) {
  const auto it = p.find(key);
  if (it == p.end()) return fallback;
  const std::string* v = std::get_if<std::string>(&it->second);
  require(v != nullptr, "param '" + key + "' must be a string");
  return *v;
}

inline std::vector<int> param_int_list(const Params& p, const std::string& key,
                                       std::vector<int> fallback) {
  const auto it = p.find(key);
  if (it == p.end()) return fallback;
  const auto* v = std::get_if<std::vector<double>>(&it->second);
  require(v != nullptr, "param '" + key + "' must be a list of numbers");
  std::vector<int> out;
  for (const double x : *v) {
    require(x == std::floor(x), "param '" + key + "' must hold integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

inline void reject_unknown_params(const Params& p, const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : p) {
    (void)value;
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == key;
    require(ok, "unknown problem param '" + key + "'");
  }
}

// A constructed instance plus whatever ground truth the generator can plant.
struct BuiltProblem {
  std::shared_ptr<Problem> problem;
  std::optional<double> target_value;           // known optimal / planted objective
  std::map<std::string, MatrixXd> truth;        // planted quantities by name
};

struct RegistryEntry {
  std::string description;
  std::vector<std::string> params;  // accepted keys with defaults in parens
  std::function<BuiltProblem(const Params&, std::uint64_t)> build;
};

inline const std::map<std::string, RegistryEntry>& problem_registry() {
  static const std::map<std::string, RegistryEntry> registry = [] {
    std::map<std::string, RegistryEntry> r;

    r["gpca-ls"] = RegistryEntry{
        "generalized PCA, least-squares product loss",
        {"D (4)", "m (200)", "c ([2,2])", "noise (0)", "outliers (0)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"D", "m", "c", "noise", "outliers"});
          Rng rng(splitmix64(seed));
          const auto gen = generate_gpca(param_int(p, "D", 4), param_int(p, "m", 200),
                                         param_int_list(p, "c", {2, 2}),
                                         param_num(p, "noise", 0.0),
                                         param_num(p, "outliers", 0.0), rng);
          BuiltProblem out;
          out.problem = std::make_shared<GpcaProblem>(
              "gpca-ls", gen.points, param_int_list(p, "c", {2, 2}), GpcaLoss::LeastSquares);
          if (param_num(p, "noise", 0.0) == 0.0 && param_num(p, "outliers", 0.0) == 0.0)
            out.target_value = 0.0;
          for (std::size_t i = 0; i < gen.truth.frames.size(); ++i)
            out.truth["frame" + std::to_string(i + 1)] = gen.truth.frames[i];
          return out;
        }};

    r["gpca-huber"] = RegistryEntry{
        "generalized PCA, Huber product loss (majorize-minimize blocks)",
        {"D (4)", "m (200)", "c ([2,2])", "eps (0.1)", "noise (0)", "outliers (0.1)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"D", "m", "c", "eps", "noise", "outliers"});
          Rng rng(splitmix64(seed));
          const auto gen = generate_gpca(param_int(p, "D", 4), param_int(p, "m", 200),
                                         param_int_list(p, "c", {2, 2}),
                                         param_num(p, "noise", 0.0),
                                         param_num(p, "outliers", 0.1), rng);
          BuiltProblem out;
          out.problem = std::make_shared<GpcaProblem>(
              "gpca-huber", gen.points, param_int_list(p, "c", {2, 2}), GpcaLoss::Huber,
              param_num(p, "eps", 0.1));
          for (std::size_t i = 0; i < gen.truth.frames.size(); ++i)
            out.truth["frame" + std::to_string(i + 1)] = gen.truth.frames[i];
          return out;
        }};

    r["irls-gm"] = RegistryEntry{
        "IRLS with Geman-McClure loss (point-cloud or linear-regression residuals)",
        {"residual (pcr)", "m (40)", "n (5)", "noise (0.01)", "outliers (0.1)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"residual", "m", "n", "noise", "outliers"});
          Rng rng(splitmix64(seed));
          const std::string residual = param_str(p, "residual", "pcr");
          BuiltProblem out;
          if (residual == "pcr") {
            const auto gen = generate_pcr(param_int(p, "m", 40), param_num(p, "noise", 0.01),
                                          param_num(p, "outliers", 0.1), rng);
            out.problem = std::make_shared<IrlsProblem>("irls-gm", gen.source, gen.target,
                                                        IrlsLoss::GemanMcClure, 0.0);
            out.truth["rotation"] = gen.rotation;
            out.truth["translation"] = gen.translation;
          } else if (residual == "linreg") {
            const auto gen =
                generate_linreg(param_int(p, "m", 40), param_int(p, "n", 5),
                                param_num(p, "noise", 0.01), param_num(p, "outliers", 0.1), rng);
            out.problem = std::make_shared<IrlsProblem>("irls-gm", gen.design, gen.obs,
                                                        IrlsLoss::GemanMcClure, 0.0);
            out.truth["coef"] = gen.coef;
          } else {
            throw std::invalid_argument("irls-gm: residual must be 'pcr' or 'linreg'");
          }
          return out;
        }};

    r["irls-sl1"] = RegistryEntry{
        "IRLS with smoothed-l1 loss (point-cloud or linear-regression residuals)",
        {"residual (linreg)", "m (60)", "n (5)", "eps (0.1)", "noise (0.01)", "outliers (0.1)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"residual", "m", "n", "eps", "noise", "outliers"});
          Rng rng(splitmix64(seed));
          const std::string residual = param_str(p, "residual", "linreg");
          const double eps = param_num(p, "eps", 0.1);
          BuiltProblem out;
          if (residual == "pcr") {
            const auto gen = generate_pcr(param_int(p, "m", 60), param_num(p, "noise", 0.01),
                                          param_num(p, "outliers", 0.1), rng);
            out.problem = std::make_shared<IrlsProblem>("irls-sl1", gen.source, gen.target,
                                                        IrlsLoss::SmoothedL1, eps);
            out.truth["rotation"] = gen.rotation;
            out.truth["translation"] = gen.translation;
          } else if (residual == "linreg") {
            const auto gen =
                generate_linreg(param_int(p, "m", 60), param_int(p, "n", 5),
                                param_num(p, "noise", 0.01), param_num(p, "outliers", 0.1), rng);
            out.problem = std::make_shared<IrlsProblem>("irls-sl1", gen.design, gen.obs,
                                                        IrlsLoss::SmoothedL1, eps);
            out.truth["coef"] = gen.coef;
          } else {
            throw std::invalid_argument("irls-sl1: residual must be 'pcr' or 'linreg'");
          }
          return out;
        }};

    r["bm-maxcut"] = RegistryEntry{
        "Max-Cut Burer-Monteiro relaxation (sphere blocks, d = 1)",
        {"n (8)", "r (= n)", "density (1.0)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"n", "r", "density"});
          Rng rng(splitmix64(seed));
          const int n = param_int(p, "n", 8);
          const int r = param_int(p, "r", n);
          const auto gen = generate_maxcut(n, param_num(p, "density", 1.0), rng);
          BuiltProblem out;
          out.problem = std::make_shared<BmProblem>("bm-maxcut", gen.cost, n, 1, r);
          if (gen.brute.has_value()) {
            out.target_value = gen.brute->value;
            out.truth["assignment"] = gen.brute->assignment;
          }
          return out;
        }};

    r["bm-rotsync"] = RegistryEntry{
        "rotation synchronization Burer-Monteiro factorization (d = r frames)",
        {"n (6)", "d (3)", "noise (0.05)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"n", "d", "noise"});
          Rng rng(splitmix64(seed));
          const int n = param_int(p, "n", 6);
          const int d = param_int(p, "d", 3);
          const auto gen = generate_rotsync(n, d, param_num(p, "noise", 0.05), rng);
          BuiltProblem out;
          out.problem = std::make_shared<BmProblem>("bm-rotsync", gen.cost, n, d, d);
          out.target_value = gen.target_value;
          for (std::size_t i = 0; i < gen.rotations.size(); ++i)
            out.truth["rotation" + std::to_string(i + 1)] = gen.rotations[i];
          return out;
        }};

    r["essential"] = RegistryEntry{
        "essential-matrix estimation from bearing pairs (R gradient block, t exact)",
        {"m (30)", "noise (0)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"m", "noise"});
          Rng rng(splitmix64(seed));
          const auto gen =
              generate_essential(param_int(p, "m", 30), param_num(p, "noise", 0.0), rng);
          BuiltProblem out;
          out.problem = std::make_shared<EssentialProblem>("essential", gen.view1, gen.view2);
          if (param_num(p, "noise", 0.0) == 0.0) out.target_value = 0.0;
          out.truth["rotation"] = gen.rotation;
          out.truth["translation"] = gen.translation;
          return out;
        }};

    r["hs-perm"] = RegistryEntry{
        "homomorphic sensing with an unknown permutation",
        {"m (7)", "n (4)", "noise (0)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"m", "n", "noise"});
          Rng rng(splitmix64(seed));
          const auto gen = generate_hs(param_int(p, "m", 7), param_int(p, "n", 4),
                                       HsTransformClass::Permutation,
                                       param_num(p, "noise", 0.0), rng);
          BuiltProblem out;
          out.problem = std::make_shared<HsProblem>("hs-perm", gen.design, gen.obs,
                                                    HsTransformClass::Permutation);
          if (param_num(p, "noise", 0.0) == 0.0) out.target_value = 0.0;
          out.truth["coef"] = gen.coef;
          out.truth["transform"] = gen.transform;
          return out;
        }};

    r["hs-sign"] = RegistryEntry{
        "homomorphic sensing with unknown signs",
        {"m (10)", "n (4)", "noise (0)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"m", "n", "noise"});
          Rng rng(splitmix64(seed));
          const auto gen = generate_hs(param_int(p, "m", 10), param_int(p, "n", 4),
                                       HsTransformClass::Sign, param_num(p, "noise", 0.0), rng);
          BuiltProblem out;
          out.problem =
              std::make_shared<HsProblem>("hs-sign", gen.design, gen.obs, HsTransformClass::Sign);
          if (param_num(p, "noise", 0.0) == 0.0) out.target_value = 0.0;
          out.truth["coef"] = gen.coef;
          out.truth["transform"] = gen.transform;
          return out;
        }};

    r["hs-signedperm"] = RegistryEntry{
        "homomorphic sensing with an unknown signed permutation",
        {"m (6)", "n (3)", "noise (0)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"m", "n", "noise"});
          Rng rng(splitmix64(seed));
          const auto gen = generate_hs(param_int(p, "m", 6), param_int(p, "n", 3),
                                       HsTransformClass::SignedPermutation,
                                       param_num(p, "noise", 0.0), rng);
          BuiltProblem out;
          out.problem = std::make_shared<HsProblem>("hs-signedperm", gen.design, gen.obs,
                                                    HsTransformClass::SignedPermutation);
          if (param_num(p, "noise", 0.0) == 0.0) out.target_value = 0.0;
          out.truth["coef"] = gen.coef;
          out.truth["transform"] = gen.transform;
          return out;
        }};

    r["ap"] = RegistryEntry{
        "alternating projection on two factors (lines3d or sphere-affine)",
        {"mode (lines3d)", "n (4)", "dim (2)"},
        [](const Params& p, std::uint64_t seed) {
          reject_unknown_params(p, {"mode", "n", "dim"});
          Rng rng(splitmix64(seed));
          const std::string mode = param_str(p, "mode", "lines3d");
          ApGenerated gen = mode == "lines3d"
                                ? generate_ap_lines(rng)
                                : generate_ap_sphere_affine(param_int(p, "n", 4),
                                                            param_int(p, "dim", 2), rng);
          require(mode == "lines3d" || mode == "sphere-affine",
                  "ap: mode must be 'lines3d' or 'sphere-affine'");
          BuiltProblem out;
          out.problem = std::make_shared<ApProblem>("ap", gen.factor1, gen.factor2);
          out.target_value = gen.target_value;
          return out;
        }};

    return r;
  }();
  return registry;
}

inline BuiltProblem build_problem(const std::string& name, const Params& params,
                                  std::uint64_t instance_seed) {
  const auto& reg = problem_registry();
  const auto it = reg.find(name);
  require(it != reg.end(), "unknown problem '" + name + "'");
  return it->second.build(params, instance_seed);
}

inline std::vector<std::string> problem_names() {
  std::vector<std::string> names;
  for (const auto& [name, entry] : problem_registry()) {
    (void)entry;
    names.push_back(name);
  }
  return names;  // std::map iteration is already sorted
}

}  // namespace mbcd
