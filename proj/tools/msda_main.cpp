#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "msda/bound.hpp"
#include "msda/errors.hpp"
#include "msda/experiment.hpp"
#include "msda/gradcheck.hpp"
#include "msda/moments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;

constexpr int kGeneratorVersion = 1;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw msda::DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw msda::DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw msda::DataError("write failed for '" + path + "'");
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

struct GenDataArgs {
  std::string scenario = "blobs";
  int domains = 3;
  int classes = 3;
  int per_class = 100;
  double shift = 2.0;
  double rot = 0.2;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int run_gen_data(const GenDataArgs& args) {
  if (args.scenario != "blobs" && args.scenario != "moons") {
    throw msda::ConfigError("scenario must be blobs or moons");
  }
  const msda::MsdaTask task =
      args.scenario == "blobs"
          ? msda::gen_blobs(args.domains, args.classes, args.per_class, args.shift,
                            args.rot, args.seed)
          : msda::gen_moons(args.domains, args.per_class, args.shift, args.seed);

  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);

  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["generator_version"] = kGeneratorVersion;
  manifest["scenario"] = args.scenario;
  manifest["domains"] = args.domains;
  if (args.scenario == "blobs") manifest["classes"] = args.classes;
  manifest["per_class"] = args.per_class;
  manifest["shift_scale"] = args.shift;
  if (args.scenario == "blobs") manifest["rot_scale"] = args.rot;
  manifest["seed"] = args.seed;
  manifest["files"] = nlohmann::ordered_json::array();

  const auto dir = std::filesystem::path(args.out_dir);
  for (const auto& ds : task.sources) {
    const auto name = ds.name + ".csv";
    msda::save_csv(ds, (dir / name).string());
    manifest["files"].push_back(name);
  }
  msda::save_csv(task.target, (dir / "target.csv").string());
  manifest["files"].push_back("target.csv");
  manifest["target"] = "target.csv";

  write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << manifest["files"].size() << " domain files to " << args.out_dir
            << "\n";
  return kExitOk;
}

int run_train(const std::string& config_path, const std::string& algo_override,
              const std::string& out_path) {
  auto cfg = msda::experiment_config_from_json_string(read_file(config_path));
  if (!algo_override.empty()) {
    cfg.train.algorithm = msda::algorithm_from_string(algo_override);
  }
  const auto result = msda::run_experiment(cfg);
  write_file(out_path, msda::metrics_json_string(cfg, result));

  const auto model_path =
      (std::filesystem::path(out_path).parent_path() /
       (std::filesystem::path(out_path).stem().string() + "_model.json"))
          .string();
  write_file(model_path, msda::to_json_string(result.model));

  std::cout << "algorithm=" << msda::algorithm_name(cfg.train.algorithm)
            << " target_acc[uniform]=" << format_double(result.eval_uniform.accuracy)
            << " target_acc[" << result.eval_weighted.schema
            << "]=" << format_double(result.eval_weighted.accuracy) << "\n";
  return kExitOk;
}

int run_moments(const std::vector<std::string>& csvs, int order,
                const std::string& out_path) {
  if (csvs.size() < 2) throw msda::ConfigError("moments needs at least two CSV inputs");
  std::vector<msda::FeatureMatrix> domains;
  for (const auto& path : csvs) {
    domains.push_back(msda::load_csv(path).features);
    if (domains.back().cols != domains.front().cols) {
      throw msda::DataError("'" + path + "': feature width differs from '" + csvs.front() +
                            "'");
    }
  }
  const auto report = msda::divergence_matrix(domains, order);
  write_file(out_path, msda::to_json_string(report));
  std::cout << "wrote moment report for " << domains.size() << " domains to " << out_path
            << "\n";
  return kExitOk;
}

int run_bound(const std::string& instance_path, const std::string& out_path) {
  const auto instance = msda::bound_instance_from_json_string(read_file(instance_path));
  const auto report = msda::verify_bound_structure(instance);
  write_file(out_path, msda::to_json_string(report));
  std::cout << "satisfied=" << (report.satisfied ? "true" : "false")
            << " lhs=" << format_double(report.lhs_eps_t_hat)
            << " rhs=" << format_double(report.rhs_total) << "\n";
  if (!report.satisfied) {
    std::cout << "violation report:\n" << msda::to_json_string(report);
  }
  return kExitOk;
}

int run_gradcheck(std::uint64_t seed) {
  const auto results = msda::run_gradcheck_suite(seed, 20);
  double worst = 0.0;
  for (const auto& r : results) {
    std::cout << "op=" << r.op << " cases=" << r.cases
              << " max_rel_err=" << format_double(r.max_rel_err) << "\n";
    worst = std::max(worst, r.max_rel_err);
  }
  std::cout << "overall max_rel_err=" << format_double(worst) << "\n";
  if (worst >= 1e-4) {
    std::cout << "FAIL: tolerance 1e-4 exceeded\n";
    return kExitFailure;
  }
  std::cout << "PASS\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moment-matching multi-source domain adaptation toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic multi-domain dataset");
  gen->add_option("--scenario", gen_args.scenario, "blobs|moons")->required();
  gen->add_option("--domains", gen_args.domains, "total domains incl. target");
  gen->add_option("--classes", gen_args.classes, "classes (blobs only)");
  gen->add_option("--per-class", gen_args.per_class, "samples per class per domain");
  gen->add_option("--shift", gen_args.shift, "per-domain translation scale");
  gen->add_option("--rot", gen_args.rot, "per-domain rotation scale (blobs, radians)");
  gen->add_option("--seed", gen_args.seed, "generator seed")->required();
  gen->add_option("--out", gen_args.out_dir, "output directory")->required();

  std::string train_config, train_algo, train_out = "metrics.json";
  auto* train = app.add_subcommand("train", "run a training experiment from a config");
  train->add_option("--config", train_config, "experiment config JSON")->required();
  train->add_option("--algo", train_algo,
                    "override train.algorithm (source_only|source_combine|m3sda|"
                    "m3sda_beta|ss_only|st_only)");
  train->add_option("--out", train_out, "metrics JSON output path");

  std::string moment_a, moment_b;
  std::vector<std::string> moment_more;
  int moment_order = 3;
  std::string moments_out = "report.json";
  auto* moments = app.add_subcommand("moments", "pairwise cross-moment divergence report");
  moments->add_option("--a", moment_a, "first domain CSV")->required();
  moments->add_option("--b", moment_b, "second domain CSV")->required();
  moments->add_option("--more", moment_more, "additional domain CSVs");
  moments->add_option("--order", moment_order, "max moment order");
  moments->add_option("--out", moments_out, "report output path");

  std::string bound_instance, bound_out = "report.json";
  auto* bound = app.add_subcommand("bound", "evaluate the generalization-bound terms");
  bound->add_option("--instance", bound_instance, "1-D binary instance JSON")->required();
  bound->add_option("--out", bound_out, "report output path");

  std::uint64_t gradcheck_seed = 20260810ULL;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--seed", gradcheck_seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train->parsed()) return run_train(train_config, train_algo, train_out);
    if (moments->parsed()) {
      std::vector<std::string> csvs{moment_a, moment_b};
      csvs.insert(csvs.end(), moment_more.begin(), moment_more.end());
      return run_moments(csvs, moment_order, moments_out);
    }
    if (bound->parsed()) return run_bound(bound_instance, bound_out);
    if (gradcheck->parsed()) return run_gradcheck(gradcheck_seed);
  } catch (const msda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const msda::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const msda::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const msda::SchemaError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const msda::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfigError;
}
