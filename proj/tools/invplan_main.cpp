// invplan: batch experiment driver for inversion-plan geometry.
//
// Subcommands: theorem1, mcp, plan, transport, stability, heis-suite.
// Global flags: --seed, --out DIR, --config FILE; subcommand flags override
// config file values. Exit codes: 0 pass, 1 property failure (witness
// written), 2 invalid value or unknown key, 3 malformed JSON, 4 missing
// required field, 5 unknown experiment kind, 6 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "invplan/experiments.hpp"

using namespace invplan;

int main(int argc, char** argv) {
  CLI::App app{"inversion-plan geometry experiments"};
  app.require_subcommand(0, 1);

  std::string config_path, out_dir, space, fixture, measure, measure2, build, verify, push_map,
      rescale;
  long long seed = -1;
  int trials = -1, n_particles = -1;
  double eps = -1, slack = -1, kpar = std::nan(""), npar = -1, tolerance = -1, cell = -1,
         snap_h = -1, tpar = -1;

  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "RNG seed (required here or in the config)");
  app.add_option("--out", out_dir, "output directory");

  std::vector<std::string> kinds = {"theorem1", "mcp", "plan", "transport", "stability",
                                    "heis-suite"};
  for (const auto& kind : kinds) {
    auto* sub = app.add_subcommand(kind);
    sub->add_option("--space", space);
    sub->add_option("--trials", trials);
    sub->add_option("--eps", eps);
    sub->add_option("--slack", slack);
    sub->add_option("--K", kpar);
    sub->add_option("--N", npar);
    sub->add_option("--tolerance", tolerance);
    sub->add_option("--cell-size", cell);
    sub->add_option("--n-particles", n_particles);
    sub->add_option("--snap-h", snap_h);
    sub->add_option("--t", tpar);
    sub->add_option("--fixture", fixture);
    sub->add_option("--measure", measure);
    sub->add_option("--measure2", measure2);
    sub->add_option("--build", build);
    sub->add_option("--verify", verify);
    sub->add_option("--push", push_map);
    sub->add_option("--rescale", rescale);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    json j = json::object();
    if (!config_path.empty()) {
      try {
        j = json::parse(read_text_file(config_path));
      } catch (const json::exception& e) {
        std::cerr << "error: malformed config JSON: " << e.what() << "\n";
        return kMalformedJson;
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIoError;
      }
    }
    auto subs = app.get_subcommands();
    if (!subs.empty()) j["experiment"] = subs[0]->get_name();
    if (seed >= 0) j["seed"] = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) j["out"] = out_dir;
    if (!space.empty()) j["space"] = space;
    if (trials > 0) j["trials"] = trials;
    if (n_particles > 0) j["n_particles"] = n_particles;
    if (eps > 0) j["eps"] = eps;
    if (slack >= 0) j["slack"] = slack;
    if (!std::isnan(kpar)) j["K"] = kpar;
    if (npar > 0) j["N"] = npar;
    if (tolerance > 0) j["tolerance"] = tolerance;
    if (cell > 0) j["cell_size"] = cell;
    if (snap_h > 0) j["snap_h"] = snap_h;
    if (tpar >= 0) j["t"] = tpar;
    if (!fixture.empty()) j["fixture"] = fixture;
    if (!measure.empty()) j["measure"] = measure;
    if (!measure2.empty()) j["measure2"] = measure2;
    if (!build.empty()) j["build"] = build;
    if (!verify.empty()) j["verify"] = verify;
    if (!push_map.empty()) j["push_map"] = push_map;
    if (!rescale.empty()) j["rescale"] = rescale;

    ExperimentConfig cfg = parse_config(j);
    ExperimentResult res = run_experiment(cfg);

    std::filesystem::create_directories(cfg.out);
    std::string report_path = cfg.out + "/report.json";
    write_text_file(report_path, res.report + "\n");
    if (res.witness) write_text_file(cfg.out + "/witness.json", *res.witness + "\n");
    if (res.csv) write_text_file(cfg.out + "/" + res.csv->first, res.csv->second);

    std::cout << (res.exit_code == kPass ? "PASS" : "FAIL") << " " << cfg.experiment
              << " report=" << report_path;
    if (res.witness) std::cout << " witness=" << cfg.out + "/witness.json";
    std::cout << "\n";
    return res.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kMalformedJson;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidValue;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
}
