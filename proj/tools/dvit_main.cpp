#include <CLI11.hpp>

#include <iostream>

#include "dvit/gradient_suite.hpp"
#include "dvit/trainer.hpp"

namespace {

dvit::CascadeConfig build_config(const std::string& config_path,
                                 const std::vector<std::string>& overrides,
                                 int64_t seed_override) {
  dvit::CascadeConfig cfg = config_path.empty()
                                ? dvit::CascadeConfig::desk()
                                : dvit::CascadeConfig::from_file(config_path);
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw dvit::ConfigError("--set expects key=value, got: " + kv);
    cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded dual-ViT landmark detector"};
  app.require_subcommand(1);
  app.fallthrough();  // shared flags may follow the subcommand name

  std::string config_path, out_dir, data_dir;
  std::vector<std::string> overrides;
  int64_t seed = -1;
  app.add_option("--config", config_path, "key=value config file")
      ->configurable(false);
  app.add_option("--set", overrides, "override a config key (key=value)");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out_dir, "output directory");

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  int64_t gen_n = 512, gen_r = 64, gen_m = 5;
  int64_t gen_seed = 0;
  gen->add_option("--n", gen_n, "sample count");
  gen->add_option("--resolution", gen_r, "image resolution");
  gen->add_option("--landmarks", gen_m, "landmark count");
  gen->add_option("--data-seed", gen_seed, "dataset seed");

  auto* train_cmd = app.add_subcommand("train", "train a cascade");
  std::string resume;
  bool augment_on = false;
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");
  train_cmd->add_flag("--augment", augment_on, "enable the standard recipe");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ckpt;
  double threshold = 10.0;
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--threshold", threshold, "FR/AUC cutoff (percent)");

  auto* ablate_cmd = app.add_subcommand("ablate", "train the comparison grid");
  std::vector<std::string> kinds = {"spatial", "channel", "dvit"};
  std::vector<std::string> conns = {"lsc", "rescbsp", "denc"};
  std::vector<int64_t> blocks = {2, 4, 6, 8};
  std::vector<double> stage_ws = {1.0, 1.2, 1.4, 1.6};
  ablate_cmd->add_option("--data", data_dir, "dataset directory")->required();
  ablate_cmd->add_option("--kinds", kinds, "block kinds");
  ablate_cmd->add_option("--connections", conns, "connection strategies");
  ablate_cmd->add_option("--blocks", blocks, "block counts");
  ablate_cmd->add_option("--ws", stage_ws, "stage weighting factors");

  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "run the gradient verification suite");
  double tol = 1e-4;
  gradcheck_cmd->add_option("--tol", tol, "relative tolerance");

  auto* ced_cmd =
      app.add_subcommand("export-ced", "evaluate and export the CED curve");
  ced_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
  ced_cmd->add_option("--data", data_dir, "dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (out_dir.empty()) throw dvit::ConfigError("gen-data needs --out");
      auto samples = dvit::generate_synthetic(gen_n, gen_r, gen_m,
                                              static_cast<uint64_t>(gen_seed));
      dvit::DatasetManifest man;
      man.resolution = gen_r;
      man.seed = static_cast<uint64_t>(gen_seed);
      man.recipe_hash = dvit::AugmentRecipe::none().hash();
      dvit::save_dataset(samples, out_dir, man);
      std::cout << "wrote " << samples.size() << " samples to " << out_dir
                << "\n";
    } else if (train_cmd->parsed()) {
      if (out_dir.empty()) throw dvit::ConfigError("train needs --out");
      dvit::CascadeConfig cfg = build_config(config_path, overrides, seed);
      dvit::TrainOptions opt;
      opt.resume = resume;
      if (augment_on) opt.recipe = dvit::AugmentRecipe::standard();
      dvit::TrainResult res = dvit::train(cfg, data_dir, out_dir, opt);
      std::cout << "final test NME=" << res.report.nme
                << " FR=" << res.report.fr << " AUC=" << res.report.auc
                << "\n";
    } else if (eval_cmd->parsed()) {
      dvit::EvalReport rep =
          dvit::evaluate_checkpoint(ckpt, data_dir, threshold, out_dir);
      std::cout << "NME=" << rep.nme << " FR=" << rep.fr
                << " AUC=" << rep.auc << " (t=" << rep.threshold << ")\n";
    } else if (ablate_cmd->parsed()) {
      if (out_dir.empty()) throw dvit::ConfigError("ablate needs --out");
      dvit::CascadeConfig cfg = build_config(config_path, overrides, seed);
      dvit::AblateAxes axes;
      axes.kinds.clear();
      for (const auto& k : kinds)
        axes.kinds.push_back(dvit::block_kind_from_string(k));
      axes.connections.clear();
      for (const auto& c : conns)
        axes.connections.push_back(dvit::connection_from_string(c));
      axes.blocks = blocks;
      axes.stage_ws = stage_ws;
      dvit::ablate(cfg, axes, data_dir, out_dir);
      std::cout << "wrote " << out_dir << "/ablation.csv\n";
    } else if (gradcheck_cmd->parsed()) {
      auto suite = dvit::run_gradient_suite(tol, seed < 0 ? 0 : seed);
      bool all_pass = true;
      for (const auto& e : suite) {
        std::cout << (e.report.pass ? "PASS" : "FAIL") << "  " << e.name
                  << "  max_rel_err=" << e.report.max_rel_err << " ("
                  << e.report.checked_coords << " coords)\n";
        all_pass = all_pass && e.report.pass;
      }
      return all_pass ? 0 : 1;
    } else if (ced_cmd->parsed()) {
      if (out_dir.empty()) throw dvit::ConfigError("export-ced needs --out");
      dvit::EvalReport rep =
          dvit::evaluate_checkpoint(ckpt, data_dir, 10.0, out_dir);
      std::cout << "wrote " << out_dir << "/ced.csv (" << rep.ced.size()
                << " samples)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
